// SPDX-License-Identifier: Apache-2.0

use attest_wire::Verdict;
use guest_agent::{AgentError, Transcript};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONTRACT: u8 = 1;
pub const EXIT_UNTRUSTED: u8 = 2;
pub const EXIT_TRANSPORT: u8 = 3;

/// Outcome of one scenario, printed as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    /// Honest runs: the stack was trusted. Attacks: the defense fired.
    /// Disk unlock: every lifecycle step behaved as required.
    pub passed: bool,
    pub exit_code: u8,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
    pub transcript: Transcript,
}

impl ScenarioReport {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            passed: false,
            exit_code: EXIT_CONTRACT,
            verdicts: Vec::new(),
            notes: Vec::new(),
            transcript: Vec::new(),
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// A report for a run cut short by `err`.
    pub fn aborted(mut self, err: &ScenarioError) -> Self {
        self.passed = false;
        self.exit_code = err.exit_code();
        self.notes.push(format!("aborted: {err}"));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("{0}")]
    Failed(String),
}

impl ScenarioError {
    pub fn exit_code(&self) -> u8 {
        match self {
            ScenarioError::Transport(_) => EXIT_TRANSPORT,
            ScenarioError::Failed(_) => EXIT_CONTRACT,
        }
    }
}

impl From<AgentError> for ScenarioError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Transport(t) => ScenarioError::Transport(t),
            e => ScenarioError::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Transport(e.to_string())
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ScenarioError {
            fn from(e: $t) -> Self {
                ScenarioError::Failed(e.to_string())
            }
        }
    )*};
}

failed_from!(
    svsm_service::SvsmError,
    snp_platform::PlatformError,
    tpm_engine::TpmError,
    vmpl_channel::ChannelError
);
