// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCode {
    SigInvalid,
    ChainIncomplete,
    VmplNonZero,
    EkDigestMismatch,
    MeasurementMismatch,
    NonceMismatch,
    PcrLogDivergence,
    PolicyViolation,
    CredentialFailure,
}

impl std::fmt::Display for FailureCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub code: FailureCode,
    pub detail: String,
}

impl Failure {
    pub fn new(code: FailureCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }
}

/// Trusted exactly when there are no failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub trusted: bool,
    pub failures: Vec<Failure>,
}

impl Verdict {
    pub fn from_failures(failures: Vec<Failure>) -> Self {
        Self {
            trusted: failures.is_empty(),
            failures,
        }
    }

    pub fn trusted() -> Self {
        Self::from_failures(Vec::new())
    }

    pub fn has(&self, code: FailureCode) -> bool {
        self.failures.iter().any(|f| f.code == code)
    }

    pub fn codes(&self) -> Vec<FailureCode> {
        self.failures.iter().map(|f| f.code).collect()
    }
}
