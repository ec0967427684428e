// SPDX-License-Identifier: Apache-2.0

use attest_wire::{Failure, FrameError};
use thiserror::Error;
use tpm_engine::TpmError;
use vmpl_channel::ChannelError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("TPM: {0}")]
    Tpm(TpmError),
    #[error("channel: {0}")]
    Channel(ChannelError),
    #[error("transport: {0}")]
    Transport(String),
    #[error("registrar rejected registration: {0:?}")]
    RegistrarRejected(Vec<Failure>),
    #[error("protocol: {0}")]
    Protocol(&'static str),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
}

impl From<TpmError> for AgentError {
    fn from(e: TpmError) -> Self {
        AgentError::Tpm(e)
    }
}

impl From<ChannelError> for AgentError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::Engine(code) => match TpmError::from_code(code) {
                Some(t) => AgentError::Tpm(t),
                None => AgentError::Channel(e),
            },
            e => AgentError::Channel(e),
        }
    }
}

impl From<FrameError> for AgentError {
    fn from(e: FrameError) -> Self {
        AgentError::Transport(e.to_string())
    }
}

impl From<std::io::Error> for AgentError {
    fn from(e: std::io::Error) -> Self {
        AgentError::Transport(e.to_string())
    }
}
