// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("the hypervisor halted the VM")]
    ChannelHalted,
    #[error("channel protocol violation: {0}")]
    ProtocolError(&'static str),
    #[error("no command pending")]
    NothingPending,
    /// The command completed with an engine error code.
    #[error("engine error {0:#x}")]
    Engine(u32),
}
