// SPDX-License-Identifier: Apache-2.0

//! Messages exchanged between the guest agent and the attestation service,
//! the measurement event log, and attestation verdicts.

mod eventlog;
mod frame;
mod message;
mod verdict;

pub use eventlog::{EventLog, EventLogEntry, EventLogError, EventType};
pub use frame::{read_frame, read_message, write_frame, write_message, FrameError, MAX_FRAME};
pub use message::{HexBytes, Message, Uuid};
pub use verdict::{Failure, FailureCode, Verdict};
