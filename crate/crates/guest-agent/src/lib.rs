// SPDX-License-Identifier: Apache-2.0

//! The guest side of the stack: a TPM client over the SVSM command channel,
//! measured boot and IMA logging, the attestation agent, and the full disk
//! encryption unlock flow.

mod agent;
mod client;
mod error;
mod fde;
mod measure;

pub use agent::{activation_proof, Agent, AgentIdentity, Direction, Transcript, TranscriptEntry};
pub use client::{SoftwareTpm, TpmClient, TpmTransport};
pub use error::AgentError;
pub use fde::{fde_parent_public, fde_unlock, prepare_disk, wrap_for_boot, FdeParent, DISK_KEY_LEN};
pub use measure::{boot_and_measure, EventManifest, MeasuredEvent, BOOT_PCRS, IMA_PCR};
