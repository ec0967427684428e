// SPDX-License-Identifier: Apache-2.0

//! Simulated AMD secure processor.
//!
//! Measures launch images, hands each VMPL its own communication key, signs
//! attestation reports with a per-chip VCEK chained to a simulated AMD root,
//! and provides the guest's CPU entropy source.

mod cert;
mod entropy;
mod error;
mod image;
mod message;
mod platform;
mod report;

pub use cert::{decode_chain, encode_chain, verify_report, Certificate, SimulatedRoot};
pub use entropy::{CpuEntropy, EntropyMode, MAX_DRAW};
pub use error::{PlatformError, VerifyError};
pub use image::LaunchImage;
pub use message::{AeadMessage, GuestMessenger, MessageHeader, VMPL_COUNT};
pub use platform::{ContextRole, LaunchConfig, PlatformHandle, SecureProcessor};
pub use report::{AttestationReport, REPORT_LEN, REPORT_VERSION};
