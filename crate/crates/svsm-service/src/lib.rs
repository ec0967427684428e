// SPDX-License-Identifier: Apache-2.0

//! The VMPL0 resident service.
//!
//! At launch the service manufactures a fresh vTPM, creates the endorsement
//! key, asks the secure processor for a report whose user data is
//! `SHA-512(EK public)`, and stores that report at the NV index where an EK
//! certificate would normally live. It then serves TPM commands from the
//! guest over the command page.

mod instance;
mod vm;

pub use instance::{ek_report_data, ProvisionOptions, SvsmError, SvsmInstance, EK_REPORT_NV_INDEX, SEED_MIX_LABEL};
pub use vm::{GuestVm, SharedPlatform};
