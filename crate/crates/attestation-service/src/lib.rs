// SPDX-License-Identifier: Apache-2.0

//! Registrar and verifier.
//!
//! The registrar authenticates an ephemeral vTPM by its SNP attestation
//! report instead of an EK certificate, then binds the AIK to the EK with a
//! credential activation round trip. The verifier challenges registered
//! agents for quotes and checks them, together with their event logs,
//! against an attestation policy.

mod check;
mod policy;
mod service;
mod store;

pub use attest_wire::{Failure, FailureCode, Verdict};
pub use check::{activation_proof, check_ek_report, evaluate_quote};
pub use policy::{AttestationPolicy, PolicyError};
pub use service::{AttestationService, ServiceConfig, DEFAULT_REGISTRAR_PORT, DEFAULT_VERIFIER_PORT};
pub use store::{RegistrationRecord, RegistrationStatus, RegistrationStore};
