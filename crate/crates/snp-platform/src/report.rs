// SPDX-License-Identifier: Apache-2.0

//! Attestation report layout.
//!
//! ```text
//! offset  size  field
//! 0x00       4  version (u32 LE)
//! 0x04       4  vmpl (u32 LE)
//! 0x08      48  measurement
//! 0x38      64  report_data
//! 0x78      16  boot_nonce
//! 0x88      96  signature (ECDSA P-384 r || s over bytes 0x00..0x88)
//! ```

use p384::ecdsa::signature::{Signer, Verifier};
use p384::ecdsa::{Signature, SigningKey, VerifyingKey};

use crate::error::PlatformError;

pub const REPORT_VERSION: u32 = 1;
pub const REPORT_LEN: usize = 232;
pub const SIGNED_LEN: usize = 0x88;

const VERSION_OFFSET: usize = 0x00;
const VMPL_OFFSET: usize = 0x04;
const MEASUREMENT_OFFSET: usize = 0x08;
const REPORT_DATA_OFFSET: usize = 0x38;
const BOOT_NONCE_OFFSET: usize = 0x78;
const SIGNATURE_OFFSET: usize = 0x88;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationReport {
    pub version: u32,
    pub vmpl: u32,
    pub measurement: [u8; 48],
    pub report_data: [u8; 64],
    pub boot_nonce: [u8; 16],
    pub signature: [u8; 96],
}

impl AttestationReport {
    pub fn to_bytes(&self) -> [u8; REPORT_LEN] {
        let mut out = [0u8; REPORT_LEN];
        out[..SIGNED_LEN].copy_from_slice(&self.signed_bytes());
        out[SIGNATURE_OFFSET..].copy_from_slice(&self.signature);
        out
    }

    pub fn signed_bytes(&self) -> [u8; SIGNED_LEN] {
        let mut out = [0u8; SIGNED_LEN];
        out[VERSION_OFFSET..VMPL_OFFSET].copy_from_slice(&self.version.to_le_bytes());
        out[VMPL_OFFSET..MEASUREMENT_OFFSET].copy_from_slice(&self.vmpl.to_le_bytes());
        out[MEASUREMENT_OFFSET..REPORT_DATA_OFFSET].copy_from_slice(&self.measurement);
        out[REPORT_DATA_OFFSET..BOOT_NONCE_OFFSET].copy_from_slice(&self.report_data);
        out[BOOT_NONCE_OFFSET..SIGNATURE_OFFSET].copy_from_slice(&self.boot_nonce);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PlatformError> {
        if bytes.len() != REPORT_LEN {
            return Err(PlatformError::Malformed("attestation report"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        Ok(Self {
            version: u32_at(VERSION_OFFSET),
            vmpl: u32_at(VMPL_OFFSET),
            measurement: bytes[MEASUREMENT_OFFSET..REPORT_DATA_OFFSET].try_into().unwrap(),
            report_data: bytes[REPORT_DATA_OFFSET..BOOT_NONCE_OFFSET].try_into().unwrap(),
            boot_nonce: bytes[BOOT_NONCE_OFFSET..SIGNATURE_OFFSET].try_into().unwrap(),
            signature: bytes[SIGNATURE_OFFSET..].try_into().unwrap(),
        })
    }

    pub(crate) fn sign(&mut self, vcek: &SigningKey) {
        let sig: Signature = vcek.sign(&self.signed_bytes());
        self.signature.copy_from_slice(&sig.to_bytes());
    }

    /// Checks the report signature against a VCEK public key.
    pub fn verify_signature(&self, vcek: &VerifyingKey) -> bool {
        match Signature::from_slice(&self.signature) {
            Ok(sig) => vcek.verify(&self.signed_bytes(), &sig).is_ok(),
            Err(_) => false,
        }
    }
}
