// SPDX-License-Identifier: Apache-2.0

//! Attestation policy.
//!
//! JSON file format, all binary values hex-encoded:
//!
//! ```json
//! {
//!   "golden_measurement": "<48-byte SHA-384 launch digest>",
//!   "pinned_amd_root": "<SEC1 public key of the trusted root>",
//!   "required_pcr_mask": 1279,
//!   "allowed_events": [
//!     { "pcr": 10, "event_type": "ima", "digests": ["<sha256>", "..."] }
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use attest_wire::{EventType, HexBytes};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("golden measurement must be 48 bytes")]
    MeasurementLength,
}

#[derive(Serialize, Deserialize)]
struct AllowedEvents {
    pcr: u32,
    event_type: EventType,
    digests: Vec<HexBytes>,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    #[serde(with = "hex")]
    golden_measurement: Vec<u8>,
    #[serde(with = "hex")]
    pinned_amd_root: Vec<u8>,
    required_pcr_mask: u32,
    #[serde(default)]
    allowed_events: Vec<AllowedEvents>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationPolicy {
    pub golden_measurement: [u8; 48],
    pub pinned_amd_root: Vec<u8>,
    /// SHA-256 bank PCRs the verifier asks to have quoted.
    pub required_pcr_mask: u32,
    allowed: BTreeMap<(u32, EventType), BTreeSet<Vec<u8>>>,
}

impl AttestationPolicy {
    pub fn new(golden_measurement: [u8; 48], pinned_amd_root: Vec<u8>, required_pcr_mask: u32) -> Self {
        Self {
            golden_measurement,
            pinned_amd_root,
            required_pcr_mask,
            allowed: BTreeMap::new(),
        }
    }

    pub fn allow(&mut self, pcr: u32, event_type: EventType, digest: impl Into<Vec<u8>>) {
        self.allowed.entry((pcr, event_type)).or_default().insert(digest.into());
    }

    pub fn allows(&self, pcr: u32, event_type: EventType, digest: &[u8]) -> bool {
        self.allowed
            .get(&(pcr, event_type))
            .is_some_and(|set| set.contains(digest))
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.values().map(BTreeSet::len).sum()
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let file: PolicyFile = serde_json::from_str(text)?;
        let golden_measurement = file
            .golden_measurement
            .try_into()
            .map_err(|_| PolicyError::MeasurementLength)?;
        let mut policy = Self::new(golden_measurement, file.pinned_amd_root, file.required_pcr_mask);
        for group in file.allowed_events {
            for d in group.digests {
                policy.allow(group.pcr, group.event_type, d.0);
            }
        }
        Ok(policy)
    }

    pub fn to_json(&self) -> String {
        let file = PolicyFile {
            golden_measurement: self.golden_measurement.to_vec(),
            pinned_amd_root: self.pinned_amd_root.clone(),
            required_pcr_mask: self.required_pcr_mask,
            allowed_events: self
                .allowed
                .iter()
                .map(|(&(pcr, event_type), set)| AllowedEvents {
                    pcr,
                    event_type,
                    digests: set.iter().cloned().map(HexBytes).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("policy serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
