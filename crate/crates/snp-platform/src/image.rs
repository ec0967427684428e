// SPDX-License-Identifier: Apache-2.0

use sha2::{Digest, Sha384};

/// Ordered boot-time binaries loaded into the guest at launch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LaunchImage {
    parts: Vec<(String, Vec<u8>)>,
}

impl LaunchImage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_part(mut self, label: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        self.push(label, bytes);
        self
    }

    pub fn push(&mut self, label: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.parts.push((label.into(), bytes.into()));
    }

    pub fn parts(&self) -> &[(String, Vec<u8>)] {
        &self.parts
    }

    pub fn parts_mut(&mut self) -> &mut [(String, Vec<u8>)] {
        &mut self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// SHA-384 over `len(label) || label || len(bytes) || bytes` for each part
    /// in order, lengths as u64 little-endian.
    pub fn measure(&self) -> [u8; 48] {
        let mut h = Sha384::new();
        for (label, bytes) in &self.parts {
            h.update((label.len() as u64).to_le_bytes());
            h.update(label.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        h.finalize().into()
    }
}
