// SPDX-License-Identifier: Apache-2.0

//! The CPU random number source (RDRAND/RDSEED) seen by a launched guest.

use hkdf::Hkdf;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use tpm_engine::{EntropySource, TpmError};

use crate::error::PlatformError;

/// Largest single draw.
pub const MAX_DRAW: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMode {
    /// Host randomness.
    Os,
    /// A DRBG whose output stream is a pure function of the seed.
    Deterministic([u8; 32]),
    /// Broken hardware returning one byte value forever.
    FaultyConstant(u8),
}

enum Generator {
    Os,
    Drbg(Box<ChaCha20Rng>),
    Constant(u8),
}

pub struct CpuEntropy {
    mode: EntropyMode,
    generator: Generator,
    draws: u64,
    mix_key: Option<zeroize::Zeroizing<[u8; 32]>>,
}

impl std::fmt::Debug for CpuEntropy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CpuEntropy")
            .field("mode", &self.mode)
            .field("draws", &self.draws)
            .field("mixed", &self.mix_key.is_some())
            .finish()
    }
}

impl CpuEntropy {
    pub fn new(mode: EntropyMode) -> Self {
        let generator = match mode {
            EntropyMode::Os => Generator::Os,
            EntropyMode::Deterministic(seed) => Generator::Drbg(Box::new(ChaCha20Rng::from_seed(seed))),
            EntropyMode::FaultyConstant(b) => Generator::Constant(b),
        };
        Self {
            mode,
            generator,
            draws: 0,
            mix_key: None,
        }
    }

    pub fn mode(&self) -> EntropyMode {
        self.mode
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn is_mixed(&self) -> bool {
        self.mix_key.is_some()
    }

    /// Folds a platform-derived key into every subsequent draw. Output stays
    /// unpredictable to anyone without the key even if the raw source is
    /// constant.
    pub fn mix_with(&mut self, derived_key: [u8; 32]) {
        self.mix_key = Some(zeroize::Zeroizing::new(derived_key));
    }

    pub fn draw(&mut self, n: usize) -> Result<Vec<u8>, PlatformError> {
        if n > MAX_DRAW {
            return Err(PlatformError::DrawTooLarge);
        }
        let mut raw = vec![0u8; n];
        match &mut self.generator {
            Generator::Os => rand::rngs::OsRng.fill_bytes(&mut raw),
            Generator::Drbg(rng) => rng.fill_bytes(&mut raw),
            Generator::Constant(b) => raw.fill(*b),
        }
        let counter = self.draws;
        self.draws += 1;
        match &self.mix_key {
            None => Ok(raw),
            Some(key) => {
                let hk = Hkdf::<Sha256>::new(Some(key.as_ref()), &raw);
                let mut out = vec![0u8; n];
                hk.expand_multi_info(&[b"cpu entropy mix", &counter.to_be_bytes()], &mut out)
                    .expect("1024 bytes is within HKDF-SHA256 output limits");
                Ok(out)
            }
        }
    }
}

impl EntropySource for CpuEntropy {
    fn fill(&mut self, buf: &mut [u8]) -> tpm_engine::Result<()> {
        for chunk in buf.chunks_mut(MAX_DRAW) {
            let bytes = self.draw(chunk.len()).map_err(|_| TpmError::EntropyUnavailable)?;
            chunk.copy_from_slice(&bytes);
        }
        Ok(())
    }
}
