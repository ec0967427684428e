// SPDX-License-Identifier: Apache-2.0

use crate::error::{Result, TpmError};

/// Source of random bytes used to manufacture an engine instance.
///
/// The engine draws every hierarchy seed from here. Implementations model
/// the CPU instruction-level RNG (RDRAND/RDSEED) of the hosting platform.
pub trait EntropySource {
    /// Fills `buf` completely or fails with [`TpmError::EntropyUnavailable`].
    fn fill(&mut self, buf: &mut [u8]) -> Result<()>;
}

impl<T: EntropySource + ?Sized> EntropySource for &mut T {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        (**self).fill(buf)
    }
}

/// Host randomness. Convenient for tests and for the guest-userspace software
/// TPM used by attack scenarios.
#[derive(Debug, Default, Clone, Copy)]
pub struct OsEntropy;

impl EntropySource for OsEntropy {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        use rand::RngCore;
        rand::rngs::OsRng
            .try_fill_bytes(buf)
            .map_err(|_| TpmError::EntropyUnavailable)
    }
}

/// Adapts any `rand` RNG into an entropy source.
#[derive(Debug, Clone)]
pub struct RngEntropy<R>(pub R);

impl<R: rand::RngCore> EntropySource for RngEntropy<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.try_fill_bytes(buf).map_err(|_| TpmError::EntropyUnavailable)
    }
}
