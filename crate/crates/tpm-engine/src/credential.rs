// SPDX-License-Identifier: Apache-2.0

//! Verifier-side half of the MakeCredential / ActivateCredential pair.

use rand::{CryptoRng, RngCore};

use crate::envelope::{seal_to, Envelope};
use crate::error::{Result, TpmError};
use crate::keys::{KeyAlgorithm, Name, PublicKey};

pub(crate) const CREDENTIAL_LABEL: &[u8] = b"IDENTITY\0";

/// Maximum credential secret length.
pub const MAX_CREDENTIAL_SECRET: usize = 32;

/// Secret encrypted to an EK and bound to the name of an attestation key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialBlob(pub(crate) Envelope);

impl CredentialBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Envelope::from_bytes(bytes)
            .map(CredentialBlob)
            .ok_or(TpmError::Decode("credential blob"))
    }
}

/// Wraps `secret` so that only an engine holding the private half of
/// `ek_public` and with an object named `aik_name` loaded can recover it.
/// Runs outside of any engine.
pub fn make_credential<R: RngCore + CryptoRng>(
    ek_public: &PublicKey,
    aik_name: &Name,
    secret: &[u8],
    rng: &mut R,
) -> Result<CredentialBlob> {
    if ek_public.algorithm() != KeyAlgorithm::EccP256Decrypt {
        return Err(TpmError::BadPublicKey);
    }
    if secret.len() > MAX_CREDENTIAL_SECRET {
        return Err(TpmError::SecretTooLarge);
    }
    Ok(CredentialBlob(seal_to(
        ek_public.point(),
        CREDENTIAL_LABEL,
        aik_name,
        secret,
        rng,
    )))
}
