// SPDX-License-Identifier: Apache-2.0

//! Key preparation that needs no engine state: creating an intermediate
//! storage key, sealing data to it and wrapping it to a target parent. These
//! run on a user workstation using only public material of the target engine.

use p256::SecretKey;
use rand::{CryptoRng, RngCore};

use crate::envelope::{seal_to, Envelope};
use crate::error::{Result, TpmError};
use crate::keys::{KeyAlgorithm, KeyAttributes, Name, PublicKey, PUBLIC_KEY_LEN};

pub(crate) const SEAL_LABEL: &[u8] = b"SEAL\0";
pub(crate) const DUPLICATE_LABEL: &[u8] = b"DUPLICATE\0";

/// Maximum size of sealed data.
pub const MAX_SEALED_SECRET: usize = 128;

/// A restricted decryption key generated outside the target engine.
pub struct OfflineKey {
    secret: SecretKey,
    public: PublicKey,
}

impl OfflineKey {
    pub fn generate_storage_key<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = SecretKey::random(rng);
        let public = PublicKey::new(KeyAlgorithm::EccP256Decrypt, secret.public_key());
        Self { secret, public }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }
}

/// Data encrypted to a storage parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedBlob(pub(crate) Envelope);

impl SealedBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Envelope::from_bytes(bytes)
            .map(SealedBlob)
            .ok_or(TpmError::Decode("sealed blob"))
    }
}

/// A storage key whose private part is encrypted to a new parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrappedKey {
    pub public: PublicKey,
    pub attributes: KeyAttributes,
    pub(crate) sensitive: Envelope,
}

impl WrappedKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.public.to_bytes());
        out.push(self.attributes.to_bits());
        out.extend_from_slice(&self.sensitive.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() <= PUBLIC_KEY_LEN + 1 {
            return Err(TpmError::Decode("wrapped key"));
        }
        let public = PublicKey::from_bytes(&bytes[..PUBLIC_KEY_LEN])?;
        let attributes = KeyAttributes::from_bits(bytes[PUBLIC_KEY_LEN])?;
        let sensitive = Envelope::from_bytes(&bytes[PUBLIC_KEY_LEN + 1..]).ok_or(TpmError::Decode("wrapped key"))?;
        Ok(Self {
            public,
            attributes,
            sensitive,
        })
    }
}

pub(crate) fn wrap_binding(parent: &Name, key: &Name) -> [u8; 64] {
    let mut out = [0u8; 64];
    out[..32].copy_from_slice(parent);
    out[32..].copy_from_slice(key);
    out
}

/// Seals `secret` to a storage parent given only its public part.
pub fn seal<R: RngCore + CryptoRng>(parent_public: &PublicKey, secret: &[u8], rng: &mut R) -> Result<SealedBlob> {
    if parent_public.algorithm() != KeyAlgorithm::EccP256Decrypt {
        return Err(TpmError::KeyNotDecrypting);
    }
    if secret.len() > MAX_SEALED_SECRET {
        return Err(TpmError::DataTooLarge);
    }
    Ok(SealedBlob(seal_to(
        parent_public.point(),
        SEAL_LABEL,
        &parent_public.name(),
        secret,
        rng,
    )))
}

/// Wraps `key` so that it can be imported under `new_parent` only.
pub fn wrap_key<R: RngCore + CryptoRng>(key: &OfflineKey, new_parent: &PublicKey, rng: &mut R) -> Result<WrappedKey> {
    if new_parent.algorithm() != KeyAlgorithm::EccP256Decrypt {
        return Err(TpmError::KeyNotDecrypting);
    }
    let binding = wrap_binding(&new_parent.name(), &key.public.name());
    let scalar = key.secret.to_bytes();
    Ok(WrappedKey {
        public: key.public.clone(),
        attributes: KeyAttributes::RESTRICTED_DECRYPT,
        sensitive: seal_to(new_parent.point(), DUPLICATE_LABEL, &binding, &scalar[..], rng),
    })
}
