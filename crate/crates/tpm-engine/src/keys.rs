// SPDX-License-Identifier: Apache-2.0

//! Key objects, templates and the canonical public-key serialization.

use hkdf::Hkdf;
use p256::ecdsa::VerifyingKey;
use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::SecretKey;
use sha2::{Digest, Sha256};

use crate::error::{Result, TpmError};

/// SHA-256 over the canonical public serialization of an object.
pub type Name = [u8; 32];

/// Length of [`PublicKey::to_bytes`]: algorithm tag plus uncompressed point.
pub const PUBLIC_KEY_LEN: usize = 66;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum KeyAlgorithm {
    EccP256Sign = 0x01,
    EccP256Decrypt = 0x02,
}

impl KeyAlgorithm {
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0x01 => Some(KeyAlgorithm::EccP256Sign),
            0x02 => Some(KeyAlgorithm::EccP256Decrypt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct KeyAttributes {
    pub restricted: bool,
    pub decrypt: bool,
    pub sign: bool,
    pub sensitive_data_origin: bool,
}

impl KeyAttributes {
    pub const RESTRICTED_DECRYPT: KeyAttributes = KeyAttributes {
        restricted: true,
        decrypt: true,
        sign: false,
        sensitive_data_origin: true,
    };

    pub const RESTRICTED_SIGN: KeyAttributes = KeyAttributes {
        restricted: true,
        decrypt: false,
        sign: true,
        sensitive_data_origin: true,
    };

    pub fn to_bits(self) -> u8 {
        (self.restricted as u8)
            | (self.decrypt as u8) << 1
            | (self.sign as u8) << 2
            | (self.sensitive_data_origin as u8) << 3
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits & !0x0F != 0 {
            return Err(TpmError::UnsupportedTemplate);
        }
        Ok(Self {
            restricted: bits & 1 != 0,
            decrypt: bits & 2 != 0,
            sign: bits & 4 != 0,
            sensitive_data_origin: bits & 8 != 0,
        })
    }

    pub fn is_storage_parent(&self) -> bool {
        self.restricted && self.decrypt && !self.sign
    }
}

/// Public half of an ECC P-256 object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    algorithm: KeyAlgorithm,
    point: p256::PublicKey,
}

impl PublicKey {
    pub(crate) fn new(algorithm: KeyAlgorithm, point: p256::PublicKey) -> Self {
        Self { algorithm, point }
    }

    pub fn algorithm(&self) -> KeyAlgorithm {
        self.algorithm
    }

    /// `tag || 0x04 || X || Y`.
    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        let mut out = [0u8; PUBLIC_KEY_LEN];
        out[0] = self.algorithm as u8;
        out[1..].copy_from_slice(self.point.to_encoded_point(false).as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PUBLIC_KEY_LEN || bytes[1] != 0x04 {
            return Err(TpmError::BadPublicKey);
        }
        let algorithm = KeyAlgorithm::from_tag(bytes[0]).ok_or(TpmError::BadPublicKey)?;
        let point = p256::PublicKey::from_sec1_bytes(&bytes[1..]).map_err(|_| TpmError::BadPublicKey)?;
        Ok(Self { algorithm, point })
    }

    pub fn name(&self) -> Name {
        Sha256::digest(self.to_bytes()).into()
    }

    pub(crate) fn point(&self) -> &p256::PublicKey {
        &self.point
    }

    pub fn verifying_key(&self) -> Option<VerifyingKey> {
        match self.algorithm {
            KeyAlgorithm::EccP256Sign => Some(VerifyingKey::from(&self.point)),
            KeyAlgorithm::EccP256Decrypt => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Hierarchy {
    Endorsement = 1,
    Storage = 2,
    Null = 3,
}

impl Hierarchy {
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Hierarchy::Endorsement),
            2 => Some(Hierarchy::Storage),
            3 => Some(Hierarchy::Null),
            _ => None,
        }
    }
}

/// Template a primary object is derived from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyTemplate {
    pub algorithm: KeyAlgorithm,
    pub attributes: KeyAttributes,
    /// Caller-chosen discriminator, at most 64 bytes.
    pub unique: Vec<u8>,
}

impl KeyTemplate {
    /// Default ECC P-256 endorsement key template.
    pub fn endorsement() -> Self {
        Self {
            algorithm: KeyAlgorithm::EccP256Decrypt,
            attributes: KeyAttributes::RESTRICTED_DECRYPT,
            unique: Vec::new(),
        }
    }

    pub fn storage_root() -> Self {
        Self::endorsement()
    }

    /// Restricted signing key used as the attestation identity key.
    pub fn attestation() -> Self {
        Self {
            algorithm: KeyAlgorithm::EccP256Sign,
            attributes: KeyAttributes::RESTRICTED_SIGN,
            unique: b"AIK".to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.attributes;
        let ok = match self.algorithm {
            KeyAlgorithm::EccP256Sign => a.sign && !a.decrypt,
            KeyAlgorithm::EccP256Decrypt => a.decrypt && !a.sign,
        };
        if !ok || self.unique.len() > 64 {
            return Err(TpmError::UnsupportedTemplate);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 + self.unique.len());
        out.push(self.algorithm as u8);
        out.push(self.attributes.to_bits());
        out.push(self.unique.len() as u8);
        out.extend_from_slice(&self.unique);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 3 || bytes.len() != 3 + bytes[2] as usize {
            return Err(TpmError::Decode("template"));
        }
        let algorithm = KeyAlgorithm::from_tag(bytes[0]).ok_or(TpmError::UnsupportedTemplate)?;
        let attributes = KeyAttributes::from_bits(bytes[1])?;
        Ok(Self {
            algorithm,
            attributes,
            unique: bytes[3..].to_vec(),
        })
    }
}

/// A loaded object. The private scalar never leaves the engine.
pub(crate) struct KeyObject {
    pub(crate) public: PublicKey,
    pub(crate) secret: SecretKey,
    pub(crate) attributes: KeyAttributes,
}

impl KeyObject {
    pub(crate) fn from_secret(algorithm: KeyAlgorithm, secret: SecretKey, attributes: KeyAttributes) -> Self {
        Self {
            public: PublicKey::new(algorithm, secret.public_key()),
            secret,
            attributes,
        }
    }
}

/// Derives the private scalar of a primary object from its hierarchy seed.
pub(crate) fn derive_primary(seed: &[u8; 32], template: &KeyTemplate) -> SecretKey {
    let hk = Hkdf::<Sha256>::new(Some(b"svtpm primary object"), seed);
    let info = template.to_bytes();
    // Out-of-range candidates are vanishingly rare; the counter keeps the
    // derivation total.
    for counter in 0u32.. {
        let mut okm = zeroize::Zeroizing::new([0u8; 32]);
        hk.expand_multi_info(&[&info, &counter.to_be_bytes()], okm.as_mut())
            .expect("32 bytes is a valid HKDF output length");
        if let Ok(sk) = SecretKey::from_slice(okm.as_ref()) {
            return sk;
        }
    }
    unreachable!("counter space exhausted")
}
