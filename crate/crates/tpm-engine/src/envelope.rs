// SPDX-License-Identifier: Apache-2.0

//! Ephemeral-ECDH + HKDF-SHA256 + AES-256-GCM envelope shared by the
//! credential, seal and key-wrapping constructions.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use p256::ecdh::EphemeralSecret;
use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::SecretKey;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use zeroize::Zeroizing;

const POINT_LEN: usize = 65;
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Envelope {
    ephemeral: [u8; POINT_LEN],
    nonce: [u8; NONCE_LEN],
    ciphertext: Vec<u8>,
}

impl Envelope {
    pub(crate) fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(POINT_LEN + NONCE_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.ephemeral);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub(crate) fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < POINT_LEN + NONCE_LEN + TAG_LEN {
            return None;
        }
        let mut ephemeral = [0u8; POINT_LEN];
        ephemeral.copy_from_slice(&bytes[..POINT_LEN]);
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(&bytes[POINT_LEN..POINT_LEN + NONCE_LEN]);
        Some(Self {
            ephemeral,
            nonce,
            ciphertext: bytes[POINT_LEN + NONCE_LEN..].to_vec(),
        })
    }
}

fn cipher(shared: &[u8], ephemeral: &[u8], label: &[u8], binding: &[u8]) -> Aes256Gcm {
    let hk = Hkdf::<Sha256>::new(Some(ephemeral), shared);
    let mut key = Zeroizing::new([0u8; 32]);
    hk.expand_multi_info(&[label, binding], key.as_mut())
        .expect("32 bytes is a valid HKDF output length");
    Aes256Gcm::new_from_slice(key.as_ref()).expect("key length is 32")
}

pub(crate) fn seal_to<R: RngCore + CryptoRng>(
    recipient: &p256::PublicKey,
    label: &[u8],
    binding: &[u8],
    plaintext: &[u8],
    rng: &mut R,
) -> Envelope {
    let eph = EphemeralSecret::random(rng);
    let mut ephemeral = [0u8; POINT_LEN];
    ephemeral.copy_from_slice(eph.public_key().to_encoded_point(false).as_bytes());
    let shared = eph.diffie_hellman(recipient);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ciphertext = cipher(shared.raw_secret_bytes(), &ephemeral, label, binding)
        .encrypt(
            &Nonce::from(nonce),
            Payload {
                msg: plaintext,
                aad: &ephemeral,
            },
        )
        .expect("AES-GCM encryption of bounded input");
    Envelope {
        ephemeral,
        nonce,
        ciphertext,
    }
}

pub(crate) fn open_with(
    secret: &SecretKey,
    label: &[u8],
    binding: &[u8],
    env: &Envelope,
) -> Option<Zeroizing<Vec<u8>>> {
    let eph = p256::PublicKey::from_sec1_bytes(&env.ephemeral).ok()?;
    let shared = p256::ecdh::diffie_hellman(secret.to_nonzero_scalar(), eph.as_affine());
    cipher(shared.raw_secret_bytes(), &env.ephemeral, label, binding)
        .decrypt(
            &Nonce::from(env.nonce),
            Payload {
                msg: &env.ciphertext,
                aad: &env.ephemeral,
            },
        )
        .ok()
        .map(Zeroizing::new)
}
