// SPDX-License-Identifier: Apache-2.0

use p256::ecdsa::signature::Verifier;
use p256::ecdsa::Signature;
use sha2::{Digest, Sha256};

use crate::error::{Result, TpmError};
use crate::keys::{Name, PublicKey};
use crate::pcr::{decode_selections, encode_selections, PcrSelection};

const GENERATED_MAGIC: u32 = 0xFF54_4347;
const ATTEST_QUOTE: u16 = 0x8018;

/// Maximum caller nonce length.
pub const MAX_NONCE: usize = 64;

pub const SIGNATURE_LEN: usize = 64;

/// A signed statement over selected PCR values and a caller nonce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quote {
    /// Name of the signing key.
    pub signer: Name,
    pub nonce: Vec<u8>,
    pub selection: Vec<PcrSelection>,
    /// Boot counter of the engine that produced the quote.
    pub boot_counter: u64,
    /// SHA-256 over the selected PCR values, concatenated in selection order.
    pub pcr_digest: [u8; 32],
    /// ECDSA P-256 `r || s` over [`Quote::body`].
    pub signature: [u8; SIGNATURE_LEN],
}

/// Digest bound into a quote for the given PCR values.
pub fn pcr_digest(values: &[Vec<u8>]) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in values {
        h.update(v);
    }
    h.finalize().into()
}

impl Quote {
    /// The signed portion.
    pub fn body(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128);
        out.extend_from_slice(&GENERATED_MAGIC.to_be_bytes());
        out.extend_from_slice(&ATTEST_QUOTE.to_be_bytes());
        out.extend_from_slice(&self.signer);
        out.push(self.nonce.len() as u8);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.boot_counter.to_be_bytes());
        encode_selections(&self.selection, &mut out);
        out.extend_from_slice(&self.pcr_digest);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body();
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = TpmError::Decode("quote");
        let mut r = Reader(bytes);
        if r.take(4)? != GENERATED_MAGIC.to_be_bytes() || r.take(2)? != ATTEST_QUOTE.to_be_bytes() {
            return Err(err);
        }
        let signer: Name = r.take(32)?.try_into().map_err(|_| err.clone())?;
        let nonce_len = r.take(1)?[0] as usize;
        if nonce_len > MAX_NONCE {
            return Err(err);
        }
        let nonce = r.take(nonce_len)?.to_vec();
        let boot_counter = u64::from_be_bytes(r.take(8)?.try_into().map_err(|_| err.clone())?);
        let (selection, used) = decode_selections(r.0)?;
        r.take(used)?;
        let pcr_digest = r.take(32)?.try_into().map_err(|_| err.clone())?;
        let signature = r.take(SIGNATURE_LEN)?.try_into().map_err(|_| err.clone())?;
        if !r.0.is_empty() {
            return Err(err);
        }
        Ok(Self {
            signer,
            nonce,
            selection,
            boot_counter,
            pcr_digest,
            signature,
        })
    }

    /// Checks the signature under `aik`. Does not check the nonce or PCRs.
    pub fn verify(&self, aik: &PublicKey) -> bool {
        let Some(vk) = aik.verifying_key() else {
            return false;
        };
        let Ok(sig) = Signature::from_slice(&self.signature) else {
            return false;
        };
        vk.verify(&self.body(), &sig).is_ok()
    }
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(TpmError::Decode("quote truncated"));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }
}
