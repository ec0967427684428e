// SPDX-License-Identifier: Apache-2.0

//! Simulated AMD certificate chain.
//!
//! Each certificate is a tag-length-value blob:
//!
//! ```text
//! 0x30 len16 {
//!     0x0C len16 subject (UTF-8)
//!     0x0C len16 issuer  (UTF-8)
//!     0x03 len16 public key (SEC1 uncompressed P-384, 97 bytes)
//!     0x04 len16 signature (ECDSA P-384 r || s over the three fields above)
//! }
//! ```
//!
//! A chain is the root certificate followed by the VCEK certificate.

use std::sync::LazyLock;

use p384::ecdsa::signature::{Signer, Verifier};
use p384::ecdsa::{Signature, SigningKey, VerifyingKey};
use sha2::{Digest, Sha384};

use crate::error::VerifyError;
use crate::report::AttestationReport;

const SEQUENCE: u8 = 0x30;
const UTF8: u8 = 0x0C;
const BIT_STRING: u8 = 0x03;
const OCTET_STRING: u8 = 0x04;

pub const ROOT_SUBJECT: &str = "ARK-Sim";
pub const VCEK_SUBJECT: &str = "VCEK-Sim";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject: String,
    pub issuer: String,
    pub public_key: Vec<u8>,
    pub signature: Vec<u8>,
}

fn put(out: &mut Vec<u8>, tag: u8, value: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(value.len() as u16).to_be_bytes());
    out.extend_from_slice(value);
}

fn take<'a>(bytes: &mut &'a [u8], tag: u8) -> Result<&'a [u8], VerifyError> {
    if bytes.len() < 3 || bytes[0] != tag {
        return Err(VerifyError::MalformedChain);
    }
    let len = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
    if bytes.len() < 3 + len {
        return Err(VerifyError::MalformedChain);
    }
    let value = &bytes[3..3 + len];
    *bytes = &bytes[3 + len..];
    Ok(value)
}

impl Certificate {
    fn tbs(subject: &str, issuer: &str, public_key: &[u8]) -> Vec<u8> {
        let mut tbs = Vec::new();
        put(&mut tbs, UTF8, subject.as_bytes());
        put(&mut tbs, UTF8, issuer.as_bytes());
        put(&mut tbs, BIT_STRING, public_key);
        tbs
    }

    pub(crate) fn issue(subject: &str, subject_key: &VerifyingKey, issuer: &str, issuer_key: &SigningKey) -> Self {
        let public_key = subject_key.to_encoded_point(false).as_bytes().to_vec();
        let sig: Signature = issuer_key.sign(&Self::tbs(subject, issuer, &public_key));
        Self {
            subject: subject.to_owned(),
            issuer: issuer.to_owned(),
            public_key,
            signature: sig.to_bytes().to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Self::tbs(&self.subject, &self.issuer, &self.public_key);
        put(&mut body, OCTET_STRING, &self.signature);
        let mut out = Vec::with_capacity(body.len() + 3);
        put(&mut out, SEQUENCE, &body);
        out
    }

    fn parse(bytes: &mut &[u8]) -> Result<Self, VerifyError> {
        let mut body = take(bytes, SEQUENCE)?;
        let subject = String::from_utf8(take(&mut body, UTF8)?.to_vec()).map_err(|_| VerifyError::MalformedChain)?;
        let issuer = String::from_utf8(take(&mut body, UTF8)?.to_vec()).map_err(|_| VerifyError::MalformedChain)?;
        let public_key = take(&mut body, BIT_STRING)?.to_vec();
        let signature = take(&mut body, OCTET_STRING)?.to_vec();
        if !body.is_empty() {
            return Err(VerifyError::MalformedChain);
        }
        Ok(Self {
            subject,
            issuer,
            public_key,
            signature,
        })
    }

    pub fn verifying_key(&self) -> Result<VerifyingKey, VerifyError> {
        VerifyingKey::from_sec1_bytes(&self.public_key).map_err(|_| VerifyError::MalformedChain)
    }

    /// Checks this certificate's signature under `issuer`.
    pub fn verify_signed_by(&self, issuer: &VerifyingKey) -> bool {
        let Ok(sig) = Signature::from_slice(&self.signature) else {
            return false;
        };
        issuer
            .verify(&Self::tbs(&self.subject, &self.issuer, &self.public_key), &sig)
            .is_ok()
    }
}

pub fn encode_chain(certs: &[Certificate]) -> Vec<u8> {
    certs.iter().flat_map(Certificate::to_bytes).collect()
}

pub fn decode_chain(mut bytes: &[u8]) -> Result<Vec<Certificate>, VerifyError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        out.push(Certificate::parse(&mut bytes)?);
    }
    Ok(out)
}

/// The in-repo stand-in for the AMD root key. Its key is derived from a
/// fixed label, so every build pins the same root.
pub struct SimulatedRoot {
    key: SigningKey,
    cert: Certificate,
}

static ROOT: LazyLock<SimulatedRoot> = LazyLock::new(|| {
    let scalar = Sha384::digest(b"svtpm-sim simulated AMD root key, test use only");
    let key = SigningKey::from_slice(&scalar).expect("fixed label hashes to a valid scalar");
    let cert = Certificate::issue(ROOT_SUBJECT, key.verifying_key(), ROOT_SUBJECT, &key);
    SimulatedRoot { key, cert }
});

impl SimulatedRoot {
    pub fn get() -> &'static SimulatedRoot {
        &ROOT
    }

    pub(crate) fn signing_key(&self) -> &SigningKey {
        &self.key
    }

    pub fn certificate(&self) -> &Certificate {
        &self.cert
    }

    /// SEC1 uncompressed public key that verifiers pin.
    pub fn public_key_bytes(&self) -> Vec<u8> {
        self.cert.public_key.clone()
    }
}

/// Verifies `report` against an encoded chain whose root must equal
/// `pinned_root` (SEC1 public key bytes).
pub fn verify_report(report: &AttestationReport, chain: &[u8], pinned_root: &[u8]) -> Result<(), VerifyError> {
    let certs = decode_chain(chain)?;
    let [root, vcek] = certs.as_slice() else {
        return if certs.len() < 2 {
            Err(VerifyError::ChainIncomplete)
        } else {
            Err(VerifyError::MalformedChain)
        };
    };
    if root.public_key != pinned_root {
        return Err(VerifyError::UntrustedRoot);
    }
    let root_key = root.verifying_key()?;
    if !root.verify_signed_by(&root_key) || !vcek.verify_signed_by(&root_key) {
        return Err(VerifyError::BadCertificate);
    }
    if !report.verify_signature(&vcek.verifying_key()?) {
        return Err(VerifyError::BadSignature);
    }
    Ok(())
}
