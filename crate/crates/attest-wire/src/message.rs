// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::verdict::Failure;

pub type Uuid = [u8; 16];

/// Binary data that travels as a hex string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HexBytes(#[serde(with = "hex")] pub Vec<u8>);

impl From<Vec<u8>> for HexBytes {
    fn from(v: Vec<u8>) -> Self {
        HexBytes(v)
    }
}

/// Every message on the registrar and verifier connections.
///
/// Registration: agent sends `Register`, registrar answers `Challenge` (or a
/// rejecting `RegisterResult`), agent sends `ActivateProof`, registrar
/// answers `RegisterResult`.
///
/// Attestation: verifier sends `QuoteRequest`, agent answers
/// `QuoteResponse`, verifier answers `AttestationResult`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Message {
    Register {
        #[serde(with = "hex")]
        uuid: Uuid,
        #[serde(with = "hex")]
        ek_pub: Vec<u8>,
        #[serde(with = "hex")]
        aik_pub: Vec<u8>,
        /// Bytes read from the EK certificate NV index, unparsed.
        #[serde(with = "hex")]
        ek_report: Vec<u8>,
        #[serde(with = "hex")]
        vcek_chain: Vec<u8>,
    },
    Challenge {
        #[serde(with = "hex")]
        credential_blob: Vec<u8>,
    },
    ActivateProof {
        #[serde(with = "hex")]
        uuid: Uuid,
        #[serde(with = "hex")]
        proof: Vec<u8>,
    },
    RegisterResult {
        accepted: bool,
        failures: Vec<Failure>,
    },
    QuoteRequest {
        #[serde(with = "hex")]
        nonce: Vec<u8>,
        pcr_mask: u32,
    },
    QuoteResponse {
        #[serde(with = "hex")]
        uuid: Uuid,
        #[serde(with = "hex")]
        quote: Vec<u8>,
        pcr_values: Vec<HexBytes>,
        event_log: String,
    },
    AttestationResult {
        trusted: bool,
        failures: Vec<Failure>,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Register { .. } => "Register",
            Message::Challenge { .. } => "Challenge",
            Message::ActivateProof { .. } => "ActivateProof",
            Message::RegisterResult { .. } => "RegisterResult",
            Message::QuoteRequest { .. } => "QuoteRequest",
            Message::QuoteResponse { .. } => "QuoteResponse",
            Message::AttestationResult { .. } => "AttestationResult",
        }
    }
}
