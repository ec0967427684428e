// SPDX-License-Identifier: Apache-2.0

//! Guest request messages protected under the per-VMPL communication keys.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};

type GcmNonce = Nonce<aes_gcm::aead::consts::U12>;
use zeroize::Zeroizing;

use crate::error::PlatformError;
use crate::report::{AttestationReport, REPORT_LEN};

pub const VMPL_COUNT: usize = 4;

pub const MSG_REPORT_REQ: u8 = 5;
pub const MSG_REPORT_RSP: u8 = 6;

const HEADER_LEN: usize = 12;
const REQUEST_LEN: usize = 68;

/// Header authenticated as associated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageHeader {
    pub msg_type: u8,
    pub vmpck_id: u8,
    pub seq: u64,
}

impl MessageHeader {
    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0] = 1;
        out[1] = self.msg_type;
        out[2] = self.vmpck_id;
        out[4..].copy_from_slice(&self.seq.to_le_bytes());
        out
    }

    fn from_bytes(b: &[u8]) -> Result<Self, PlatformError> {
        if b.len() < HEADER_LEN || b[0] != 1 || b[3] != 0 {
            return Err(PlatformError::Malformed("message header"));
        }
        Ok(Self {
            msg_type: b[1],
            vmpck_id: b[2],
            seq: u64::from_le_bytes(b[4..12].try_into().unwrap()),
        })
    }

    fn nonce(self) -> GcmNonce {
        let mut n = [0u8; 12];
        n[..8].copy_from_slice(&self.seq.to_le_bytes());
        GcmNonce::from(n)
    }
}

/// An AEAD-sealed guest message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AeadMessage {
    pub header: MessageHeader,
    pub ciphertext: Vec<u8>,
}

impl AeadMessage {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes().to_vec();
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PlatformError> {
        Ok(Self {
            header: MessageHeader::from_bytes(bytes)?,
            ciphertext: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

pub(crate) fn seal(key: &[u8; 32], header: MessageHeader, plaintext: &[u8]) -> AeadMessage {
    let cipher = Aes256Gcm::new_from_slice(key).expect("32-byte key");
    let aad = header.to_bytes();
    let ciphertext = cipher
        .encrypt(
            &header.nonce(),
            Payload {
                msg: plaintext,
                aad: &aad,
            },
        )
        .expect("AES-GCM encryption of bounded input");
    AeadMessage { header, ciphertext }
}

pub(crate) fn open(key: &[u8; 32], msg: &AeadMessage) -> Result<Vec<u8>, PlatformError> {
    let cipher = Aes256Gcm::new_from_slice(key).expect("32-byte key");
    let aad = msg.header.to_bytes();
    cipher
        .decrypt(
            &msg.header.nonce(),
            Payload {
                msg: &msg.ciphertext,
                aad: &aad,
            },
        )
        .map_err(|_| PlatformError::AeadFailure)
}

/// Report request payload: 64 bytes of user data and the VMPL the requester
/// claims. The platform ignores the claim.
pub(crate) fn encode_request(report_data: &[u8; 64], claimed_vmpl: u32) -> [u8; REQUEST_LEN] {
    let mut out = [0u8; REQUEST_LEN];
    out[..64].copy_from_slice(report_data);
    out[64..].copy_from_slice(&claimed_vmpl.to_le_bytes());
    out
}

pub(crate) fn decode_request(bytes: &[u8]) -> Result<[u8; 64], PlatformError> {
    if bytes.len() != REQUEST_LEN {
        return Err(PlatformError::Malformed("report request"));
    }
    Ok(bytes[..64].try_into().unwrap())
}

/// Per-launch communication keys and the sequence numbers accepted so far.
pub(crate) struct VmpckSet {
    keys: [Zeroizing<[u8; 32]>; VMPL_COUNT],
    last_seq: [u64; VMPL_COUNT],
}

impl VmpckSet {
    pub(crate) fn new(keys: [[u8; 32]; VMPL_COUNT]) -> Self {
        Self {
            keys: keys.map(Zeroizing::new),
            last_seq: [0; VMPL_COUNT],
        }
    }

    pub(crate) fn key(&self, vmpl: u32) -> Result<&[u8; 32], PlatformError> {
        self.keys
            .get(vmpl as usize)
            .map(|k| &**k)
            .ok_or(PlatformError::InvalidVmpl(vmpl))
    }

    pub(crate) fn last_seq(&self, vmpl: u32) -> u64 {
        self.last_seq[vmpl as usize]
    }

    pub(crate) fn accept(&mut self, vmpl: u32, seq: u64) -> Result<(), PlatformError> {
        let last = &mut self.last_seq[vmpl as usize];
        if seq <= *last {
            return Err(PlatformError::ReplayedSequence);
        }
        // The response consumes seq + 1.
        *last = seq + 1;
        Ok(())
    }
}

/// Guest-side endpoint holding the VMPCK of one privilege level.
pub struct GuestMessenger {
    vmpl: u32,
    key: Zeroizing<[u8; 32]>,
    next_seq: u64,
}

impl GuestMessenger {
    pub(crate) fn new(vmpl: u32, key: [u8; 32], next_seq: u64) -> Self {
        Self {
            vmpl,
            key: Zeroizing::new(key),
            next_seq,
        }
    }

    pub fn vmpl(&self) -> u32 {
        self.vmpl
    }

    /// Builds a sealed report request. `claimed_vmpl` travels in the payload
    /// and has no effect on the issued report.
    pub fn report_request(&mut self, report_data: &[u8; 64], claimed_vmpl: u32) -> AeadMessage {
        let header = MessageHeader {
            msg_type: MSG_REPORT_REQ,
            vmpck_id: self.vmpl as u8,
            seq: self.next_seq,
        };
        self.next_seq += 2;
        seal(&self.key, header, &encode_request(report_data, claimed_vmpl))
    }

    pub fn open_report(&self, response: &AeadMessage) -> Result<AttestationReport, PlatformError> {
        if response.header.msg_type != MSG_REPORT_RSP {
            return Err(PlatformError::Malformed("response type"));
        }
        let plain = open(&self.key, response)?;
        if plain.len() != 4 + REPORT_LEN || plain[..4] != [0; 4] {
            return Err(PlatformError::Malformed("report response"));
        }
        AttestationReport::from_bytes(&plain[4..])
    }
}

pub(crate) fn encode_response(report: &AttestationReport) -> Vec<u8> {
    let mut out = vec![0u8; 4];
    out.extend_from_slice(&report.to_bytes());
    out
}
