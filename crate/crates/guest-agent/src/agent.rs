// SPDX-License-Identifier: Apache-2.0

use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use attest_wire::{read_message, write_message, EventLog, EventType, HexBytes, Message, Uuid, Verdict};
use hmac::{Hmac, Mac};
use serde::Serialize;
use sha2::Sha256;
use svsm_service::EK_REPORT_NV_INDEX;
use tpm_engine::{Bank, CredentialBlob, Hierarchy, KeyTemplate, PcrSelection, PublicKey};

use crate::client::{TpmClient, TpmTransport};
use crate::error::AgentError;
use crate::measure::{measure_one, MeasuredEvent};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);
const IO_TIMEOUT: Duration = Duration::from_secs(30);

/// `HMAC-SHA256(secret, uuid)`.
pub fn activation_proof(secret: &[u8], uuid: &Uuid) -> Vec<u8> {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(secret).expect("any key length");
    mac.update(uuid);
    mac.finalize().into_bytes().to_vec()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentIdentity {
    pub uuid: Uuid,
    pub ek_pub: PublicKey,
    pub aik_pub: PublicKey,
    /// Bytes stored at the EK certificate index.
    pub att_report: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub peer: &'static str,
    pub direction: Direction,
    pub message: Message,
}

pub type Transcript = Vec<TranscriptEntry>;

struct Conn<'a> {
    stream: TcpStream,
    peer: &'static str,
    transcript: &'a mut Transcript,
}

impl Conn<'_> {
    fn send(&mut self, message: Message) -> Result<(), AgentError> {
        write_message(&mut self.stream, &message)?;
        self.transcript.push(TranscriptEntry {
            peer: self.peer,
            direction: Direction::Sent,
            message,
        });
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, AgentError> {
        let message = read_message(&mut self.stream)?;
        self.transcript.push(TranscriptEntry {
            peer: self.peer,
            direction: Direction::Received,
            message: message.clone(),
        });
        Ok(message)
    }
}

fn connect<'a>(addr: SocketAddr, peer: &'static str, transcript: &'a mut Transcript) -> Result<Conn<'a>, AgentError> {
    let stream = TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    Ok(Conn {
        stream,
        peer,
        transcript,
    })
}

/// The attestation agent running in the guest.
pub struct Agent<T> {
    client: TpmClient<T>,
    identity: AgentIdentity,
    ek_handle: u32,
    aik_handle: u32,
    vcek_chain: Vec<u8>,
    log: EventLog,
    transcript: Transcript,
}

impl<T> std::fmt::Debug for Agent<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("identity", &self.identity)
            .field("log_len", &self.log.len())
            .finish_non_exhaustive()
    }
}

impl<T: TpmTransport> Agent<T> {
    /// Loads the EK, creates an AIK and reads the report stored next to the
    /// EK.
    pub fn enroll(transport: T, uuid: Uuid, vcek_chain: Vec<u8>) -> Result<Self, AgentError> {
        let mut client = TpmClient::new(transport);
        let (ek_handle, ek_pub) = client.create_primary(Hierarchy::Endorsement, KeyTemplate::endorsement())?;
        let (aik_handle, aik_pub) = client.create_primary(Hierarchy::Endorsement, KeyTemplate::attestation())?;
        let att_report = client.nv_read(EK_REPORT_NV_INDEX)?;
        Ok(Self {
            client,
            identity: AgentIdentity {
                uuid,
                ek_pub,
                aik_pub,
                att_report,
            },
            ek_handle,
            aik_handle,
            vcek_chain,
            log: EventLog::new(),
            transcript: Vec::new(),
        })
    }

    pub fn identity(&self) -> &AgentIdentity {
        &self.identity
    }

    pub fn identity_mut(&mut self) -> &mut AgentIdentity {
        &mut self.identity
    }

    pub fn handles(&self) -> (u32, u32) {
        (self.ek_handle, self.aik_handle)
    }

    pub fn set_handles(&mut self, ek: u32, aik: u32) {
        self.ek_handle = ek;
        self.aik_handle = aik;
    }

    pub fn client(&mut self) -> &mut TpmClient<T> {
        &mut self.client
    }

    pub fn into_client(self) -> TpmClient<T> {
        self.client
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut EventLog {
        &mut self.log
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn take_transcript(&mut self) -> Transcript {
        std::mem::take(&mut self.transcript)
    }

    /// Measures boot components into PCRs 0-7, then IMA events into PCR 10.
    pub fn boot_and_measure(&mut self, boot: &[MeasuredEvent], ima: &[MeasuredEvent]) -> Result<(), AgentError> {
        for e in boot {
            measure_one(&mut self.client, &mut self.log, EventType::Boot, e)?;
        }
        for e in ima {
            self.measure_ima(e)?;
        }
        Ok(())
    }

    pub fn measure_ima(&mut self, event: &MeasuredEvent) -> Result<(), AgentError> {
        measure_one(&mut self.client, &mut self.log, EventType::Ima, event)
    }

    /// Registers with the registrar and answers its credential challenge.
    pub fn register(&mut self, registrar: SocketAddr) -> Result<(), AgentError> {
        let uuid = self.identity.uuid;
        let mut conn = connect(registrar, "registrar", &mut self.transcript)?;
        conn.send(Message::Register {
            uuid,
            ek_pub: self.identity.ek_pub.to_bytes().to_vec(),
            aik_pub: self.identity.aik_pub.to_bytes().to_vec(),
            ek_report: self.identity.att_report.clone(),
            vcek_chain: self.vcek_chain.clone(),
        })?;
        let blob = match conn.recv()? {
            Message::Challenge { credential_blob } => credential_blob,
            Message::RegisterResult { failures, .. } => return Err(AgentError::RegistrarRejected(failures)),
            _ => return Err(AgentError::Protocol("expected Challenge")),
        };
        // A failed activation still gets answered so the registrar records
        // the outcome.
        let proof = CredentialBlob::from_bytes(&blob)
            .map_err(AgentError::from)
            .and_then(|b| self.client.activate_credential(self.ek_handle, self.aik_handle, &b))
            .map(|secret| activation_proof(&secret, &uuid))
            .unwrap_or_else(|e| {
                log::warn!("credential activation failed: {e}");
                Vec::new()
            });
        conn.send(Message::ActivateProof { uuid, proof })?;
        match conn.recv()? {
            Message::RegisterResult { accepted: true, .. } => Ok(()),
            Message::RegisterResult { failures, .. } => Err(AgentError::RegistrarRejected(failures)),
            _ => Err(AgentError::Protocol("expected RegisterResult")),
        }
    }

    /// Serves one quote request from the verifier and returns its verdict.
    pub fn attest(&mut self, verifier: SocketAddr) -> Result<Verdict, AgentError> {
        self.attest_with(verifier, |_| {})
    }

    /// Like [`Agent::attest`], with `tamper` applied to the quote response
    /// before it is sent.
    pub fn attest_with(
        &mut self,
        verifier: SocketAddr,
        tamper: impl FnOnce(&mut Message),
    ) -> Result<Verdict, AgentError> {
        let mut transcript = std::mem::take(&mut self.transcript);
        let result = (|| {
            let mut conn = connect(verifier, "verifier", &mut transcript)?;
            let Message::QuoteRequest { nonce, pcr_mask } = conn.recv()? else {
                return Err(AgentError::Protocol("expected QuoteRequest"));
            };
            let mut response = self.quote_response(&nonce, pcr_mask)?;
            tamper(&mut response);
            conn.send(response)?;
            match conn.recv()? {
                Message::AttestationResult { failures, .. } => Ok(Verdict::from_failures(failures)),
                _ => Err(AgentError::Protocol("expected AttestationResult")),
            }
        })();
        self.transcript = transcript;
        result
    }

    /// Quote over the SHA-256 PCRs in `pcr_mask`, the PCR values and the log.
    pub fn quote_response(&mut self, nonce: &[u8], pcr_mask: u32) -> Result<Message, AgentError> {
        let selection = [PcrSelection::from_mask(Bank::Sha256, pcr_mask)?];
        let quote = self.client.quote(self.aik_handle, &selection, nonce)?;
        let values = self.client.pcr_read(&selection)?;
        Ok(Message::QuoteResponse {
            uuid: self.identity.uuid,
            quote: quote.to_bytes(),
            pcr_values: values.into_iter().map(HexBytes).collect(),
            event_log: self.log.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proof_matches_reference_hmac() {
        let secret: Vec<u8> = (0u8..32).collect();
        let proof = activation_proof(&secret, &[7; 16]);
        let expected = "60daa2c701c3cc54358b22ba90e978316e2d86074168b6eb145b7caad1b4b5e3";
        let hex: String = proof.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, expected);
    }
}
