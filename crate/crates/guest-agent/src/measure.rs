// SPDX-License-Identifier: Apache-2.0

use std::ops::RangeInclusive;

use attest_wire::{EventLog, EventLogEntry, EventType};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tpm_engine::Bank;

use crate::client::{TpmClient, TpmTransport};
use crate::error::AgentError;

/// PCRs that take firmware and boot loader measurements.
pub const BOOT_PCRS: RangeInclusive<u32> = 0..=7;
/// The PCR IMA extends.
pub const IMA_PCR: u32 = 10;

/// One measured component. Its digest is `SHA-256(data)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasuredEvent {
    /// Target PCR for boot events; IMA events always use PCR 10.
    #[serde(default)]
    pub pcr: u32,
    pub description: String,
    pub data: String,
}

impl MeasuredEvent {
    pub fn boot(pcr: u32, description: impl Into<String>, data: impl Into<String>) -> Self {
        Self {
            pcr,
            description: description.into(),
            data: data.into(),
        }
    }

    pub fn ima(description: impl Into<String>, data: impl Into<String>) -> Self {
        Self::boot(IMA_PCR, description, data)
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.data.as_bytes()).into()
    }
}

/// Boot and IMA events of one machine, as kept in `events.json`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventManifest {
    pub boot: Vec<MeasuredEvent>,
    pub ima: Vec<MeasuredEvent>,
}

pub(crate) fn measure_one<T: TpmTransport>(
    client: &mut TpmClient<T>,
    log: &mut EventLog,
    event_type: EventType,
    event: &MeasuredEvent,
) -> Result<(), AgentError> {
    let pcr = match event_type {
        EventType::Boot if BOOT_PCRS.contains(&event.pcr) => event.pcr,
        EventType::Boot => return Err(AgentError::InvalidEvent(format!("boot event on PCR {}", event.pcr))),
        EventType::Ima => IMA_PCR,
    };
    let entry = EventLogEntry {
        pcr_index: pcr,
        bank: Bank::Sha256,
        event_type,
        description: event.description.clone(),
        digest: event.digest().to_vec(),
    };
    // Validate before touching the PCR so the log never lags.
    let mut scratch = EventLog::new();
    scratch
        .push(entry.clone())
        .map_err(|e| AgentError::InvalidEvent(e.to_string()))?;
    client.pcr_extend(Bank::Sha256, pcr, &entry.digest)?;
    log.entries_mut().push(entry);
    Ok(())
}

/// Extends every event into its PCR, boot events first, and returns the log.
pub fn boot_and_measure<T: TpmTransport>(
    client: &mut TpmClient<T>,
    boot: &[MeasuredEvent],
    ima: &[MeasuredEvent],
) -> Result<EventLog, AgentError> {
    let mut log = EventLog::new();
    for e in boot {
        measure_one(client, &mut log, EventType::Boot, e)?;
    }
    for e in ima {
        measure_one(client, &mut log, EventType::Ima, e)?;
    }
    Ok(log)
}
