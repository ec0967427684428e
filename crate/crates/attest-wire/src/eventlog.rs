// SPDX-License-Identifier: Apache-2.0

//! Measurement log.
//!
//! Serialized one entry per line as
//! `pcr<TAB>bank<TAB>type<TAB>description<TAB>hex digest`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tpm_engine::{Bank, PCR_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Boot,
    Ima,
}

impl EventType {
    pub fn name(self) -> &'static str {
        match self {
            EventType::Boot => "boot",
            EventType::Ima => "ima",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "boot" => Some(EventType::Boot),
            "ima" => Some(EventType::Ima),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventLogError {
    #[error("line {0}: {1}")]
    Parse(usize, &'static str),
    #[error("PCR index {0} out of range")]
    BadIndex(u32),
    #[error("digest length does not match bank")]
    BadDigest,
    #[error("description contains a tab or newline")]
    BadDescription,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLogEntry {
    pub pcr_index: u32,
    pub bank: Bank,
    pub event_type: EventType,
    pub description: String,
    pub digest: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    entries: Vec<EventLogEntry>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: EventLogEntry) -> Result<(), EventLogError> {
        if entry.pcr_index as usize >= PCR_COUNT {
            return Err(EventLogError::BadIndex(entry.pcr_index));
        }
        if entry.digest.len() != entry.bank.digest_size() {
            return Err(EventLogError::BadDigest);
        }
        if entry.description.contains(['\t', '\n', '\r']) {
            return Err(EventLogError::BadDescription);
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[EventLogEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Vec<EventLogEntry> {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Folds every entry, in order, over zeroed PCRs. Only touched PCRs
    /// appear in the result.
    pub fn replay(&self) -> BTreeMap<(Bank, u32), Vec<u8>> {
        let mut pcrs: BTreeMap<(Bank, u32), Vec<u8>> = BTreeMap::new();
        for e in &self.entries {
            let v = pcrs
                .entry((e.bank, e.pcr_index))
                .or_insert_with(|| e.bank.zero_digest());
            *v = e.bank.extend(v, &e.digest);
        }
        pcrs
    }

    pub fn parse(text: &str) -> Result<Self, EventLogError> {
        let mut log = EventLog::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let line_no = n + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [pcr, bank, ty, description, digest] = fields[..] else {
                return Err(EventLogError::Parse(line_no, "expected five fields"));
            };
            let entry = EventLogEntry {
                pcr_index: pcr.parse().map_err(|_| EventLogError::Parse(line_no, "pcr index"))?,
                bank: Bank::from_name(bank).ok_or(EventLogError::Parse(line_no, "bank"))?,
                event_type: EventType::from_name(ty).ok_or(EventLogError::Parse(line_no, "event type"))?,
                description: description.to_string(),
                digest: hex::decode(digest).map_err(|_| EventLogError::Parse(line_no, "digest"))?,
            };
            log.push(entry)?;
        }
        Ok(log)
    }
}

impl fmt::Display for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}",
                e.pcr_index,
                e.bank.name(),
                e.event_type.name(),
                e.description,
                hex::encode(&e.digest)
            )?;
        }
        Ok(())
    }
}
