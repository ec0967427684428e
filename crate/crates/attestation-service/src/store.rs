// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::Mutex;

use attest_wire::Uuid;
use snp_platform::AttestationReport;
use tpm_engine::PublicKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegistrationStatus {
    Pending,
    Active,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationRecord {
    pub uuid: Uuid,
    pub ek_pub: PublicKey,
    pub aik_pub: PublicKey,
    pub report: AttestationReport,
    pub status: RegistrationStatus,
}

/// Active registrations, last writer wins per uuid.
#[derive(Debug, Default)]
pub struct RegistrationStore {
    records: Mutex<HashMap<Uuid, RegistrationRecord>>,
}

impl RegistrationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn activate(&self, mut record: RegistrationRecord) {
        record.status = RegistrationStatus::Active;
        self.lock().insert(record.uuid, record);
    }

    pub fn get(&self, uuid: &Uuid) -> Option<RegistrationRecord> {
        self.lock().get(uuid).cloned()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<Uuid, RegistrationRecord>> {
        self.records.lock().unwrap_or_else(|e| e.into_inner())
    }
}
