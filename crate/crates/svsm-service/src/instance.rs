// SPDX-License-Identifier: Apache-2.0

use std::sync::{Arc, Mutex, MutexGuard};

use sha2::{Digest, Sha512};
use snp_platform::{AttestationReport, ContextRole, GuestMessenger, PlatformError, PlatformHandle};
use thiserror::Error;
use tpm_engine::command::execute;
use tpm_engine::{Hierarchy, KeyTemplate, PublicKey, TpmError, TpmState};
use vmpl_channel::{Vmpl0Handler, Vmpl0Port, PAYLOAD_LEN};

/// The conventional ECC EK certificate index.
pub const EK_REPORT_NV_INDEX: u32 = 0x01C0_000A;

/// Label under which the platform-derived seed mixing key is requested.
pub const SEED_MIX_LABEL: &[u8] = b"svtpm seed mix";

#[derive(Debug, Error)]
pub enum SvsmError {
    #[error("platform was launched without an SVSM")]
    NoSvsmContext,
    #[error("report request failed: {0}")]
    ReportRequestFailed(#[from] PlatformError),
    #[error("entropy source unavailable")]
    EntropyUnavailable,
    #[error("engine error: {0}")]
    Tpm(TpmError),
}

impl From<TpmError> for SvsmError {
    fn from(e: TpmError) -> Self {
        match e {
            TpmError::EntropyUnavailable => SvsmError::EntropyUnavailable,
            e => SvsmError::Tpm(e),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProvisionOptions {
    /// Mix a key derived by the secure processor into every entropy draw.
    pub mix_derived_key: bool,
}

/// `SHA-512` of the canonical EK public serialization.
pub fn ek_report_data(ek: &PublicKey) -> [u8; 64] {
    Sha512::digest(ek.to_bytes()).into()
}

pub struct SvsmInstance {
    tpm: TpmState,
    platform: Arc<Mutex<PlatformHandle>>,
    messenger: GuestMessenger,
    ek_handle: u32,
    ek_public: PublicKey,
    report: AttestationReport,
}

impl std::fmt::Debug for SvsmInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SvsmInstance")
            .field("tpm", &self.tpm)
            .field("ek_handle", &self.ek_handle)
            .field("report", &self.report)
            .finish_non_exhaustive()
    }
}

fn lock(p: &Mutex<PlatformHandle>) -> MutexGuard<'_, PlatformHandle> {
    p.lock().unwrap_or_else(|e| e.into_inner())
}

impl SvsmInstance {
    pub fn provision(platform: Arc<Mutex<PlatformHandle>>, options: ProvisionOptions) -> Result<Self, SvsmError> {
        let (tpm, messenger) = {
            let mut p = lock(&platform);
            if !p.with_svsm() {
                return Err(SvsmError::NoSvsmContext);
            }
            if options.mix_derived_key {
                let key = p.derive_key(ContextRole::Svsm, SEED_MIX_LABEL)?;
                p.cpu_entropy().mix_with(key);
            }
            let tpm = TpmState::manufacture(p.cpu_entropy())?;
            (tpm, p.messenger(ContextRole::Svsm)?)
        };
        Self::bind_identity(tpm, platform, messenger)
    }

    fn bind_identity(
        mut tpm: TpmState,
        platform: Arc<Mutex<PlatformHandle>>,
        mut messenger: GuestMessenger,
    ) -> Result<Self, SvsmError> {
        let (ek_handle, ek_public) = tpm.create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())?;
        let request = messenger.report_request(&ek_report_data(&ek_public), messenger.vmpl());
        let (response, _) = lock(&platform).report_request(messenger.vmpl(), &request)?;
        let report = messenger.open_report(&response)?;
        tpm.nv_define_write(EK_REPORT_NV_INDEX, &report.to_bytes())?;
        log::debug!("provisioned vTPM, boot {}", tpm.boot_counter());
        Ok(Self {
            tpm,
            platform,
            messenger,
            ek_handle,
            ek_public,
            report,
        })
    }

    /// Discards all vTPM state and provisions a new identity on the same
    /// platform.
    pub fn reboot(self) -> Result<Self, SvsmError> {
        let tpm = {
            let mut p = lock(&self.platform);
            self.tpm.reboot(p.cpu_entropy())?
        };
        Self::bind_identity(tpm, self.platform, self.messenger)
    }

    /// Runs one encoded command against the engine, bypassing the channel.
    pub fn execute_direct(&mut self, command: &[u8]) -> Result<Vec<u8>, TpmError> {
        let resp = execute(&mut self.tpm, command)?;
        if resp.len() > PAYLOAD_LEN {
            return Err(TpmError::ResponseTooLarge);
        }
        Ok(resp)
    }

    pub fn report(&self) -> &AttestationReport {
        &self.report
    }

    pub fn ek_handle(&self) -> u32 {
        self.ek_handle
    }

    pub fn ek_public(&self) -> &PublicKey {
        &self.ek_public
    }

    pub fn vmpl(&self) -> u32 {
        self.messenger.vmpl()
    }

    pub fn tpm(&self) -> &TpmState {
        &self.tpm
    }

    pub fn platform(&self) -> &Arc<Mutex<PlatformHandle>> {
        &self.platform
    }
}

impl Vmpl0Handler for SvsmInstance {
    fn on_entry(&mut self, port: &mut Vmpl0Port<'_>) {
        while let Ok(command) = port.poll() {
            let sent = match self.execute_direct(&command) {
                Ok(resp) => port.respond(&resp),
                Err(e) => {
                    log::debug!("command failed: {e}");
                    port.respond_error(e.code())
                }
            };
            if let Err(e) = sent {
                log::warn!("channel: {e}");
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_failure_maps_to_its_own_variant() {
        assert!(matches!(
            SvsmError::from(TpmError::EntropyUnavailable),
            SvsmError::EntropyUnavailable
        ));
        assert!(matches!(
            SvsmError::from(TpmError::BadHandle),
            SvsmError::Tpm(TpmError::BadHandle)
        ));
    }
}
