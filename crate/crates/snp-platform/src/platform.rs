// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use hmac::{Hmac, Mac};
use p384::ecdsa::SigningKey;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use zeroize::Zeroizing;

use crate::cert::{encode_chain, Certificate, SimulatedRoot, ROOT_SUBJECT, VCEK_SUBJECT};
use crate::entropy::{CpuEntropy, EntropyMode};
use crate::error::PlatformError;
use crate::image::LaunchImage;
use crate::message::{
    self, AeadMessage, GuestMessenger, MessageHeader, VmpckSet, MSG_REPORT_REQ, MSG_REPORT_RSP, VMPL_COUNT,
};
use crate::report::{AttestationReport, REPORT_VERSION};

/// Which software an execution context belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextRole {
    /// The secure VM service module. Exists only when launched with one.
    Svsm,
    /// The guest operating system.
    Guest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchConfig {
    pub with_svsm: bool,
    pub entropy: EntropyMode,
}

struct Chip {
    vcek: SigningKey,
    chain: Vec<u8>,
    chip_secret: Zeroizing<[u8; 32]>,
}

/// One simulated AMD secure processor: a chip with its own VCEK.
pub struct SecureProcessor {
    chip: Arc<Chip>,
    rng: ChaCha20Rng,
}

impl SecureProcessor {
    pub fn new() -> Self {
        Self::with_rng(ChaCha20Rng::from_entropy())
    }

    /// Reproducible chip: same seed, same VCEK, same launch keys.
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self::with_rng(ChaCha20Rng::from_seed(seed))
    }

    fn with_rng(mut rng: ChaCha20Rng) -> Self {
        let vcek = SigningKey::random(&mut rng);
        let root = SimulatedRoot::get();
        let vcek_cert = Certificate::issue(VCEK_SUBJECT, vcek.verifying_key(), ROOT_SUBJECT, root.signing_key());
        let chain = encode_chain(&[root.certificate().clone(), vcek_cert]);
        let mut chip_secret = Zeroizing::new([0u8; 32]);
        rng.fill_bytes(chip_secret.as_mut());
        Self {
            chip: Arc::new(Chip {
                vcek,
                chain,
                chip_secret,
            }),
            rng,
        }
    }

    /// Measures `image`, generates fresh communication keys and registers the
    /// execution contexts.
    pub fn launch(&mut self, image: &LaunchImage, config: LaunchConfig) -> Result<PlatformHandle, PlatformError> {
        if image.is_empty() {
            return Err(PlatformError::EmptyImage);
        }
        let mut keys = [[0u8; 32]; VMPL_COUNT];
        for k in &mut keys {
            self.rng.fill_bytes(k);
        }
        let mut boot_nonce = [0u8; 16];
        self.rng.fill_bytes(&mut boot_nonce);
        Ok(PlatformHandle {
            chip: Arc::clone(&self.chip),
            measurement: image.measure(),
            with_svsm: config.with_svsm,
            vmpcks: VmpckSet::new(keys),
            boot_nonce,
            entropy: CpuEntropy::new(config.entropy),
        })
    }

    pub fn vcek_chain(&self) -> Vec<u8> {
        self.chip.chain.clone()
    }
}

impl Default for SecureProcessor {
    fn default() -> Self {
        Self::new()
    }
}

/// A launched confidential VM as seen by the secure processor.
pub struct PlatformHandle {
    chip: Arc<Chip>,
    measurement: [u8; 48],
    with_svsm: bool,
    vmpcks: VmpckSet,
    boot_nonce: [u8; 16],
    entropy: CpuEntropy,
}

impl std::fmt::Debug for PlatformHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlatformHandle")
            .field("measurement", &self.measurement)
            .field("with_svsm", &self.with_svsm)
            .field("entropy", &self.entropy)
            .finish_non_exhaustive()
    }
}

impl PlatformHandle {
    pub fn measurement(&self) -> [u8; 48] {
        self.measurement
    }

    pub fn with_svsm(&self) -> bool {
        self.with_svsm
    }

    /// Privilege level the platform registered for `role`.
    pub fn vmpl_of(&self, role: ContextRole) -> Result<u32, PlatformError> {
        match (role, self.with_svsm) {
            (ContextRole::Svsm, true) => Ok(0),
            (ContextRole::Svsm, false) => Err(PlatformError::NoSuchContext),
            (ContextRole::Guest, true) => Ok(1),
            (ContextRole::Guest, false) => Ok(0),
        }
    }

    /// Releases the VMPCK of `role`'s privilege level to that context.
    pub fn messenger(&self, role: ContextRole) -> Result<GuestMessenger, PlatformError> {
        let vmpl = self.vmpl_of(role)?;
        let key = *self.vmpcks.key(vmpl)?;
        Ok(GuestMessenger::new(vmpl, key, self.vmpcks.last_seq(vmpl) + 1))
    }

    /// Handles an SNP_REPORT_REQ arriving on the channel of `requester_vmpl`.
    /// The report's VMPL is taken from the channel, never from the payload.
    pub fn report_request(
        &mut self,
        requester_vmpl: u32,
        sealed_request: &AeadMessage,
    ) -> Result<(AeadMessage, AttestationReport), PlatformError> {
        let key = *self.vmpcks.key(requester_vmpl)?;
        if sealed_request.header.msg_type != MSG_REPORT_REQ {
            return Err(PlatformError::Malformed("request type"));
        }
        let plain = message::open(&key, sealed_request)?;
        self.vmpcks.accept(requester_vmpl, sealed_request.header.seq)?;
        let report_data = message::decode_request(&plain)?;

        let mut report = AttestationReport {
            version: REPORT_VERSION,
            vmpl: requester_vmpl,
            measurement: self.measurement,
            report_data,
            boot_nonce: self.boot_nonce,
            signature: [0; 96],
        };
        report.sign(&self.chip.vcek);

        let header = MessageHeader {
            msg_type: MSG_REPORT_RSP,
            vmpck_id: requester_vmpl as u8,
            seq: sealed_request.header.seq + 1,
        };
        let response = message::seal(&key, header, &message::encode_response(&report));
        Ok((response, report))
    }

    /// AMD-root-sim certificate followed by this chip's VCEK certificate.
    pub fn vcek_chain(&self) -> Vec<u8> {
        self.chip.chain.clone()
    }

    pub fn draw_entropy(&mut self, n: usize) -> Result<Vec<u8>, PlatformError> {
        self.entropy.draw(n)
    }

    pub fn cpu_entropy(&mut self) -> &mut CpuEntropy {
        &mut self.entropy
    }

    /// Key derived by the secure processor for `role`, bound to the chip
    /// secret, the launch measurement and the requester's VMPL.
    pub fn derive_key(&self, role: ContextRole, label: &[u8]) -> Result<[u8; 32], PlatformError> {
        let vmpl = self.vmpl_of(role)?;
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(self.chip.chip_secret.as_ref()).expect("any key length");
        mac.update(&self.measurement);
        mac.update(&vmpl.to_le_bytes());
        mac.update(label);
        Ok(mac.finalize().into_bytes().into())
    }
}
