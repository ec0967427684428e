// SPDX-License-Identifier: Apache-2.0

use std::net::SocketAddr;

use attestation_service::{AttestationService, ServiceConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use snp_platform::{EntropyMode, LaunchConfig, LaunchImage, SecureProcessor};
use svsm_service::{GuestVm, ProvisionOptions, SvsmError};

use crate::config::ScenarioConfig;

/// Derives every random choice of a run from one optional seed.
#[derive(Debug, Clone, Copy)]
pub struct Seeds(Option<u64>);

impl Seeds {
    pub fn new(seed: Option<u64>) -> Self {
        Self(seed)
    }

    pub fn seed(&self) -> Option<u64> {
        self.0
    }

    /// `SHA-256(seed || label)`, or fresh OS randomness when unseeded.
    pub fn bytes(&self, label: &str) -> [u8; 32] {
        match self.0 {
            Some(s) => {
                let mut h = Sha256::new();
                h.update(s.to_be_bytes());
                h.update(label.as_bytes());
                h.finalize().into()
            }
            None => {
                let mut b = [0u8; 32];
                rand::RngCore::fill_bytes(&mut rand::rngs::OsRng, &mut b);
                b
            }
        }
    }

    pub fn processor(&self, label: &str) -> SecureProcessor {
        match self.0 {
            Some(_) => SecureProcessor::from_seed(self.bytes(label)),
            None => SecureProcessor::new(),
        }
    }

    pub fn entropy(&self, label: &str) -> EntropyMode {
        match self.0 {
            Some(_) => EntropyMode::Deterministic(self.bytes(label)),
            None => EntropyMode::Os,
        }
    }

    pub fn rng(&self, label: &str) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.bytes(label))
    }

    pub fn uuid(&self, label: &str) -> [u8; 16] {
        self.bytes(label)[..16].try_into().unwrap()
    }

    pub fn service_seed(&self) -> Option<u64> {
        self.0
            .map(|_| u64::from_be_bytes(self.bytes("service")[..8].try_into().unwrap()))
    }
}

/// Launches a VM with an SVSM.
pub fn launch_vm(
    processor: &mut SecureProcessor,
    image: &LaunchImage,
    entropy: EntropyMode,
    options: ProvisionOptions,
) -> Result<GuestVm, SvsmError> {
    let config = LaunchConfig {
        with_svsm: true,
        entropy,
    };
    GuestVm::launch(processor, image, config, options)
}

/// Registrar and verifier addresses, with the in-process service kept alive.
#[derive(Debug)]
pub struct Endpoints {
    pub registrar: SocketAddr,
    pub verifier: SocketAddr,
    service: Option<AttestationService>,
}

impl Endpoints {
    pub fn start(config: &ScenarioConfig, seeds: &Seeds) -> std::io::Result<Self> {
        if let Some(ext) = config.external {
            return Ok(Self {
                registrar: ext.registrar,
                verifier: ext.verifier,
                service: None,
            });
        }
        let mut sc = ServiceConfig::ephemeral(config.policy.clone());
        sc.registrar_addr.set_port(config.registrar_port);
        sc.verifier_addr.set_port(config.verifier_port);
        sc.seed = seeds.service_seed();
        let service = AttestationService::start(sc)?;
        Ok(Self {
            registrar: service.registrar_addr(),
            verifier: service.verifier_addr(),
            service: Some(service),
        })
    }

    pub fn service(&self) -> Option<&AttestationService> {
        self.service.as_ref()
    }
}
