// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration.
//!
//! ```json
//! {
//!   "images": [{ "label": "svsm", "path": "images/svsm.bin" }],
//!   "events": "events.json",
//!   "policy": "policy.json",
//!   "registrar_port": 0,
//!   "verifier_port": 0,
//!   "seed": 1
//! }
//! ```
//!
//! Paths are relative to the config file. Port 0 picks a free port.

use std::collections::BTreeSet;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use attest_wire::EventType;
use attestation_service::AttestationPolicy;
use guest_agent::{EventManifest, IMA_PCR};
use serde::Deserialize;
use snp_platform::{LaunchImage, SimulatedRoot};
use thiserror::Error;

/// Label of the image part holding the SVSM firmware.
pub const SVSM_PART: &str = "svsm";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Json(PathBuf, serde_json::Error),
    #[error("policy: {0}")]
    Policy(#[from] attestation_service::PolicyError),
    #[error("bad service address {0}")]
    Address(String),
}

#[derive(Deserialize)]
struct ImageRef {
    label: String,
    path: PathBuf,
}

#[derive(Deserialize)]
struct ConfigFile {
    images: Vec<ImageRef>,
    events: PathBuf,
    policy: PathBuf,
    #[serde(default)]
    registrar_port: u16,
    #[serde(default)]
    verifier_port: u16,
    seed: Option<u64>,
}

/// Where the registrar and verifier live when not run in-process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExternalService {
    pub registrar: SocketAddr,
    pub verifier: SocketAddr,
}

impl ExternalService {
    /// `host:port` names the registrar; the verifier listens on the next
    /// port.
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let registrar = s
            .to_socket_addrs()
            .ok()
            .and_then(|mut a| a.next())
            .ok_or_else(|| ConfigError::Address(s.to_string()))?;
        let port = registrar
            .port()
            .checked_add(1)
            .ok_or_else(|| ConfigError::Address(s.to_string()))?;
        let mut verifier = registrar;
        verifier.set_port(port);
        Ok(Self { registrar, verifier })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub image: LaunchImage,
    pub events: EventManifest,
    pub policy: AttestationPolicy,
    pub seed: Option<u64>,
    pub registrar_port: u16,
    pub verifier_port: u16,
    pub external: Option<ExternalService>,
}

fn read(path: &Path) -> Result<Vec<u8>, ConfigError> {
    std::fs::read(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let file: ConfigFile =
            serde_json::from_slice(&read(path)?).map_err(|e| ConfigError::Json(path.to_path_buf(), e))?;
        let mut image = LaunchImage::new();
        for part in file.images {
            image.push(part.label, read(&base.join(&part.path))?);
        }
        let events_path = base.join(&file.events);
        let events = serde_json::from_slice(&read(&events_path)?).map_err(|e| ConfigError::Json(events_path, e))?;
        let policy = AttestationPolicy::load(base.join(&file.policy))?;
        Ok(Self {
            image,
            events,
            policy,
            seed: file.seed,
            registrar_port: file.registrar_port,
            verifier_port: file.verifier_port,
            external: None,
        })
    }

    /// The fixtures shipped with this crate.
    pub fn builtin() -> Self {
        let image = LaunchImage::new()
            .with_part(SVSM_PART, include_bytes!("../fixtures/images/svsm.bin").to_vec())
            .with_part("ovmf", include_bytes!("../fixtures/images/ovmf.bin").to_vec())
            .with_part("kernel", include_bytes!("../fixtures/images/kernel.bin").to_vec());
        let events = serde_json::from_str(include_str!("../fixtures/events.json")).expect("fixture events parse");
        let policy =
            AttestationPolicy::from_json(include_str!("../fixtures/policy.json")).expect("fixture policy parses");
        Self {
            image,
            events,
            policy,
            seed: Some(1),
            registrar_port: 0,
            verifier_port: 0,
            external: None,
        }
    }

    /// The launch image without its SVSM part.
    pub fn image_without_svsm(&self) -> LaunchImage {
        let mut image = LaunchImage::new();
        for (label, bytes) in self.image.parts().iter().filter(|(l, _)| l != SVSM_PART) {
            image.push(label.clone(), bytes.clone());
        }
        image
    }
}

/// The policy that admits exactly `image` and `events`.
pub fn derive_policy(image: &LaunchImage, events: &EventManifest) -> AttestationPolicy {
    let pcrs: BTreeSet<u32> = events.boot.iter().map(|e| e.pcr).chain([IMA_PCR]).collect();
    let mask = pcrs.iter().fold(0u32, |m, &p| m | (1 << p));
    let mut policy = AttestationPolicy::new(image.measure(), SimulatedRoot::get().public_key_bytes(), mask);
    for e in &events.boot {
        policy.allow(e.pcr, EventType::Boot, e.digest().to_vec());
    }
    for e in &events.ima {
        policy.allow(IMA_PCR, EventType::Ima, e.digest().to_vec());
    }
    policy
}
