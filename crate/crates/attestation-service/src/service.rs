// SPDX-License-Identifier: Apache-2.0

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use attest_wire::{read_message, write_message, Failure, FailureCode, FrameError, Message, Uuid, Verdict};
use hmac::{Hmac, Mac};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use snp_platform::AttestationReport;
use tpm_engine::{make_credential, KeyAlgorithm};

use crate::check::{check_ek_report, evaluate_quote, parse_key};
use crate::policy::AttestationPolicy;
use crate::store::{RegistrationRecord, RegistrationStatus, RegistrationStore};

pub const DEFAULT_REGISTRAR_PORT: u16 = 8890;
pub const DEFAULT_VERIFIER_PORT: u16 = 8891;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub registrar_addr: SocketAddr,
    pub verifier_addr: SocketAddr,
    pub policy: AttestationPolicy,
    /// Seeds challenge secrets and nonces; OS randomness when absent.
    pub seed: Option<u64>,
    pub io_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(policy: AttestationPolicy) -> Self {
        Self {
            registrar_addr: SocketAddr::from(([127, 0, 0, 1], DEFAULT_REGISTRAR_PORT)),
            verifier_addr: SocketAddr::from(([127, 0, 0, 1], DEFAULT_VERIFIER_PORT)),
            policy,
            seed: None,
            io_timeout: Duration::from_secs(10),
        }
    }

    /// Loopback on OS-assigned ports.
    pub fn ephemeral(policy: AttestationPolicy) -> Self {
        let mut c = Self::new(policy);
        c.registrar_addr.set_port(0);
        c.verifier_addr.set_port(0);
        c
    }
}

struct Shared {
    policy: AttestationPolicy,
    store: RegistrationStore,
    rng: Mutex<ChaCha20Rng>,
    verdicts: Mutex<Vec<(Uuid, Verdict)>>,
    shutdown: AtomicBool,
    io_timeout: Duration,
}

impl Shared {
    fn random(&self, n: usize) -> Vec<u8> {
        let mut v = vec![0u8; n];
        self.rng.lock().unwrap_or_else(|e| e.into_inner()).fill_bytes(&mut v);
        v
    }
}

/// A running registrar and verifier pair.
pub struct AttestationService {
    registrar_addr: SocketAddr,
    verifier_addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl std::fmt::Debug for AttestationService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AttestationService")
            .field("registrar_addr", &self.registrar_addr)
            .field("verifier_addr", &self.verifier_addr)
            .finish_non_exhaustive()
    }
}

type Session = fn(&Shared, &mut TcpStream) -> Result<(), FrameError>;

impl AttestationService {
    pub fn start(config: ServiceConfig) -> io::Result<Self> {
        let registrar = TcpListener::bind(config.registrar_addr)?;
        let verifier = TcpListener::bind(config.verifier_addr)?;
        let rng = match config.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        let shared = Arc::new(Shared {
            policy: config.policy,
            store: RegistrationStore::new(),
            rng: Mutex::new(rng),
            verdicts: Mutex::new(Vec::new()),
            shutdown: AtomicBool::new(false),
            io_timeout: config.io_timeout,
        });
        let registrar_addr = registrar.local_addr()?;
        let verifier_addr = verifier.local_addr()?;
        let threads = vec![
            spawn_acceptor(registrar, Arc::clone(&shared), registrar_session),
            spawn_acceptor(verifier, Arc::clone(&shared), verifier_session),
        ];
        log::info!("registrar on {registrar_addr}, verifier on {verifier_addr}");
        Ok(Self {
            registrar_addr,
            verifier_addr,
            shared,
            threads,
        })
    }

    pub fn registrar_addr(&self) -> SocketAddr {
        self.registrar_addr
    }

    pub fn verifier_addr(&self) -> SocketAddr {
        self.verifier_addr
    }

    pub fn store(&self) -> &RegistrationStore {
        &self.shared.store
    }

    pub fn policy(&self) -> &AttestationPolicy {
        &self.shared.policy
    }

    /// Verdicts in the order the verifier issued them.
    pub fn verdicts(&self) -> Vec<(Uuid, Verdict)> {
        self.shared.verdicts.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Blocks until both listeners stop.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for addr in [self.registrar_addr, self.verifier_addr] {
            let _ = TcpStream::connect_timeout(&addr, Duration::from_secs(1));
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for AttestationService {
    fn drop(&mut self) {
        if !self.threads.is_empty() {
            self.stop();
        }
    }
}

fn spawn_acceptor(listener: TcpListener, shared: Arc<Shared>, session: Session) -> JoinHandle<()> {
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            if shared.shutdown.load(Ordering::SeqCst) {
                break;
            }
            let Ok(mut stream) = stream else { continue };
            let shared = Arc::clone(&shared);
            std::thread::spawn(move || {
                let _ = stream.set_read_timeout(Some(shared.io_timeout));
                let _ = stream.set_write_timeout(Some(shared.io_timeout));
                if let Err(e) = session(&shared, &mut stream) {
                    log::warn!("session ended: {e}");
                }
            });
        }
    })
}

fn reject(stream: &mut TcpStream, failures: Vec<Failure>) -> Result<(), FrameError> {
    write_message(
        stream,
        &Message::RegisterResult {
            accepted: false,
            failures,
        },
    )
}

fn registrar_session(shared: &Shared, stream: &mut TcpStream) -> Result<(), FrameError> {
    let Message::Register {
        uuid,
        ek_pub,
        aik_pub,
        ek_report,
        vcek_chain,
    } = read_message(stream)?
    else {
        return reject(
            stream,
            vec![Failure::new(FailureCode::CredentialFailure, "expected Register")],
        );
    };

    let mut failures = check_ek_report(&ek_pub, &ek_report, &vcek_chain, &shared.policy);
    let ek = parse_key(&ek_pub, KeyAlgorithm::EccP256Decrypt);
    let aik = parse_key(&aik_pub, KeyAlgorithm::EccP256Sign);
    if ek.is_none() || aik.is_none() {
        failures.push(Failure::new(
            FailureCode::CredentialFailure,
            "EK or AIK public key unusable",
        ));
    }
    let report = AttestationReport::from_bytes(&ek_report);
    let (Some(ek), Some(aik), Ok(report), true) = (ek, aik, report, failures.is_empty()) else {
        log::info!("registration of {} rejected", hex::encode(uuid));
        return reject(stream, failures);
    };

    let secret = shared.random(32);
    let blob = {
        let mut rng = shared.rng.lock().unwrap_or_else(|e| e.into_inner());
        make_credential(&ek, &aik.name(), &secret, &mut *rng).expect("EK checked as a decrypt key")
    };
    write_message(
        stream,
        &Message::Challenge {
            credential_blob: blob.to_bytes(),
        },
    )?;

    let proof_ok = match read_message(stream)? {
        Message::ActivateProof { uuid: u, proof } if u == uuid => {
            let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&secret).expect("any key length");
            mac.update(&uuid);
            mac.verify_slice(&proof).is_ok()
        }
        _ => false,
    };
    if !proof_ok {
        return reject(
            stream,
            vec![Failure::new(
                FailureCode::CredentialFailure,
                "activation proof rejected",
            )],
        );
    }
    shared.store.activate(RegistrationRecord {
        uuid,
        ek_pub: ek,
        aik_pub: aik,
        report,
        status: RegistrationStatus::Pending,
    });
    log::info!("registered {}", hex::encode(uuid));
    write_message(
        stream,
        &Message::RegisterResult {
            accepted: true,
            failures: Vec::new(),
        },
    )
}

fn verifier_session(shared: &Shared, stream: &mut TcpStream) -> Result<(), FrameError> {
    let nonce = shared.random(32);
    write_message(
        stream,
        &Message::QuoteRequest {
            nonce: nonce.clone(),
            pcr_mask: shared.policy.required_pcr_mask,
        },
    )?;
    let (uuid, verdict) = match read_message(stream)? {
        Message::QuoteResponse {
            uuid,
            quote,
            pcr_values,
            event_log,
        } => {
            let verdict = match shared.store.get(&uuid) {
                Some(record) if record.status == RegistrationStatus::Active => {
                    let values: Vec<Vec<u8>> = pcr_values.into_iter().map(|v| v.0).collect();
                    evaluate_quote(&shared.policy, &record, &nonce, &quote, &values, &event_log)
                }
                _ => Verdict::from_failures(vec![Failure::new(
                    FailureCode::CredentialFailure,
                    "agent not registered",
                )]),
            };
            (uuid, verdict)
        }
        _ => (
            [0; 16],
            Verdict::from_failures(vec![Failure::new(
                FailureCode::CredentialFailure,
                "expected QuoteResponse",
            )]),
        ),
    };
    log::info!("verdict for {}: trusted={}", hex::encode(uuid), verdict.trusted);
    shared
        .verdicts
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .push((uuid, verdict.clone()));
    write_message(
        stream,
        &Message::AttestationResult {
            trusted: verdict.trusted,
            failures: verdict.failures,
        },
    )
}
