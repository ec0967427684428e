// SPDX-License-Identifier: Apache-2.0

use attest_wire::{EventType, FailureCode, Message, Verdict};
use attestation_service::{AttestationPolicy, AttestationService, ServiceConfig};
use guest_agent::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use snp_platform::{EntropyMode, LaunchConfig, LaunchImage, SecureProcessor, SimulatedRoot};
use svsm_service::{GuestVm, ProvisionOptions, EK_REPORT_NV_INDEX};
use tpm_engine::{Bank, PcrSelection, TpmError};

const MASK: u32 = 0x4FF;

fn image() -> LaunchImage {
    LaunchImage::new()
        .with_part("svsm", b"SVSM-BLOB-v1".to_vec())
        .with_part("ovmf", b"OVMF-FIRMWARE".to_vec())
        .with_part("kernel", b"vmlinuz-6.1".to_vec())
}

fn boot_events() -> Vec<MeasuredEvent> {
    vec![
        MeasuredEvent::boot(0, "firmware", "OVMF-FIRMWARE"),
        MeasuredEvent::boot(4, "bootloader", "grub-2.06"),
        MeasuredEvent::boot(5, "kernel", "vmlinuz-6.1"),
    ]
}

fn ima_events() -> Vec<MeasuredEvent> {
    vec![
        MeasuredEvent::ima("/usr/bin/sshd", "sshd-binary"),
        MeasuredEvent::ima("/usr/lib/libc.so.6", "libc-binary"),
    ]
}

fn policy() -> AttestationPolicy {
    let mut p = AttestationPolicy::new(image().measure(), SimulatedRoot::get().public_key_bytes(), MASK);
    for e in boot_events() {
        p.allow(e.pcr, EventType::Boot, e.digest().to_vec());
    }
    for e in ima_events() {
        p.allow(10, EventType::Ima, e.digest().to_vec());
    }
    p
}

fn vm(seed: u8) -> (GuestVm, Vec<u8>) {
    let mut sp = SecureProcessor::from_seed([seed; 32]);
    let cfg = LaunchConfig {
        with_svsm: true,
        entropy: EntropyMode::Deterministic([seed; 32]),
    };
    let vm = GuestVm::launch(&mut sp, &image(), cfg, ProvisionOptions::default()).unwrap();
    let chain = sp.vcek_chain();
    (vm, chain)
}

fn service(seed: u64) -> AttestationService {
    let mut cfg = ServiceConfig::ephemeral(policy());
    cfg.seed = Some(seed);
    AttestationService::start(cfg).unwrap()
}

fn booted_agent(seed: u8) -> Agent<GuestVm> {
    let (vm, chain) = vm(seed);
    let mut agent = Agent::enroll(vm, [seed; 16], chain).unwrap();
    agent.boot_and_measure(&boot_events(), &ima_events()).unwrap();
    agent
}

fn sha256_fold(digests: &[[u8; 32]]) -> Vec<u8> {
    let mut v = vec![0u8; 32];
    for d in digests {
        let mut h = Sha256::new();
        h.update(&v);
        h.update(d);
        v = h.finalize().to_vec();
    }
    v
}

fn pcr(agent: &mut Agent<GuestVm>, index: u32) -> Vec<u8> {
    let sel = [PcrSelection::from_indices(Bank::Sha256, &[index]).unwrap()];
    agent.client().pcr_read(&sel).unwrap().remove(0)
}

#[test]
fn empty_boot_leaves_pcrs_zero() {
    let (vm, chain) = vm(1);
    let mut agent = Agent::enroll(vm, [1; 16], chain).unwrap();
    agent.boot_and_measure(&[], &[]).unwrap();
    assert!(agent.log().is_empty());
    assert!(agent.log().replay().is_empty());
    assert_eq!(pcr(&mut agent, 10), vec![0; 32]);
}

#[test]
fn five_event_log_matches_independent_fold() {
    let mut agent = booted_agent(2);
    let ima: Vec<[u8; 32]> = ima_events()
        .iter()
        .map(|e| Sha256::digest(e.data.as_bytes()).into())
        .collect();
    assert_eq!(pcr(&mut agent, 10), sha256_fold(&ima));
    let kernel: [u8; 32] = Sha256::digest(b"vmlinuz-6.1").into();
    assert_eq!(pcr(&mut agent, 5), sha256_fold(&[kernel]));
    assert_eq!(agent.log().len(), 5);
    for ((b, i), v) in agent.log().replay() {
        assert_eq!(b, Bank::Sha256);
        assert_eq!(pcr(&mut agent, i), v);
    }
}

#[test]
fn event_order_matters() {
    let (vm_a, ca) = vm(3);
    let (vm_b, cb) = vm(3);
    let mut a = Agent::enroll(vm_a, [3; 16], ca).unwrap();
    let mut b = Agent::enroll(vm_b, [3; 16], cb).unwrap();
    let mut rev = ima_events();
    rev.reverse();
    a.boot_and_measure(&[], &ima_events()).unwrap();
    b.boot_and_measure(&[], &rev).unwrap();
    assert_ne!(pcr(&mut a, 10), pcr(&mut b, 10));
}

#[test]
fn boot_event_outside_boot_pcrs_rejected() {
    let (vm, chain) = vm(4);
    let mut agent = Agent::enroll(vm, [4; 16], chain).unwrap();
    let err = agent
        .boot_and_measure(&[MeasuredEvent::boot(9, "x", "y")], &[])
        .unwrap_err();
    assert!(matches!(err, AgentError::InvalidEvent(_)));
    assert!(agent.log().is_empty());
}

#[test]
fn enrolled_identity_is_the_provisioned_one() {
    let (vm, chain) = vm(5);
    let ek = vm.svsm().ek_public().clone();
    let report = vm.svsm().report().to_bytes();
    let agent = Agent::enroll(vm, [5; 16], chain).unwrap();
    assert_eq!(agent.identity().ek_pub, ek);
    assert_eq!(agent.identity().att_report, report);
}

#[test]
fn honest_round_is_trusted() {
    let svc = service(1);
    let mut agent = booted_agent(6);
    agent.register(svc.registrar_addr()).unwrap();
    assert_eq!(svc.store().len(), 1);
    let verdict = agent.attest(svc.verifier_addr()).unwrap();
    assert_eq!(verdict, Verdict::trusted());
    // Repeated attestation with fresh nonces stays trusted.
    assert!(agent.attest(svc.verifier_addr()).unwrap().trusted);
    let kinds: Vec<&str> = agent.transcript().iter().map(|e| e.message.kind()).collect();
    assert_eq!(
        kinds[..7],
        [
            "Register",
            "Challenge",
            "ActivateProof",
            "RegisterResult",
            "QuoteRequest",
            "QuoteResponse",
            "AttestationResult"
        ]
    );
}

#[test]
fn unauthorized_ima_event_is_named() {
    let svc = service(2);
    let mut agent = booted_agent(7);
    agent.register(svc.registrar_addr()).unwrap();
    let rogue = MeasuredEvent::ima("/tmp/rootkit", "rootkit-binary");
    agent.measure_ima(&rogue).unwrap();
    let verdict = agent.attest(svc.verifier_addr()).unwrap();
    assert!(!verdict.trusted);
    assert_eq!(verdict.codes(), vec![FailureCode::PolicyViolation]);
    assert!(verdict.failures[0].detail.contains(&hex::encode(rogue.digest())));
}

#[test]
fn removed_log_entry_diverges() {
    let svc = service(3);
    let mut agent = booted_agent(8);
    agent.register(svc.registrar_addr()).unwrap();
    agent.log_mut().entries_mut().pop();
    let verdict = agent.attest(svc.verifier_addr()).unwrap();
    assert!(verdict.has(FailureCode::PcrLogDivergence));
    assert!(!verdict.trusted);
}

#[test]
fn stale_quote_fails_nonce_check() {
    let svc = service(4);
    let mut agent = booted_agent(9);
    agent.register(svc.registrar_addr()).unwrap();
    let stale = agent.quote_response(b"old nonce", MASK).unwrap();
    let verdict = agent.attest_with(svc.verifier_addr(), |m| *m = stale).unwrap();
    assert_eq!(verdict.codes(), vec![FailureCode::NonceMismatch]);
}

#[test]
fn unregistered_agent_is_untrusted() {
    let svc = service(5);
    let mut agent = booted_agent(10);
    let verdict = agent.attest(svc.verifier_addr()).unwrap();
    assert_eq!(verdict.codes(), vec![FailureCode::CredentialFailure]);
}

#[test]
fn unreachable_registrar_is_a_transport_error() {
    let addr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let mut agent = booted_agent(11);
    assert!(matches!(agent.register(addr), Err(AgentError::Transport(_))));
}

#[test]
fn software_tpm_with_copied_report_is_rejected() {
    let svc = service(6);
    let (mut vm, chain) = vm(12);
    let stolen = vm
        .invoke(
            &tpm_engine::command::Command::NvRead {
                index: EK_REPORT_NV_INDEX,
            }
            .encode(),
        )
        .unwrap();
    let stolen = match tpm_engine::command::Response::decode(&stolen).unwrap() {
        tpm_engine::command::Response::Data(d) => d,
        other => panic!("{other:?}"),
    };
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut fake = SoftwareTpm::manufacture(&mut tpm_engine::RngEntropy(&mut rng)).unwrap();
    fake.0.nv_define_write(EK_REPORT_NV_INDEX, &stolen).unwrap();
    let mut agent = Agent::enroll(fake, [12; 16], chain).unwrap();
    match agent.register(svc.registrar_addr()) {
        Err(AgentError::RegistrarRejected(f)) => {
            assert_eq!(
                f.iter().map(|f| f.code).collect::<Vec<_>>(),
                vec![FailureCode::EkDigestMismatch]
            )
        }
        other => panic!("{other:?}"),
    }
    assert!(svc.store().is_empty());
}

#[test]
fn real_ek_with_fake_aik_fails_activation() {
    let svc = service(7);
    let mut agent = booted_agent(13);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut fake = TpmClient::new(SoftwareTpm::manufacture(&mut tpm_engine::RngEntropy(&mut rng)).unwrap());
    let (_, fake_aik) = fake
        .create_primary(
            tpm_engine::Hierarchy::Endorsement,
            tpm_engine::KeyTemplate::attestation(),
        )
        .unwrap();
    agent.identity_mut().aik_pub = fake_aik;
    match agent.register(svc.registrar_addr()) {
        Err(AgentError::RegistrarRejected(f)) => assert_eq!(f[0].code, FailureCode::CredentialFailure),
        other => panic!("{other:?}"),
    }
}

#[test]
fn quote_from_fake_tpm_fails_signature() {
    let svc = service(8);
    let mut agent = booted_agent(14);
    agent.register(svc.registrar_addr()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let fake = SoftwareTpm::manufacture(&mut tpm_engine::RngEntropy(&mut rng)).unwrap();
    let mut fake = TpmClient::new(fake);
    let (aik, _) = fake
        .create_primary(
            tpm_engine::Hierarchy::Endorsement,
            tpm_engine::KeyTemplate::attestation(),
        )
        .unwrap();
    let log = agent.log().clone();
    for e in log.entries() {
        fake.pcr_extend(e.bank, e.pcr_index, &e.digest).unwrap();
    }
    let verdict = agent
        .attest_with(svc.verifier_addr(), |m| {
            let Message::QuoteResponse { quote, pcr_values, .. } = m else {
                unreachable!()
            };
            let q = tpm_engine::Quote::from_bytes(quote).unwrap();
            let forged = fake.quote(aik, &q.selection, &q.nonce).unwrap();
            *quote = forged.to_bytes();
            *pcr_values = fake
                .pcr_read(&q.selection)
                .unwrap()
                .into_iter()
                .map(attest_wire::HexBytes)
                .collect();
        })
        .unwrap();
    assert_eq!(verdict.codes(), vec![FailureCode::SigInvalid]);
}

#[test]
fn reboot_reregistration_replaces_record() {
    let svc = service(9);
    let agent = booted_agent(15);
    let mut agent = agent;
    agent.register(svc.registrar_addr()).unwrap();
    let uuid = agent.identity().uuid;
    let first = svc.store().get(&uuid).unwrap();

    let (vm, chain) = vm(15);
    let vm = vm.reboot().unwrap();
    let mut agent = Agent::enroll(vm, uuid, chain).unwrap();
    agent.boot_and_measure(&boot_events(), &ima_events()).unwrap();
    agent.register(svc.registrar_addr()).unwrap();
    let second = svc.store().get(&uuid).unwrap();
    assert_eq!(svc.store().len(), 1);
    assert_ne!(first.ek_pub, second.ek_pub);
    assert!(agent.attest(svc.verifier_addr()).unwrap().trusted);
}

#[test]
fn seeded_runs_have_identical_transcripts() {
    let run = || {
        let svc = service(42);
        let mut agent = booted_agent(16);
        agent.register(svc.registrar_addr()).unwrap();
        agent.attest(svc.verifier_addr()).unwrap();
        serde_json::to_string(agent.transcript()).unwrap()
    };
    assert_eq!(run(), run());
}

fn fde_round(parent: FdeParent) {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let disk_key = [0x42u8; DISK_KEY_LEN];
    let (intermediate, sealed) = prepare_disk(&disk_key, &mut rng).unwrap();

    let (vm, _) = vm(17);
    let mut client = TpmClient::new(vm);
    let parent_pub = fde_parent_public(&mut client, parent).unwrap();
    let wrapped = wrap_for_boot(&intermediate, &parent_pub, &mut rng).unwrap();
    assert_eq!(
        &fde_unlock(&mut client, parent, &sealed, &wrapped).unwrap()[..],
        &disk_key
    );

    let mut client = TpmClient::new(client.into_transport().reboot().unwrap());
    let err = fde_unlock(&mut client, parent, &sealed, &wrapped).unwrap_err();
    assert!(matches!(err, AgentError::Tpm(TpmError::ImportFailed)), "{err:?}");

    let parent_pub = fde_parent_public(&mut client, parent).unwrap();
    let rewrapped = wrap_for_boot(&intermediate, &parent_pub, &mut rng).unwrap();
    assert_eq!(
        &fde_unlock(&mut client, parent, &sealed, &rewrapped).unwrap()[..],
        &disk_key
    );
}

#[test]
fn fde_under_storage_root() {
    fde_round(FdeParent::StorageRoot);
}

#[test]
fn fde_under_endorsement_key() {
    fde_round(FdeParent::Endorsement);
}
