// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria for the whole stack. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use attestation_service::{check_ek_report, FailureCode};
use guest_agent::{AgentError, SoftwareTpm, TpmClient};
use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};
use scenario_cli::bench::{run_bench, to_csv, BenchCommand, CSV_HEADER};
use scenario_cli::fuzz::random_command;
use scenario_cli::harness::launch_vm;
use scenario_cli::{run_attack, run_fde, run_honest, Attack, ScenarioConfig};
use sha1::Sha1;
use sha2::{Digest, Sha256, Sha384};
use snp_platform::{ContextRole, EntropyMode, LaunchConfig, LaunchImage, PlatformHandle, SecureProcessor};
use svsm_service::{ek_report_data, ProvisionOptions, SvsmInstance};
use tpm_engine::{
    make_credential, Bank, Hierarchy, KeyTemplate, OfflineKey, OsEntropy, PcrSelection, PublicKey, PCR_COUNT,
};
use vmpl_channel::{ChannelError, HookAction, VmExit};

type Criterion = (&'static str, fn());

fn main() {
    let criteria: [Criterion; 9] = [
        ("pcr-fold-matches-reference", pcr_fold_matches_reference),
        ("report-mutations-map-to-codes", report_mutations_map_to_codes),
        ("honest-flow-trusted-and-reproducible", honest_flow),
        ("attacks-detected", attacks_detected),
        ("ek-fresh-and-secrets-contained", ek_fresh_and_secrets_contained),
        ("credential-truth-table", credential_truth_table),
        ("disk-unlock-lifecycle", disk_unlock_lifecycle),
        ("channel-transparent-and-halt-safe", channel_transparent_and_halt_safe),
        ("benchmark-csv-and-latency", benchmark),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS {} {name} ({secs:.2}s)", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {} {name} ({secs:.2}s): {msg}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn reference_hash(bank: Bank, data: &[u8]) -> Vec<u8> {
    match bank {
        Bank::Sha1 => Sha1::digest(data).to_vec(),
        Bank::Sha256 => Sha256::digest(data).to_vec(),
        Bank::Sha384 => Sha384::digest(data).to_vec(),
    }
}

fn pcr_fold_matches_reference() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let banks = [Bank::Sha1, Bank::Sha256, Bank::Sha384];
    for list in 0..500 {
        let mut tpm = TpmClient::new(SoftwareTpm::manufacture(&mut OsEntropy).unwrap());
        let mut expected: Vec<Vec<Vec<u8>>> = banks
            .iter()
            .map(|&b| vec![vec![0u8; reference_hash(b, b"").len()]; PCR_COUNT])
            .collect();
        for _ in 0..rng.gen_range(0..=64) {
            let b = rng.gen_range(0..3);
            let bank = banks[b];
            let pcr = rng.gen_range(0..PCR_COUNT);
            let mut event = vec![0u8; rng.gen_range(0..128)];
            rng.fill_bytes(&mut event);
            let digest = reference_hash(bank, &event);
            tpm.pcr_extend(bank, pcr as u32, &digest).unwrap();
            let old = &expected[b][pcr];
            expected[b][pcr] = reference_hash(bank, &[old.as_slice(), &digest].concat());
        }
        for (b, &bank) in banks.iter().enumerate() {
            let values = tpm.pcr_read(&[PcrSelection::all(bank)]).unwrap();
            assert_eq!(values, expected[b], "list {list} bank {bank:?}");
        }
    }
    assert!(start.elapsed() < Duration::from_secs(10), "took {:?}", start.elapsed());
}

fn report_via(platform: &mut PlatformHandle, role: ContextRole, data: &[u8; 64]) -> Vec<u8> {
    let mut messenger = platform.messenger(role).unwrap();
    let request = messenger.report_request(data, 0);
    let (response, _) = platform.report_request(messenger.vmpl(), &request).unwrap();
    messenger.open_report(&response).unwrap().to_bytes().to_vec()
}

fn report_mutations_map_to_codes() {
    const SIGNATURE_OFFSET: usize = 0x88;
    const SIGNATURE_LEN: usize = 96;
    let config = ScenarioConfig::builtin();
    let policy = &config.policy;
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let launch = |processor: &mut SecureProcessor, image: &LaunchImage| {
        processor
            .launch(
                image,
                LaunchConfig {
                    with_svsm: true,
                    entropy: EntropyMode::Os,
                },
            )
            .unwrap()
    };
    for round in 0..20 {
        let mut processor = SecureProcessor::from_seed(rng.gen());
        let chain = processor.vcek_chain();
        let ek = OfflineKey::generate_storage_key(&mut rand::rngs::OsRng)
            .public()
            .clone();
        let ek_bytes = ek.to_bytes();
        let data = ek_report_data(&ek);
        let mut golden = launch(&mut processor, &config.image);
        let codes = |report: &[u8]| -> Vec<FailureCode> {
            check_ek_report(&ek_bytes, report, &chain, policy)
                .into_iter()
                .map(|f| f.code)
                .collect()
        };

        let genuine = report_via(&mut golden, ContextRole::Svsm, &data);
        assert_eq!(codes(&genuine), vec![], "round {round}: genuine report");

        let mut forged_sig = genuine.clone();
        forged_sig[SIGNATURE_OFFSET + rng.gen_range(0..SIGNATURE_LEN)] ^= 1 << rng.gen_range(0..8);
        assert_eq!(
            codes(&forged_sig),
            vec![FailureCode::SigInvalid],
            "round {round}: signature"
        );

        let mut part = vec![0u8; rng.gen_range(1..64)];
        rng.fill_bytes(&mut part);
        let other_image = config.image.clone().with_part("kernel-extra", part);
        let mut other = launch(&mut processor, &other_image);
        let wrong_measurement = report_via(&mut other, ContextRole::Svsm, &data);
        assert_eq!(
            codes(&wrong_measurement),
            vec![FailureCode::MeasurementMismatch],
            "round {round}: measurement"
        );

        let from_guest = report_via(&mut golden, ContextRole::Guest, &data);
        assert_eq!(
            codes(&from_guest),
            vec![FailureCode::VmplNonZero],
            "round {round}: vmpl"
        );

        let mut other_data = [0u8; 64];
        rng.fill_bytes(&mut other_data);
        let wrong_binding = report_via(&mut golden, ContextRole::Svsm, &other_data);
        assert_eq!(
            codes(&wrong_binding),
            vec![FailureCode::EkDigestMismatch],
            "round {round}: report data"
        );
    }
}

fn honest_flow() {
    let config = ScenarioConfig::builtin();
    let start = Instant::now();
    let first = run_honest(&config);
    let elapsed = start.elapsed();
    assert!(first.passed, "not trusted: {:?}", first.notes);
    assert_eq!(first.exit_code, 0);
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    assert!(!first.transcript.is_empty());
    let second = run_honest(&config);
    assert_eq!(
        serde_json::to_string(&first.transcript).unwrap(),
        serde_json::to_string(&second.transcript).unwrap(),
        "transcript differs under the same seed"
    );
    assert_eq!(first.to_json(), second.to_json());
}

fn attacks_detected() {
    let mut config = ScenarioConfig::builtin();
    let mut missed = Vec::new();
    for seed in 0..20 {
        config.seed = Some(1000 + seed);
        for attack in Attack::ALL {
            let report = run_attack(attack, &config);
            if !report.passed || report.exit_code != 0 {
                missed.push(format!("{} seed {}: {:?}", attack.name(), 1000 + seed, report.notes));
            }
        }
    }
    assert!(missed.is_empty(), "undetected: {missed:?}");
}

fn ek_fresh_and_secrets_contained() {
    let config = ScenarioConfig::builtin();
    let mut processor = SecureProcessor::new();
    let mut vm = launch_vm(
        &mut processor,
        &config.image,
        EntropyMode::Os,
        ProvisionOptions::default(),
    )
    .unwrap();
    let mut eks = HashSet::new();
    eks.insert(vm.svsm().ek_public().to_bytes());
    for _ in 0..49 {
        vm = vm.reboot().unwrap();
        eks.insert(vm.svsm().ek_public().to_bytes());
    }
    assert_eq!(eks.len(), 50, "EK repeated across boots");

    const WINDOW: usize = 16;
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let mut secret_windows: HashSet<Vec<u8>> = HashSet::new();
    let collect = |vm: &svsm_service::GuestVm, set: &mut HashSet<Vec<u8>>| {
        for s in vm.svsm().tpm().secret_material() {
            assert!(s.len() >= WINDOW);
            set.extend(s.windows(WINDOW).map(<[u8]>::to_vec));
        }
    };
    collect(&vm, &mut secret_windows);
    let mut responses = Vec::new();
    for i in 0..10_000 {
        if let Ok(r) = vm.invoke(&random_command(&mut rng)) {
            responses.push(r);
        }
        if i % 250 == 0 {
            collect(&vm, &mut secret_windows);
        }
    }
    collect(&vm, &mut secret_windows);
    assert!(responses.len() > 1000);
    for (i, r) in responses.iter().enumerate() {
        assert!(
            !r.windows(WINDOW).any(|w| secret_windows.contains(w)),
            "response {i} contains secret material"
        );
    }
}

fn credential_truth_table() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut tpm = TpmClient::new(SoftwareTpm::manufacture(&mut OsEntropy).unwrap());
    let (ek, ek_pub) = tpm
        .create_primary(Hierarchy::Endorsement, KeyTemplate::endorsement())
        .unwrap();
    let (aik, aik_pub) = tpm
        .create_primary(Hierarchy::Endorsement, KeyTemplate::attestation())
        .unwrap();
    let (other_aik, _) = tpm.create_primary(Hierarchy::Null, KeyTemplate::attestation()).unwrap();
    let foreign_ek: PublicKey = OfflineKey::generate_storage_key(&mut rand::rngs::OsRng)
        .public()
        .clone();
    for i in 0..100 {
        let mut secret = vec![0u8; rng.gen_range(1..=32)];
        rng.fill_bytes(&mut secret);
        let mut os = rand::rngs::OsRng;
        let right = make_credential(&ek_pub, &aik_pub.name(), &secret, &mut os).unwrap();
        let wrong_ek = make_credential(&foreign_ek, &aik_pub.name(), &secret, &mut os).unwrap();

        assert_eq!(tpm.activate_credential(ek, aik, &right).unwrap(), secret, "secret {i}");
        let refused = |r: Result<Vec<u8>, AgentError>| matches!(r, Err(AgentError::Tpm(_)));
        assert!(refused(tpm.activate_credential(ek, other_aik, &right)), "wrong aik {i}");
        assert!(refused(tpm.activate_credential(ek, aik, &wrong_ek)), "wrong ek {i}");
        assert!(
            refused(tpm.activate_credential(ek, other_aik, &wrong_ek)),
            "both wrong {i}"
        );
    }
}

fn disk_unlock_lifecycle() {
    let mut config = ScenarioConfig::builtin();
    for seed in [Some(7), None] {
        config.seed = seed;
        let report = run_fde(&config);
        assert!(
            report.passed && report.exit_code == 0,
            "seed {seed:?}: {:?}",
            report.notes
        );
    }
}

fn channel_transparent_and_halt_safe() {
    let config = ScenarioConfig::builtin();
    let mode = LaunchConfig {
        with_svsm: true,
        entropy: EntropyMode::Deterministic([9; 32]),
    };
    let mut sp_a = SecureProcessor::from_seed([8; 32]);
    let mut sp_b = SecureProcessor::from_seed([8; 32]);
    let mut via_channel =
        svsm_service::GuestVm::launch(&mut sp_a, &config.image, mode, ProvisionOptions::default()).unwrap();
    let mut direct = SvsmInstance::provision(
        Arc::new(Mutex::new(sp_b.launch(&config.image, mode).unwrap())),
        ProvisionOptions::default(),
    )
    .unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed_0008);
    for i in 0..1000 {
        let cmd = random_command(&mut rng);
        let a = via_channel.invoke(&cmd);
        let b = direct.execute_direct(&cmd).map_err(|e| ChannelError::Engine(e.code()));
        assert_eq!(a, b, "command {i} diverged");
    }

    let seen: Arc<Mutex<Vec<String>>> = Arc::default();
    let log = seen.clone();
    via_channel.set_hook(Box::new(move |exit: &VmExit| {
        log.lock().unwrap().push(format!("{exit:?}"));
        HookAction::Halt
    }));
    let marker = [0xC3u8; 48];
    let cmd = tpm_engine::command::Command::PcrExtend {
        bank: Bank::Sha384,
        index: 16,
        digest: marker.to_vec(),
    }
    .encode();
    assert_eq!(via_channel.invoke(&cmd), Err(ChannelError::ChannelHalted));
    assert_eq!(via_channel.invoke(&cmd), Err(ChannelError::ChannelHalted));
    assert!(std::mem::size_of::<VmExit>() <= 24);
    let needle = "c3c3c3";
    let seen = seen.lock().unwrap();
    assert!(!seen.is_empty());
    assert!(seen
        .iter()
        .all(|s| !s.to_lowercase().contains(needle) && !s.contains("195, 195")));
}

fn benchmark() {
    let config = ScenarioConfig::builtin();
    let results = run_bench(&config, &BenchCommand::ALL, 3000).unwrap();
    let csv = to_csv(&results);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), BenchCommand::ALL.len());
    for (row, command) in rows.iter().zip(BenchCommand::ALL) {
        assert_eq!(row.len(), 5);
        assert_eq!(row[0], command.name());
        assert_eq!(row[1], "3000");
        let nums: Vec<f64> = row[2..].iter().map(|v| v.parse().unwrap()).collect();
        assert!(nums.iter().all(|v| v.is_finite() && *v > 0.0), "{row:?}");
        assert!(nums[0] < 10_000.0, "{} mean {} us", row[0], nums[0]);
        assert!(nums[1] <= nums[2], "{row:?}");
    }
}
