// SPDX-License-Identifier: Apache-2.0

use attest_wire::{FailureCode, Message, Verdict};
use guest_agent::{
    fde_parent_public, fde_unlock, prepare_disk, wrap_for_boot, Agent, AgentError, FdeParent, SoftwareTpm, TpmClient,
    TpmTransport,
};
use rand::RngCore;
use snp_platform::{ContextRole, EntropyMode, LaunchConfig};
use svsm_service::{ek_report_data, ProvisionOptions, EK_REPORT_NV_INDEX};
use tpm_engine::{Hierarchy, KeyTemplate, Quote, RngEntropy, TpmError};

use crate::config::ScenarioConfig;
use crate::harness::{launch_vm, Endpoints, Seeds};
use crate::report::{ScenarioError, ScenarioReport, EXIT_CONTRACT, EXIT_OK, EXIT_UNTRUSTED};

/// Adversarial scenarios. Each one passes when the defense fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Attack {
    /// A software TPM poses as the vTPM.
    FakeVtpm,
    /// Guest code obtains a report for the EK at its own VMPL.
    FakeReport,
    /// Another VM's genuine report is replayed.
    ReplayedReport,
    /// The VM was launched without an SVSM.
    NoSvsm,
    /// The CPU entropy source returns a constant.
    WeakRng,
}

impl Attack {
    pub const ALL: [Attack; 5] = [
        Attack::FakeVtpm,
        Attack::FakeReport,
        Attack::ReplayedReport,
        Attack::NoSvsm,
        Attack::WeakRng,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attack::FakeVtpm => "fake-vtpm",
            Attack::FakeReport => "fake-report",
            Attack::ReplayedReport => "replayed-report",
            Attack::NoSvsm => "no-svsm",
            Attack::WeakRng => "weak-rng",
        }
    }
}

fn finish(mut report: ScenarioReport, result: Result<(), ScenarioError>) -> ScenarioReport {
    match result {
        Ok(()) => report,
        Err(e) => {
            report.verdicts.clear();
            report.aborted(&e)
        }
    }
}

/// Registers, attests once and records the transcript in `report`.
fn register_then_attest<T: TpmTransport>(
    agent: &mut Agent<T>,
    endpoints: &Endpoints,
    report: &mut ScenarioReport,
) -> Result<Verdict, ScenarioError> {
    let result = match agent.register(endpoints.registrar) {
        Ok(()) => agent.attest(endpoints.verifier),
        Err(AgentError::RegistrarRejected(failures)) => Ok(Verdict::from_failures(failures)),
        Err(e) => Err(e),
    };
    report.transcript.extend(agent.take_transcript());
    let verdict = result?;
    report.note(format!(
        "verdict: trusted={} failures=[{}]",
        verdict.trusted,
        verdict
            .codes()
            .iter()
            .map(|c| format!("{c:?}"))
            .collect::<Vec<_>>()
            .join(",")
    ));
    report.verdicts.push(verdict.clone());
    Ok(verdict)
}

/// Launch, measured boot, registration and one attestation round.
pub fn run_honest(config: &ScenarioConfig) -> ScenarioReport {
    let mut report = ScenarioReport::new("honest");
    let result = honest(config, &mut report);
    finish(report, result)
}

fn honest(config: &ScenarioConfig, report: &mut ScenarioReport) -> Result<(), ScenarioError> {
    let seeds = Seeds::new(config.seed);
    let endpoints = Endpoints::start(config, &seeds)?;
    let mut processor = seeds.processor("chip");
    let vm = launch_vm(
        &mut processor,
        &config.image,
        seeds.entropy("vm"),
        ProvisionOptions::default(),
    )?;
    report.note(format!("launch measurement {}", hex::encode(vm.measurement())));
    let mut agent = Agent::enroll(vm, seeds.uuid("agent"), processor.vcek_chain())?;
    agent.boot_and_measure(&config.events.boot, &config.events.ima)?;
    report.note(format!("measured {} events", agent.log().len()));
    let verdict = register_then_attest(&mut agent, &endpoints, report)?;
    report.passed = verdict.trusted;
    report.exit_code = if verdict.trusted { EXIT_OK } else { EXIT_UNTRUSTED };
    Ok(())
}

/// Runs one attack. Exit code 0 means the defense fired.
pub fn run_attack(attack: Attack, config: &ScenarioConfig) -> ScenarioReport {
    let mut report = ScenarioReport::new(format!("attack:{}", attack.name()));
    let seeds = Seeds::new(config.seed);
    let result = match attack {
        Attack::FakeVtpm => fake_vtpm(config, &seeds, &mut report),
        Attack::FakeReport => fake_report(config, &seeds, &mut report),
        Attack::ReplayedReport => replayed_report(config, &seeds, &mut report),
        Attack::NoSvsm => no_svsm(config, &seeds, &mut report),
        Attack::WeakRng => weak_rng(config, &seeds, &mut report),
    };
    let result = result.map(|fired| {
        report.passed = fired;
        report.exit_code = if fired { EXIT_OK } else { EXIT_CONTRACT };
    });
    finish(report, result)
}

fn rejected_with(verdict: &Verdict, codes: &[FailureCode]) -> bool {
    !verdict.trusted && codes.iter().any(|c| verdict.has(*c))
}

fn fake_vtpm(config: &ScenarioConfig, seeds: &Seeds, report: &mut ScenarioReport) -> Result<bool, ScenarioError> {
    let endpoints = Endpoints::start(config, seeds)?;
    let mut processor = seeds.processor("chip");
    let chain = processor.vcek_chain();
    let mut vm = launch_vm(
        &mut processor,
        &config.image,
        seeds.entropy("vm"),
        ProvisionOptions::default(),
    )?;

    // The software TPM presents the genuine vTPM's report as its own.
    let stolen = TpmClient::new(&mut vm).nv_read(EK_REPORT_NV_INDEX)?;
    let mut fake = SoftwareTpm::manufacture(&mut RngEntropy(seeds.rng("fake-tpm")))?;
    fake.0.nv_define_write(EK_REPORT_NV_INDEX, &stolen)?;
    let mut impostor = Agent::enroll(fake, seeds.uuid("impostor"), chain.clone())?;
    impostor.boot_and_measure(&config.events.boot, &config.events.ima)?;
    let v1 = register_then_attest(&mut impostor, &endpoints, report)?;
    let fired_registration = rejected_with(&v1, &[FailureCode::EkDigestMismatch, FailureCode::SigInvalid]);
    report.note(format!(
        "software TPM with copied report rejected: {fired_registration}"
    ));

    // A registered vTPM's quotes are replaced with ones from a software TPM
    // that replays the same event log.
    let mut agent = Agent::enroll(vm, seeds.uuid("agent"), chain)?;
    agent.boot_and_measure(&config.events.boot, &config.events.ima)?;
    let registered = agent.register(endpoints.registrar);
    report.transcript.extend(agent.take_transcript());
    registered?;
    let mut forger = TpmClient::new(SoftwareTpm::manufacture(&mut RngEntropy(seeds.rng("forger")))?);
    let (aik, _) = forger.create_primary(Hierarchy::Endorsement, KeyTemplate::attestation())?;
    for e in agent.log().entries() {
        forger.pcr_extend(e.bank, e.pcr_index, &e.digest)?;
    }
    let mut forge_error = None;
    let result = agent.attest_with(endpoints.verifier, |msg| {
        if let Message::QuoteResponse { quote, .. } = msg {
            let forged = Quote::from_bytes(quote)
                .map_err(AgentError::from)
                .and_then(|q| forger.quote(aik, &q.selection, &q.nonce));
            match forged {
                Ok(q) => *quote = q.to_bytes(),
                Err(e) => forge_error = Some(e),
            }
        }
    });
    report.transcript.extend(agent.take_transcript());
    if let Some(e) = forge_error {
        return Err(e.into());
    }
    let v2 = result?;
    report.note(format!(
        "verdict: trusted={} failures=[{}]",
        v2.trusted,
        v2.codes()
            .iter()
            .map(|c| format!("{c:?}"))
            .collect::<Vec<_>>()
            .join(",")
    ));
    report.verdicts.push(v2.clone());
    let fired_quote = rejected_with(&v2, &[FailureCode::SigInvalid]);
    report.note(format!("quote from software TPM rejected: {fired_quote}"));
    Ok(fired_registration && fired_quote)
}

fn fake_report(config: &ScenarioConfig, seeds: &Seeds, report: &mut ScenarioReport) -> Result<bool, ScenarioError> {
    let endpoints = Endpoints::start(config, seeds)?;
    let mut processor = seeds.processor("chip");
    let mut vm = launch_vm(
        &mut processor,
        &config.image,
        seeds.entropy("vm"),
        ProvisionOptions::default(),
    )?;
    let (_, ek) = TpmClient::new(&mut vm).create_primary(Hierarchy::Endorsement, KeyTemplate::endorsement())?;

    // The guest asks for a report binding the EK and claims VMPL0.
    let forged = vm.guest_report(&ek_report_data(&ek), 0)?;
    report.note(format!("guest-obtained report carries vmpl {}", forged.vmpl));
    TpmClient::new(&mut vm).nv_define_write(EK_REPORT_NV_INDEX, &forged.to_bytes())?;

    let mut agent = Agent::enroll(vm, seeds.uuid("agent"), processor.vcek_chain())?;
    agent.boot_and_measure(&config.events.boot, &config.events.ima)?;
    let verdict = register_then_attest(&mut agent, &endpoints, report)?;
    Ok(rejected_with(&verdict, &[FailureCode::VmplNonZero]))
}

fn replayed_report(config: &ScenarioConfig, seeds: &Seeds, report: &mut ScenarioReport) -> Result<bool, ScenarioError> {
    let endpoints = Endpoints::start(config, seeds)?;
    let mut processor = seeds.processor("chip");
    let mut vm_a = launch_vm(
        &mut processor,
        &config.image,
        seeds.entropy("vm-a"),
        ProvisionOptions::default(),
    )?;
    let mut vm_b = launch_vm(
        &mut processor,
        &config.image,
        seeds.entropy("vm-b"),
        ProvisionOptions::default(),
    )?;

    let genuine_b = TpmClient::new(&mut vm_b).nv_read(EK_REPORT_NV_INDEX)?;
    TpmClient::new(&mut vm_a).nv_define_write(EK_REPORT_NV_INDEX, &genuine_b)?;
    report.note("VM B's report stored in VM A's vTPM");

    let mut agent = Agent::enroll(vm_a, seeds.uuid("agent-a"), processor.vcek_chain())?;
    agent.boot_and_measure(&config.events.boot, &config.events.ima)?;
    let verdict = register_then_attest(&mut agent, &endpoints, report)?;
    Ok(rejected_with(&verdict, &[FailureCode::EkDigestMismatch]))
}

fn no_svsm(config: &ScenarioConfig, seeds: &Seeds, report: &mut ScenarioReport) -> Result<bool, ScenarioError> {
    let endpoints = Endpoints::start(config, seeds)?;
    let mut processor = seeds.processor("chip");
    let mut platform = processor.launch(
        &config.image_without_svsm(),
        LaunchConfig {
            with_svsm: false,
            entropy: seeds.entropy("vm"),
        },
    )?;
    report.note(format!("guest runs at vmpl {}", platform.vmpl_of(ContextRole::Guest)?));

    // The guest kernel runs its own TPM at VMPL0 and reports on it.
    let mut client = TpmClient::new(SoftwareTpm::manufacture(platform.cpu_entropy())?);
    let (_, ek) = client.create_primary(Hierarchy::Endorsement, KeyTemplate::endorsement())?;
    let mut messenger = platform.messenger(ContextRole::Guest)?;
    let request = messenger.report_request(&ek_report_data(&ek), 0);
    let (response, _) = platform.report_request(messenger.vmpl(), &request)?;
    let ek_report = messenger.open_report(&response)?;
    client.nv_define_write(EK_REPORT_NV_INDEX, &ek_report.to_bytes())?;

    let mut agent = Agent::enroll(client.into_transport(), seeds.uuid("agent"), processor.vcek_chain())?;
    agent.boot_and_measure(&config.events.boot, &config.events.ima)?;
    let verdict = register_then_attest(&mut agent, &endpoints, report)?;
    Ok(rejected_with(&verdict, &[FailureCode::MeasurementMismatch]))
}

fn weak_rng(config: &ScenarioConfig, seeds: &Seeds, report: &mut ScenarioReport) -> Result<bool, ScenarioError> {
    let ek = |label: &str, mix: bool| -> Result<[u8; 66], ScenarioError> {
        let mut processor = seeds.processor(label);
        let vm = launch_vm(
            &mut processor,
            &config.image,
            EntropyMode::FaultyConstant(0xFF),
            ProvisionOptions { mix_derived_key: mix },
        )?;
        Ok(vm.svsm().ek_public().to_bytes())
    };
    let cloned = ek("chip-a", false)? == ek("chip-b", false)?;
    report.note(format!("constant entropy without mixing gives identical EKs: {cloned}"));
    let distinct = ek("chip-a", true)? != ek("chip-b", true)?;
    report.note(format!(
        "mixing in the platform-derived key gives distinct EKs: {distinct}"
    ));
    Ok(cloned && distinct)
}

/// Disk unlock lifecycle under both parent choices: unlock, reboot, stale
/// materials refused, re-wrap and unlock again.
pub fn run_fde(config: &ScenarioConfig) -> ScenarioReport {
    let mut report = ScenarioReport::new("fde");
    let result = fde(config, &mut report).map(|ok| {
        report.passed = ok;
        report.exit_code = if ok { EXIT_OK } else { EXIT_CONTRACT };
    });
    finish(report, result)
}

fn fde(config: &ScenarioConfig, report: &mut ScenarioReport) -> Result<bool, ScenarioError> {
    let seeds = Seeds::new(config.seed);
    let mut all = true;
    for parent in [FdeParent::StorageRoot, FdeParent::Endorsement] {
        let label = format!("{parent:?}");
        let mut processor = seeds.processor(&format!("fde-chip-{label}"));
        let mut workstation = seeds.rng(&format!("workstation-{label}"));
        let mut disk_key = [0u8; guest_agent::DISK_KEY_LEN];
        workstation.fill_bytes(&mut disk_key);
        let (intermediate, sealed) = prepare_disk(&disk_key, &mut workstation)?;

        let vm = launch_vm(
            &mut processor,
            &config.image,
            seeds.entropy(&format!("fde-vm-{label}")),
            ProvisionOptions::default(),
        )?;
        let mut client = TpmClient::new(vm);
        let parent_pub = fde_parent_public(&mut client, parent)?;
        let wrapped = wrap_for_boot(&intermediate, &parent_pub, &mut workstation)?;
        let first = fde_unlock(&mut client, parent, &sealed, &wrapped)?;
        let unlocked = first.as_slice() == disk_key;

        let mut client = TpmClient::new(client.into_transport().reboot()?);
        let stale = matches!(
            fde_unlock(&mut client, parent, &sealed, &wrapped),
            Err(AgentError::Tpm(TpmError::ImportFailed))
        );

        let parent_pub = fde_parent_public(&mut client, parent)?;
        let rewrapped = wrap_for_boot(&intermediate, &parent_pub, &mut workstation)?;
        let again = fde_unlock(&mut client, parent, &sealed, &rewrapped)?;
        let reunlocked = again.as_slice() == disk_key;

        report.note(format!(
            "{label}: unlock={unlocked} stale-after-reboot-refused={stale} rewrap-unlock={reunlocked}"
        ));
        all &= unlocked && stale && reunlocked;
    }
    Ok(all)
}
