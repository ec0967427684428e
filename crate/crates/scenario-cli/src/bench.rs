// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::time::Instant;

use guest_agent::TpmClient;
use serde::Serialize;
use svsm_service::ProvisionOptions;
use tpm_engine::{Bank, Hierarchy, KeyTemplate, PcrSelection};

use crate::config::ScenarioConfig;
use crate::harness::{launch_vm, Seeds};
use crate::report::ScenarioError;

pub const CSV_HEADER: &str = "command,iterations,mean_us,median_us,p99_us";

/// Commands timed end to end through the guest channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchCommand {
    Pcrread,
    Pcrextend,
    Quote,
    Createprimary,
}

impl BenchCommand {
    pub const ALL: [BenchCommand; 4] = [
        BenchCommand::Pcrread,
        BenchCommand::Pcrextend,
        BenchCommand::Quote,
        BenchCommand::Createprimary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchCommand::Pcrread => "pcrread",
            BenchCommand::Pcrextend => "pcrextend",
            BenchCommand::Quote => "quote",
            BenchCommand::Createprimary => "createprimary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchStats {
    pub command: String,
    pub iterations: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p99_us: f64,
}

/// Mean, median and nearest-rank 99th percentile of `samples_us`.
pub fn stats(command: &str, samples_us: &[f64]) -> BenchStats {
    assert!(!samples_us.is_empty(), "no samples");
    let mut sorted = samples_us.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let rank = (0.99 * n as f64).ceil() as usize;
    BenchStats {
        command: command.to_string(),
        iterations: n,
        mean_us: sorted.iter().sum::<f64>() / n as f64,
        median_us: median,
        p99_us: sorted[rank.max(1) - 1],
    }
}

/// Times `iterations` runs of each command on a fresh VM.
pub fn run_bench(
    config: &ScenarioConfig,
    commands: &[BenchCommand],
    iterations: usize,
) -> Result<Vec<BenchStats>, ScenarioError> {
    if iterations == 0 {
        return Err(ScenarioError::Failed("iterations must be positive".into()));
    }
    let seeds = Seeds::new(config.seed);
    let mut processor = seeds.processor("bench-chip");
    let vm = launch_vm(
        &mut processor,
        &config.image,
        seeds.entropy("bench-vm"),
        ProvisionOptions::default(),
    )?;
    let mut client = TpmClient::new(vm);
    let (aik, _) = client.create_primary(Hierarchy::Endorsement, KeyTemplate::attestation())?;
    let selection = [PcrSelection::from_indices(Bank::Sha256, &[0, 1, 2, 3, 4, 5, 6, 7, 10])?];
    let digest = [0x5Au8; 32];
    let nonce = [0xA5u8; 32];

    let mut out = Vec::new();
    for &command in commands {
        let mut samples = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let start = Instant::now();
            match command {
                BenchCommand::Pcrread => {
                    client.pcr_read(&selection)?;
                }
                BenchCommand::Pcrextend => {
                    client.pcr_extend(Bank::Sha256, 16, &digest)?;
                }
                BenchCommand::Quote => {
                    client.quote(aik, &selection, &nonce)?;
                }
                BenchCommand::Createprimary => {
                    client.create_primary(Hierarchy::Endorsement, KeyTemplate::endorsement())?;
                }
            }
            samples.push(start.elapsed().as_secs_f64() * 1e6);
        }
        out.push(stats(command.name(), &samples));
    }
    Ok(out)
}

pub fn to_csv(results: &[BenchStats]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{:.3},{:.3},{:.3}",
            r.command, r.iterations, r.mean_us, r.median_us, r.p99_us
        );
    }
    s
}

pub fn table(results: &[BenchStats]) -> String {
    let mut s = format!(
        "{:<14} {:>10} {:>12} {:>12} {:>12}\n",
        "command", "iterations", "mean_us", "median_us", "p99_us"
    );
    for r in results {
        let _ = writeln!(
            s,
            "{:<14} {:>10} {:>12.3} {:>12.3} {:>12.3}",
            r.command, r.iterations, r.mean_us, r.median_us, r.p99_us
        );
    }
    s
}
