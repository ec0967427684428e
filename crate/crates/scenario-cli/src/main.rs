// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use scenario_cli::bench::{run_bench, table, to_csv, BenchCommand};
use scenario_cli::{
    derive_policy, run_attack, run_fde, run_honest, Attack, ExternalService, ScenarioConfig, ScenarioReport,
    EXIT_CONTRACT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    /// Launch, measure, register and attest.
    Honest,
    /// Adversarial scenarios; all of them unless --attack is given.
    Attack,
    /// Disk unlock lifecycle.
    Fde,
    /// Command latency through the guest channel.
    Bench,
    /// Print the policy that admits the configured image and events.
    Policy,
}

/// Drive the simulated confidential VM stack end to end.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Implies --scenario attack.
    #[arg(long, value_enum)]
    attack: Option<Attack>,
    /// Scenario config JSON. Defaults to the built-in fixtures.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use OS entropy everywhere, ignoring any configured seed.
    #[arg(long, conflicts_with = "seed")]
    unseeded: bool,
    /// Registrar at host:port, verifier at port+1, instead of an in-process service.
    #[arg(long)]
    external_service: Option<String>,
    #[arg(long, default_value_t = 3000)]
    iterations: usize,
    /// Write benchmark results as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Benchmark only these commands.
    #[arg(long, value_enum, value_delimiter = ',')]
    command: Vec<BenchCommand>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => match ScenarioConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("cannot load config: {e}");
                return ExitCode::from(EXIT_CONTRACT);
            }
        },
        None => ScenarioConfig::builtin(),
    };
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if args.unseeded {
        config.seed = None;
    }
    if let Some(addr) = &args.external_service {
        match ExternalService::parse(addr) {
            Ok(ext) => config.external = Some(ext),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(EXIT_CONTRACT);
            }
        }
    }

    let scenario = match (args.scenario, args.attack) {
        (Some(s), _) => s,
        (None, Some(_)) => Scenario::Attack,
        (None, None) => Scenario::Honest,
    };
    match scenario {
        Scenario::Honest => emit(vec![run_honest(&config)]),
        Scenario::Fde => emit(vec![run_fde(&config)]),
        Scenario::Attack => {
            let attacks = match args.attack {
                Some(a) => vec![a],
                None => Attack::ALL.to_vec(),
            };
            emit(attacks.into_iter().map(|a| run_attack(a, &config)).collect())
        }
        Scenario::Policy => {
            println!("{}", derive_policy(&config.image, &config.events).to_json());
            ExitCode::SUCCESS
        }
        Scenario::Bench => {
            let commands = if args.command.is_empty() {
                BenchCommand::ALL.to_vec()
            } else {
                args.command.clone()
            };
            match run_bench(&config, &commands, args.iterations) {
                Ok(results) => {
                    print!("{}", table(&results));
                    if let Some(path) = &args.csv {
                        if let Err(e) = std::fs::write(path, to_csv(&results)) {
                            eprintln!("cannot write {}: {e}", path.display());
                            return ExitCode::from(EXIT_CONTRACT);
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("benchmark failed: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
    }
}

/// Prints the reports and exits with the worst exit code among them.
fn emit(reports: Vec<ScenarioReport>) -> ExitCode {
    let code = reports.iter().map(|r| r.exit_code).max().unwrap_or(0);
    if let [one] = reports.as_slice() {
        println!("{}", one.to_json());
    } else {
        println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
    }
    ExitCode::from(code)
}
