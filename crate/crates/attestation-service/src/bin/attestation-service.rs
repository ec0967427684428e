// SPDX-License-Identifier: Apache-2.0

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use attestation_service::{
    AttestationPolicy, AttestationService, ServiceConfig, DEFAULT_REGISTRAR_PORT, DEFAULT_VERIFIER_PORT,
};
use clap::Parser;

/// Run the registrar and verifier until killed.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Attestation policy JSON file.
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, default_value_t = DEFAULT_REGISTRAR_PORT)]
    registrar_port: u16,
    #[arg(long, default_value_t = DEFAULT_VERIFIER_PORT)]
    verifier_port: u16,
    /// Seed for challenge secrets and nonces.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let policy = match AttestationPolicy::load(&args.policy) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot load policy {}: {e}", args.policy.display());
            return ExitCode::from(1);
        }
    };
    let mut config = ServiceConfig::new(policy);
    config.registrar_addr = SocketAddr::new(args.bind, args.registrar_port);
    config.verifier_addr = SocketAddr::new(args.bind, args.verifier_port);
    config.seed = args.seed;
    match AttestationService::start(config) {
        Ok(service) => {
            println!(
                "registrar {} verifier {}",
                service.registrar_addr(),
                service.verifier_addr()
            );
            service.wait();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cannot start service: {e}");
            ExitCode::from(3)
        }
    }
}
