// SPDX-License-Identifier: Apache-2.0

//! End-to-end scenarios over the simulated confidential VM stack.

pub mod bench;
pub mod config;
pub mod fuzz;
pub mod harness;
pub mod report;
pub mod scenarios;

pub use config::{derive_policy, ConfigError, ExternalService, ScenarioConfig};
pub use report::{ScenarioError, ScenarioReport, EXIT_CONTRACT, EXIT_OK, EXIT_TRANSPORT, EXIT_UNTRUSTED};
pub use scenarios::{run_attack, run_fde, run_honest, Attack};
