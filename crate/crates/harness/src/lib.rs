//! Scenario files, Monte Carlo sweeps and oracle verification behind the
//! `pass-tradeoff` command.

pub mod config;
pub mod run;
pub mod verify;

pub use config::{ConfigError, Mode, Scenario, ScenarioConfig};
pub use run::{compute, run_scenario, solve_drop, write_outputs, RunResults, SweepRow};
pub use verify::{run_verify, VerifyLevel};
