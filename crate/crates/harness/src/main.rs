use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pass_harness::config::BetaSection;
use pass_harness::{run_scenario, run_verify, ScenarioConfig, VerifyLevel};

const EXIT_CONFIG: u8 = 2;
const EXIT_DROP_FAILED: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "pass-tradeoff", version, about = "SE/EE tradeoff sweeps for pinching-antenna systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario as configured.
    Solve(RunArgs),
    /// Run the scenario as a full beta sweep (default step 0.05).
    Pareto(RunArgs),
    /// Cross-check the solvers against the brute-force oracles.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: VerifyLevel,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the reports to DIR/verify.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Uniform,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    beta_step: Option<f64>,
    /// Taylor order of the SCA expansion.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: Option<u8>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self, pareto: bool) -> Result<ScenarioConfig, pass_harness::ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.users.seed = seed;
        }
        if let Some(drops) = self.drops {
            cfg.users.drops = drops;
        }
        if let Some(step) = self.beta_step {
            cfg.beta = BetaSection::sweep(step);
        } else if pareto {
            cfg.beta = BetaSection::default();
        }
        if let Some(order) = self.order {
            cfg.algorithm.order = order;
        }
        if self.baseline.is_some() {
            cfg.algorithm.baseline_uniform = true;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn run(args: &RunArgs, pareto: bool) -> ExitCode {
    let scenario = match args.load(pareto).and_then(|c| c.resolve()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_scenario(&scenario) {
        Ok(results) if results.failures.is_empty() => {
            println!("{} drops written to {}", results.drops.len(), scenario.out.display());
            ExitCode::SUCCESS
        }
        Ok(results) => {
            eprintln!("{} of {} drops failed; see manifest.json", results.failures.len(), scenario.drops);
            ExitCode::from(EXIT_DROP_FAILED)
        }
        Err(e) => {
            eprintln!("cannot write outputs: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(args) => run(args, false),
        Command::Pareto(args) => run(args, true),
        Command::Verify { level, seed, out } => {
            let reports = run_verify(*level, *seed);
            for r in &reports {
                println!("{r}");
            }
            if let Some(dir) = out {
                let written = std::fs::create_dir_all(dir)
                    .map_err(anyhow::Error::from)
                    .and_then(|_| Ok(serde_json::to_string_pretty(&reports)?))
                    .and_then(|json| Ok(std::fs::write(dir.join("verify.json"), json)?));
                if let Err(e) = written {
                    eprintln!("cannot write verify.json: {e:#}");
                }
            }
            if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            }
        }
    }
}
