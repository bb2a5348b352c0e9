//! Command-line entry point. Exit status: 0 when every hard check passed,
//! 1 when any failed or a solver aborted, 2 on configuration errors.

use clap::{Args, Parser, Subcommand};
use shortpulse_cli::config::{parse_config, Scenario};
use shortpulse_cli::runner::run_scenario;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "shortpulse", version, about = "Short-pulse approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Path to the TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's out_dir, then "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's perturbation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker pool for per-epsilon runs.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the pulse equation and report norm trajectories.
    SimulateSp(Common),
    /// Evolve the Klein-Gordon equation and report norm trajectories.
    SimulateKg(Common),
    /// Co-evolve both equations at one epsilon and score the error energy.
    Justify(Common),
    /// Run the epsilon sweep and fit the error scaling laws.
    Converge(Common),
    /// Check the energy-balance identity under stride refinement.
    Balance(Common),
}

impl Command {
    fn split(self) -> (Scenario, Common) {
        match self {
            Command::SimulateSp(c) => (Scenario::SimulateSp, c),
            Command::SimulateKg(c) => (Scenario::SimulateKg, c),
            Command::Justify(c) => (Scenario::Justify, c),
            Command::Converge(c) => (Scenario::Converge, c),
            Command::Balance(c) => (Scenario::Balance, c),
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let (scenario, common) = Cli::parse().command.split();

    if let Some(threads) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    let mut cfg = match parse_config(&common.config, scenario) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match run_scenario(&cfg, &out) {
        Ok(manifest) => {
            for line in summary_lines(&manifest) {
                println!("{line}");
            }
            if manifest.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn summary_lines(manifest: &shortpulse_cli::manifest::RunManifest) -> Vec<String> {
    let json = serde_json::to_value(manifest).expect("manifest serializes");
    let mut lines = vec![format!(
        "{}: {}",
        manifest.scenario,
        if manifest.passed { "PASS" } else { "FAIL" }
    )];
    if let Some(checks) = json.get("checks").and_then(|c| c.as_array()) {
        for check in checks {
            let name = check["name"].as_str().unwrap_or("?");
            let passed = check["passed"].as_bool().unwrap_or(false);
            let detail = check["detail"].as_str().unwrap_or("");
            lines.push(format!(
                "  [{}] {name}: {detail}",
                if passed { "pass" } else { "FAIL" }
            ));
        }
    }
    lines
}
