use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use thzsim::config::Config;
use thzsim::scenario::ScenarioKind;
use thzsim_cli::commands::{execute, Command, Run};
use thzsim_cli::CONFIG_ENV;

/// Sub-THz indoor channel simulator and analysis chain.
#[derive(Parser)]
#[command(name = "thzsim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Scenario name (meeting_room, cubicle_area, hallway, nlos) or `all`.
    #[arg(long, global = true, default_value = "all")]
    scenario: String,
    /// Monte-Carlo drops or sounded links.
    #[arg(long, global = true)]
    drops: Option<u64>,
    /// Master seed; falls back to the config's seed, then 1.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tx-Rx distance in metres, along the scenario's typical direction.
    #[arg(long, global = true)]
    distance: Option<f64>,
    /// TOML config with seed, drop count and preset overrides.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Evaluate the acceptance tolerances that apply to this command and
    /// exit with status 1 if any is violated.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate one channel realization per scenario.
    Generate,
    /// Generate and sound a full directional scan.
    Sound,
    /// Cluster and analyse sweep files written by `sound`.
    Analyze { inputs: Vec<PathBuf> },
    /// Fit CI path-loss models to sounded links.
    FitPl,
    /// Calibrate the free model parameters; writes calibrated.toml.
    Calibrate,
    /// Monte-Carlo drops with per-drop records and summaries.
    Montecarlo,
    /// Path-loss exponent table and parameter summary.
    Tables,
    /// Run every acceptance check.
    Check,
}

fn run(cli: Cli) -> Result<bool> {
    let scenarios = if cli.scenario.eq_ignore_ascii_case("all") {
        ScenarioKind::ALL.to_vec()
    } else {
        cli.scenario.split(',').map(|s| s.trim().parse()).collect::<thzsim::Result<_>>()?
    };
    let config = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?,
        None => Config::default(),
    };
    let cmd = match cli.cmd {
        Cmd::Generate => Command::Generate,
        Cmd::Sound => Command::Sound,
        Cmd::Analyze { inputs } => Command::Analyze { inputs },
        Cmd::FitPl => Command::FitPl,
        Cmd::Calibrate => Command::Calibrate,
        Cmd::Montecarlo => Command::Montecarlo,
        Cmd::Tables => Command::Tables,
        Cmd::Check => Command::Check,
    };
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let r = Run {
        scenarios,
        config,
        config_path: cli.config,
        seed: cli.seed,
        drops: cli.drops,
        distance: cli.distance,
        jobs,
        out: cli.out,
        check: cli.check || cmd == Command::Check,
    };
    let outcome = execute(&cmd, &r)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    if cmd != Command::Check {
        for l in &outcome.checks {
            eprintln!("{l}");
        }
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
