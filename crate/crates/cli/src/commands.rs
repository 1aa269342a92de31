//! Subcommand implementations. Each writes its files plus `manifest.json`
//! into the output directory and returns what it wrote, along with any
//! acceptance lines it evaluated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use thzsim::analysis::{DbscanParams, Pdap};
use thzsim::calibrate::{calibrate, CalibrationOptions, Targets};
use thzsim::config::{Config, ScenarioSetup};
use thzsim::export::{realization_to_csv, realization_to_json};
use thzsim::montecarlo::{run_drops, summarize, McSummary};
use thzsim::pathloss;
use thzsim::pipeline::{analyze_sweep, fit_path_loss, sweep_path_loss, PathLossFit, SweepAnalysis};
use thzsim::raytracer::{paths_to_csv, trace, RoomGeometry};
use thzsim::scenario::{validation_targets, ScenarioKind};
use thzsim::sounding::{full_scan, read_sweep, write_sweep};
use thzsim::stochastic::{generate, ChannelRealization, GenerateOptions};

use crate::checks::{self, CheckLine, CheckOptions, HALLWAY_BEST_PLE, LOG_SPREAD_TOL, MC_RUNTIME_LIMIT_S};
use crate::manifest::{config_hash, Manifest, OutDir};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MC_DROPS: u64 = 1000;
pub const DEFAULT_PL_DROPS: u64 = 40;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Generate,
    Sound,
    Analyze { inputs: Vec<PathBuf> },
    FitPl,
    Calibrate,
    Montecarlo,
    Tables,
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Sound => "sound",
            Command::Analyze { .. } => "analyze",
            Command::FitPl => "fit-pl",
            Command::Calibrate => "calibrate",
            Command::Montecarlo => "montecarlo",
            Command::Tables => "tables",
            Command::Check => "check",
        }
    }
}

/// Resolved command-line options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Run {
    pub scenarios: Vec<ScenarioKind>,
    pub config: Config,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub drops: Option<u64>,
    pub distance: Option<f64>,
    pub jobs: usize,
    pub out: PathBuf,
    pub check: bool,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<CheckLine>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl Run {
    pub fn seed(&self) -> u64 {
        self.seed.or(self.config.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn drops(&self, default: u64) -> u64 {
        self.drops.or(self.config.drops.map(|d| d as u64)).unwrap_or(default)
    }

    fn setups(&self) -> Result<Vec<ScenarioSetup>> {
        self.scenarios.iter().map(|&k| Ok(self.config.resolve(k)?)).collect()
    }

    fn manifest(&self, cmd: &Command, setups: &[ScenarioSetup], drops: Option<u64>) -> Result<Manifest> {
        Ok(Manifest {
            tool: "thzsim",
            version: env!("CARGO_PKG_VERSION"),
            command: cmd.name().to_string(),
            scenarios: self.scenarios.iter().map(|k| k.to_string()).collect(),
            seed: self.seed(),
            drops,
            distance: self.distance,
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            config_hash: config_hash(setups)?,
            outputs: Vec::new(),
        })
    }

    fn geometry(&self, setup: &ScenarioSetup) -> Result<RoomGeometry> {
        let rx = match self.distance {
            Some(d) => setup.layout.rx_at_distance(d)?,
            None => setup.layout.typical_rx,
        };
        Ok(setup.layout.geometry_at(rx))
    }

    fn realization(&self, setup: &ScenarioSetup) -> Result<(RoomGeometry, ChannelRealization)> {
        let geom = self.geometry(setup)?;
        let opts = GenerateOptions::new(setup.params.kind, &setup.system);
        let real = generate(&setup.params, &geom, &opts, self.seed())?;
        Ok((geom, real))
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

pub fn execute(cmd: &Command, run: &Run) -> Result<Outcome> {
    match cmd {
        Command::Generate => generate_cmd(cmd, run),
        Command::Sound => sound_cmd(cmd, run),
        Command::Analyze { inputs } => analyze_cmd(cmd, run, inputs),
        Command::FitPl => fit_pl_cmd(cmd, run),
        Command::Calibrate => calibrate_cmd(cmd, run),
        Command::Montecarlo => montecarlo_cmd(cmd, run),
        Command::Tables => tables_cmd(cmd, run),
        Command::Check => check_cmd(cmd, run),
    }
}

fn generate_cmd(cmd: &Command, run: &Run) -> Result<Outcome> {
    let setups = run.setups()?;
    let mut out = OutDir::create(&run.out)?;
    for setup in &setups {
        let kind = setup.params.kind;
        let (geom, real) = run.realization(setup)?;
        out.write(&format!("{kind}_realization.json"), realization_to_json(&real)? + "\n")?;
        out.write(&format!("{kind}_subpaths.csv"), realization_to_csv(&real))?;
        if setup.params.deterministic {
            let paths = trace(&geom, geom.max_reflection_order)?;
            out.write(&format!("{kind}_paths.csv"), paths_to_csv(&paths, setup.system.f_ref))?;
        }
    }
    let files = out.finish(run.manifest(cmd, &setups, None)?)?;
    Ok(Outcome { files, checks: Vec::new() })
}

#[derive(Serialize)]
struct LinkLoss {
    scenario: ScenarioKind,
    distance: f64,
    pl_best_db: f64,
    pl_omni_db: f64,
}

fn sound_cmd(cmd: &Command, run: &Run) -> Result<Outcome> {
    let setups = run.setups()?;
    let mut out = OutDir::create(&run.out)?;
    for setup in &setups {
        let kind = setup.params.kind;
        let (_, real) = run.realization(setup)?;
        let sweep = full_scan(&real, &setup.system, run.seed())?;
        out.write(&format!("{kind}_realization.json"), realization_to_json(&real)? + "\n")?;
        out.write(&format!("{kind}_sweep.csv"), write_sweep(&sweep)?)?;
        out.write(&format!("{kind}_pdap.csv"), Pdap::from_sweep(&sweep).to_csv())?;
        let (best, omni) = sweep_path_loss(&sweep, kind.is_los())?;
        let loss = LinkLoss {
            scenario: kind,
            distance: real.distance,
            pl_best_db: best,
            pl_omni_db: omni,
        };
        out.write(&format!("{kind}_pathloss.json"), json(&loss)?)?;
    }
    let files = out.finish(run.manifest(cmd, &setups, None)?)?;
    Ok(Outcome { files, checks: Vec::new() })
}

#[derive(Serialize)]
struct SweepReport {
    input: String,
    pl_best_los_db: f64,
    pl_best_nlos_db: f64,
    pl_omni_db: f64,
    analysis: SweepAnalysis,
}

fn analyze_cmd(cmd: &Command, run: &Run, inputs: &[PathBuf]) -> Result<Outcome> {
    if inputs.is_empty() {
        bail!("analyze needs at least one sweep file");
    }
    let mut out = OutDir::create(&run.out)?;
    for input in inputs {
        let f = std::fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
        let sweep = read_sweep(std::io::BufReader::new(f)).with_context(|| format!("reading {}", input.display()))?;
        let w = sweep.system.window_w;
        let (set, analysis) = analyze_sweep(&sweep, DbscanParams::default(), 1.0)?;
        let stem = stem(input);
        let report = SweepReport {
            input: input.display().to_string(),
            pl_best_los_db: pathloss::pl_best_los(&sweep)?,
            pl_best_nlos_db: pathloss::pl_best_nlos(&sweep, w)?,
            pl_omni_db: pathloss::pl_omni(&sweep, w)?,
            analysis,
        };
        out.write(&format!("{stem}_analysis.json"), json(&report)?)?;
        let mut csv = String::from("toa_ns,aoa_az_deg,aoa_el_deg,power_db,cluster\n");
        for (m, l) in set.mpcs.iter().zip(&set.labels) {
            let _ = writeln!(csv, "{},{},{},{},{}", m.toa, m.aoa_az, m.aoa_el, m.power_db, l);
        }
        out.write(&format!("{stem}_mpcs.csv"), csv)?;
    }
    let setups = run.setups()?;
    let files = out.finish(run.manifest(cmd, &setups, None)?)?;
    Ok(Outcome { files, checks: Vec::new() })
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sweep".into())
}

fn pathloss_csv(fit: &PathLossFit) -> String {
    let mut s = String::from("distance_m,pl_best_db,pl_omni_db\n");
    for p in &fit.points {
        let _ = writeln!(s, "{},{},{}", p.distance, p.pl_best_db, p.pl_omni_db);
    }
    s
}

fn pl_checks(fit: &PathLossFit) -> Vec<CheckLine> {
    let mut v = vec![CheckLine {
        criterion: 3,
        name: format!("{} omni PLE <= best PLE", fit.scenario),
        value: format!("{:.4} vs {:.4}", fit.omni.ple, fit.best.ple),
        bound: "omni <= best".into(),
        pass: fit.omni.ple <= fit.best.ple,
    }];
    if fit.scenario == ScenarioKind::Hallway {
        let (lo, hi) = HALLWAY_BEST_PLE;
        v.push(CheckLine {
            criterion: 3,
            name: "hallway best-direction PLE".into(),
            value: format!("{:.4}", fit.best.ple),
            bound: format!("[{lo}, {hi}]"),
            pass: fit.best.ple >= lo && fit.best.ple <= hi,
        });
    }
    v
}

fn fit_pl_cmd(cmd: &Command, run: &Run) -> Result<Outcome> {
    let setups = run.setups()?;
    let drops = run.drops(DEFAULT_PL_DROPS);
    let mut out = OutDir::create(&run.out)?;
    let mut checks = Vec::new();
    for setup in &setups {
        let kind = setup.params.kind;
        let fit = fit_path_loss(setup, drops, run.seed())?;
        out.write(&format!("{kind}_pathloss.json"), json(&fit)?)?;
        out.write(&format!("{kind}_pathloss.csv"), pathloss_csv(&fit))?;
        if run.check {
            checks.extend(pl_checks(&fit));
        }
    }
    let files = out.finish(run.manifest(cmd, &setups, Some(drops))?)?;
    Ok(Outcome { files, checks })
}

#[derive(Serialize)]
struct CalibrationReport {
    scenario: ScenarioKind,
    targets: Targets,
    achieved: Targets,
    converged: bool,
    evaluations: usize,
}

fn calibrate_cmd(cmd: &Command, run: &Run) -> Result<Outcome> {
    let setups = run.setups()?;
    let drops = run.drops(DEFAULT_MC_DROPS);
    let mut out = OutDir::create(&run.out)?;
    let mut config = run.config.clone();
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for setup in &setups {
        let kind = setup.params.kind;
        let (ds, asa) = validation_targets(kind);
        let targets = Targets {
            mu_log_ds: ds,
            mu_log_asa: asa,
        };
        let opts = CalibrationOptions {
            drops,
            seed: run.seed(),
            jobs: run.jobs,
            ..CalibrationOptions::default()
        };
        let r = calibrate(setup, targets, &opts)?;
        config.set_params(&r.params)?;
        if run.check {
            checks.push(spread_line(kind, "mean ln DS", r.achieved.mu_log_ds, ds));
            checks.push(spread_line(kind, "mean ln ASA", r.achieved.mu_log_asa, asa));
        }
        reports.push(CalibrationReport {
            scenario: kind,
            targets,
            achieved: r.achieved,
            converged: r.converged,
            evaluations: r.evaluations,
        });
    }
    out.write("calibrated.toml", config.to_toml()?)?;
    out.write("calibration.json", json(&reports)?)?;
    let files = out.finish(run.manifest(cmd, &setups, Some(drops))?)?;
    Ok(Outcome { files, checks })
}

fn spread_line(kind: ScenarioKind, what: &str, value: f64, target: f64) -> CheckLine {
    CheckLine {
        criterion: 1,
        name: format!("{kind} {what}"),
        value: format!("{value:.4}"),
        bound: format!("{target} +- {LOG_SPREAD_TOL}"),
        pass: (value - target).abs() <= LOG_SPREAD_TOL,
    }
}

fn summary_csv(rows: &[McSummary]) -> String {
    let mut s = String::from(
        "scenario,drops,valid,mean_ln_ds,std_ln_ds,mean_ln_asa,std_ln_asa,mean_n_clusters,mean_gap_ns,cnl_slope,cnl_corr\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for m in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.scenario,
            m.drops,
            m.valid,
            m.mean_ln_ds,
            m.std_ln_ds,
            m.mean_ln_asa,
            m.std_ln_asa,
            m.mean_n_clusters,
            m.mean_gap_ns,
            opt(m.cnl_slope),
            opt(m.cnl_corr)
        );
    }
    s
}

fn montecarlo_cmd(cmd: &Command, run: &Run) -> Result<Outcome> {
    let setups = run.setups()?;
    let drops = run.drops(DEFAULT_MC_DROPS);
    let mut out = OutDir::create(&run.out)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for setup in &setups {
        let kind = setup.params.kind;
        let opts = GenerateOptions::new(kind, &setup.system);
        let t = Instant::now();
        let results = run_drops(setup, &opts, drops, run.seed(), run.jobs)?;
        let summary = summarize(kind, &results)?;
        let secs = t.elapsed().as_secs_f64();
        let mut nd = String::new();
        for r in &results {
            nd.push_str(&serde_json::to_string(r)?);
            nd.push('\n');
        }
        out.write(&format!("{kind}_drops.ndjson"), nd)?;
        out.write(&format!("{kind}_summary.json"), json(&summary)?)?;
        if run.check {
            let (ds, asa) = validation_targets(kind);
            checks.push(spread_line(kind, "mean ln DS", summary.mean_ln_ds, ds));
            checks.push(spread_line(kind, "mean ln ASA", summary.mean_ln_asa, asa));
            checks.push(CheckLine {
                criterion: 1,
                name: format!("{kind} {drops}-drop runtime"),
                value: format!("{secs:.2} s"),
                bound: format!("< {MC_RUNTIME_LIMIT_S} s"),
                pass: secs < MC_RUNTIME_LIMIT_S,
            });
        }
        rows.push(summary);
    }
    out.write("summary.csv", summary_csv(&rows))?;
    let files = out.finish(run.manifest(cmd, &setups, Some(drops))?)?;
    Ok(Outcome { files, checks })
}

fn tables_cmd(cmd: &Command, run: &Run) -> Result<Outcome> {
    let setups = run.setups()?;
    let drops = run.drops(DEFAULT_PL_DROPS);
    let mut out = OutDir::create(&run.out)?;
    let mut checks = Vec::new();
    let mut ple = String::from(
        "scenario,ple_best_fit,ple_omni_fit,sigma_best_db,sigma_omni_db,ple_best_model,ple_omni_model,links\n",
    );
    for setup in &setups {
        let fit = fit_path_loss(setup, drops, run.seed())?;
        let _ = writeln!(
            ple,
            "{},{:.4},{:.4},{:.3},{:.3},{},{},{}",
            setup.params.kind,
            fit.best.ple,
            fit.omni.ple,
            fit.best.sigma_sf,
            fit.omni.sigma_sf,
            setup.params.ple_best,
            setup.params.ple_omni,
            fit.points.len()
        );
        if run.check {
            checks.extend(pl_checks(&fit));
        }
    }
    out.write("ple_table.csv", ple)?;
    out.write("parameters.csv", parameters_csv(&setups)?)?;
    let files = out.finish(run.manifest(cmd, &setups, Some(drops))?)?;
    Ok(Outcome { files, checks })
}

/// One row per scenario, one column per scalar model parameter.
fn parameters_csv(setups: &[ScenarioSetup]) -> Result<String> {
    let mut header: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for s in setups {
        let v = serde_json::to_value(&s.params)?;
        let obj = v.as_object().context("parameters serialise to an object")?;
        if header.is_empty() {
            header = obj.keys().cloned().collect();
        }
        rows.push(
            header
                .iter()
                .map(|k| match &obj[k] {
                    serde_json::Value::String(x) => x.clone(),
                    other => other.to_string(),
                })
                .collect(),
        );
    }
    let mut csv = header.join(",") + "\n";
    for r in rows {
        csv += &(r.join(",") + "\n");
    }
    Ok(csv)
}

fn check_cmd(cmd: &Command, run: &Run) -> Result<Outcome> {
    let setups = run.setups()?;
    let mut o = CheckOptions::new(run.config.clone(), run.seed(), run.jobs);
    o.drops = run.drops(o.drops);
    let mut out = OutDir::create(&run.out)?;
    let lines = checks::run_all(&o, |l| eprintln!("{l}"))?;
    out.write("check.json", json(&lines)?)?;
    let files = out.finish(run.manifest(cmd, &setups, Some(o.drops))?)?;
    Ok(Outcome { files, checks: lines })
}
