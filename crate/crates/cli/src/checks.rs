//! Acceptance checks. Each check yields one pass/fail line; tolerances are
//! fixed here and never loosened at run time.

use std::fmt;
use std::time::Instant;

use anyhow::Result;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thzsim::analysis::{
    cir_to_ctf, cnl_regression, cnl_within_slope, ctf_to_cir, dbscan_mcd, ks_exponential, rms_asa, DbscanParams,
    CnlPoint, Mpc, MpcSet,
};
use thzsim::calibrate::{calibrate, CalibrationOptions, Targets};
use thzsim::config::{Config, ScenarioSetup};
use thzsim::montecarlo::monte_carlo;
use thzsim::pathloss::{ci_eval, ci_fit, CiModel};
use thzsim::pipeline::{fit_path_loss, free_space_fit, rl_round_trip};
use thzsim::raytracer::{trace, RoomGeometry, Surface};
use thzsim::rng::rng_from_seed;
use thzsim::scenario::{validation_targets, ScenarioKind, SystemParams};
use thzsim::sounding::{synthesize_ctf, AntennaPattern};
use thzsim::stochastic::{cluster_summaries, generate, sample_cluster_delays, sample_num_clusters, GenerateOptions};

pub const LOG_SPREAD_TOL: f64 = 0.07;
pub const MC_RUNTIME_LIMIT_S: f64 = 60.0;
pub const COUNT_MEAN_REL_TOL: f64 = 0.02;
pub const GAP_MEAN_REL_TOL: f64 = 0.02;
pub const KS_ALPHA: f64 = 0.01;
pub const STAT_DRAWS: usize = 100_000;
pub const CI_EXACT_TOL: f64 = 1e-9;
pub const CI_NOISY_TOL: f64 = 0.05;
pub const CI_NOISY_SIGMA_DB: f64 = 4.0;
pub const CI_NOISY_SAMPLES: usize = 1000;
pub const FREE_SPACE_TOL: f64 = 0.02;
pub const HALLWAY_BEST_PLE: (f64, f64) = (1.8, 2.2);
pub const RL_MU_LN: (f64, f64) = (2.71, 0.15);
pub const RL_SIGMA_LN: (f64, f64) = (0.50, 0.10);
pub const CNL_SLOPE_REL_TOL: f64 = 0.01;
pub const MIRROR_TOL_M: f64 = 1e-9;
pub const ROUND_TRIP_TOL: f64 = 1e-9;
pub const ASA_TOL_DEG: f64 = 1e-9;

/// One acceptance line.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub criterion: u8,
    pub name: String,
    pub value: String,
    pub bound: String,
    pub pass: bool,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] C{} {}: {} (want {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.value,
            self.bound
        )
    }
}

fn line(criterion: u8, name: impl Into<String>, value: impl Into<String>, bound: impl Into<String>, pass: bool) -> CheckLine {
    CheckLine {
        criterion,
        name: name.into(),
        value: value.into(),
        bound: bound.into(),
        pass,
    }
}

fn within(criterion: u8, name: impl Into<String>, value: f64, target: f64, tol: f64) -> CheckLine {
    line(
        criterion,
        name,
        format!("{value:.4}"),
        format!("{target} +- {tol}"),
        (value - target).abs() <= tol,
    )
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub config: Config,
    pub seed: u64,
    /// Monte-Carlo drops for calibration, validation and CNL correlation.
    pub drops: u64,
    /// Sounded links per path-loss fit.
    pub pl_drops: u64,
    /// Links in the reflection-loss round trip.
    pub rl_drops: u64,
    pub jobs: usize,
}

impl CheckOptions {
    pub fn new(config: Config, seed: u64, jobs: usize) -> Self {
        CheckOptions {
            config,
            seed,
            drops: 1000,
            pl_drops: 30,
            rl_drops: 100,
            jobs,
        }
    }
}

/// Calibrate each scenario, then validate on fresh drops.
pub fn hybrid_validation(o: &CheckOptions) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    for kind in ScenarioKind::ALL {
        let setup = o.config.resolve(kind)?;
        let (ds, asa) = validation_targets(kind);
        let targets = Targets {
            mu_log_ds: ds,
            mu_log_asa: asa,
        };
        let cal = calibrate(
            &setup,
            targets,
            &CalibrationOptions {
                drops: o.drops,
                seed: o.seed,
                jobs: o.jobs,
                ..CalibrationOptions::default()
            },
        )?;
        let tuned = ScenarioSetup {
            params: cal.params,
            ..setup
        };
        let t = Instant::now();
        let mc = monte_carlo(&tuned, o.drops, o.seed.wrapping_add(1), o.jobs)?;
        let secs = t.elapsed().as_secs_f64();
        out.push(within(1, format!("{kind} mean ln DS"), mc.mean_ln_ds, ds, LOG_SPREAD_TOL));
        out.push(within(1, format!("{kind} mean ln ASA"), mc.mean_ln_asa, asa, LOG_SPREAD_TOL));
        out.push(line(
            1,
            format!("{kind} {}-drop runtime", o.drops),
            format!("{secs:.2} s"),
            format!("< {MC_RUNTIME_LIMIT_S} s"),
            secs < MC_RUNTIME_LIMIT_S,
        ));
    }
    Ok(out)
}

/// Cluster-count and inter-cluster-gap samplers.
pub fn cluster_statistics(o: &CheckOptions) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    for (kind, lambda) in ScenarioKind::ALL.into_iter().zip([5.94, 3.79, 2.57, 2.10]) {
        let p = o.config.resolve(kind)?.params;
        let mut rng = rng_from_seed(o.seed ^ 0xc0);
        let mut sum = 0usize;
        for _ in 0..STAT_DRAWS {
            sum += sample_num_clusters(p.lambda_n, false, &mut rng)?;
        }
        let mean = sum as f64 / STAT_DRAWS as f64;
        out.push(line(
            2,
            format!("{kind} cluster-count mean"),
            format!("{mean:.4}"),
            format!("{lambda} +- {}%", COUNT_MEAN_REL_TOL * 100.0),
            (mean / lambda - 1.0).abs() <= COUNT_MEAN_REL_TOL,
        ));
    }
    for (kind, mu) in ScenarioKind::ALL.into_iter().zip([11.89, 12.68, 40.68, 18.48]) {
        let p = o.config.resolve(kind)?.params;
        let mut rng = rng_from_seed(o.seed ^ 0x9a);
        let mut gaps = Vec::with_capacity(STAT_DRAWS);
        while gaps.len() < STAT_DRAWS {
            let t = sample_cluster_delays(2, p.r_tau, p.sigma_tau(), 0.0, &mut rng);
            gaps.push(t[1] - t[0]);
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        out.push(line(
            2,
            format!("{kind} gap mean"),
            format!("{mean:.4} ns"),
            format!("{mu} ns +- {}%", GAP_MEAN_REL_TOL * 100.0),
            (mean / mu - 1.0).abs() <= GAP_MEAN_REL_TOL,
        ));
        let (_, pv) = ks_exponential(&gaps, mu)?;
        out.push(line(
            2,
            format!("{kind} gap KS vs Exp({mu})"),
            format!("p = {pv:.4}"),
            format!("p > {KS_ALPHA}"),
            pv > KS_ALPHA,
        ));
    }
    Ok(out)
}

/// CI fitting on synthetic data and on sounded links.
pub fn path_loss(o: &CheckOptions) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    let truth = CiModel::new(2.13, 205.0);
    let exact: Vec<(f64, f64)> = [1.5, 2.0, 3.7, 6.0, 11.0, 25.0]
        .iter()
        .map(|&d| Ok((d, ci_eval(&truth, d, 0.0)?)))
        .collect::<thzsim::Result<_>>()?;
    let f = ci_fit(&exact, 205.0)?;
    out.push(within(3, "ci_fit noiseless PLE", f.ple, 2.13, CI_EXACT_TOL));

    let mut rng = rng_from_seed(o.seed ^ 0x51);
    let sf = Normal::new(0.0, CI_NOISY_SIGMA_DB)?;
    let noisy: Vec<(f64, f64)> = (0..CI_NOISY_SAMPLES)
        .map(|_| {
            let d = rng.random_range(2.0..30.0);
            Ok((d, ci_eval(&truth, d, sf.sample(&mut rng))?))
        })
        .collect::<thzsim::Result<_>>()?;
    let f = ci_fit(&noisy, 205.0)?;
    out.push(within(3, "ci_fit PLE with 4 dB shadowing", f.ple, 2.13, CI_NOISY_TOL));

    let sys = SystemParams::preset(ScenarioKind::MeetingRoom);
    let fs = free_space_fit(&sys, &[1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 20.0, 25.0], o.seed)?;
    out.push(within(3, "free-space sounded PLE", fs.ple, 2.0, FREE_SPACE_TOL));

    for kind in ScenarioKind::ALL {
        let fit = fit_path_loss(&o.config.resolve(kind)?, o.pl_drops, o.seed)?;
        if kind == ScenarioKind::Hallway {
            let (lo, hi) = HALLWAY_BEST_PLE;
            out.push(line(
                3,
                "hallway best-direction PLE",
                format!("{:.4}", fit.best.ple),
                format!("[{lo}, {hi}]"),
                fit.best.ple >= lo && fit.best.ple <= hi,
            ));
        }
        out.push(line(
            3,
            format!("{kind} omni PLE <= best PLE"),
            format!("{:.4} vs {:.4}", fit.omni.ple, fit.best.ple),
            "omni <= best",
            fit.omni.ple <= fit.best.ple,
        ));
    }
    Ok(out)
}

pub fn reflection_loss(o: &CheckOptions) -> Result<Vec<CheckLine>> {
    let r = rl_round_trip(o.rl_drops, o.seed)?;
    Ok(vec![
        within(4, "RL round-trip mu_ln", r.mu_ln, RL_MU_LN.0, RL_MU_LN.1),
        within(4, "RL round-trip sigma_ln", r.sigma_ln, RL_SIGMA_LN.0, RL_SIGMA_LN.1),
    ])
}

/// CNL slope without shadowing, and its correlation with shadowing on.
pub fn cluster_loss(o: &CheckOptions) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    for kind in ScenarioKind::ALL {
        let setup = o.config.resolve(kind)?;
        let mut p = setup.params.clone();
        p.xi_db = 0.0;
        let channels = model_cnl_channels(&setup, &p, o.seed, 300)?;
        let slope = cnl_within_slope(&channels)?;
        let want = 10.0 * (p.r_tau - 1.0) / (p.r_tau * p.sigma_tau() * std::f64::consts::LN_10);
        out.push(line(
            5,
            format!("{kind} CNL slope (xi = 0)"),
            format!("{slope:.5} dB/ns"),
            format!("{want:.5} +- {}%", CNL_SLOPE_REL_TOL * 100.0),
            (slope / want - 1.0).abs() <= CNL_SLOPE_REL_TOL,
        ));
    }
    for kind in ScenarioKind::ALL {
        let setup = o.config.resolve(kind)?;
        let mut p = setup.params.clone();
        if p.xi_db <= 0.0 {
            p.xi_db = thzsim::scenario::DEFAULT_XI_DB;
        }
        let channels = model_cnl_channels(&setup, &p, o.seed, o.drops)?;
        let pooled: Vec<_> = channels.into_iter().flatten().collect();
        let corr = cnl_regression(&pooled)?.corr;
        out.push(line(
            5,
            format!("{kind} CNL correlation (xi = {} dB)", p.xi_db),
            format!("{corr:.4}"),
            "> 0",
            corr > 0.0,
        ));
    }
    Ok(out)
}

/// CNL points of the statistical clusters of `n` channels at the typical Rx.
fn model_cnl_channels(setup: &ScenarioSetup, p: &thzsim::scenario::ScenarioParams, seed: u64, n: u64) -> Result<Vec<Vec<CnlPoint>>> {
    let mut p = p.clone();
    p.deterministic = false;
    let geom = setup.layout.geometry_at(setup.layout.typical_rx);
    let opts = GenerateOptions::new(p.kind, &setup.system);
    let mut channels = Vec::new();
    for i in 0..n {
        let cl = cluster_summaries(&generate(&p, &geom, &opts, seed.wrapping_add(i))?);
        if cl.len() >= 2 {
            channels.push(thzsim::analysis::cnl_points(&cl)?);
        }
    }
    Ok(channels)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Property oracles.
pub fn equivalences(o: &CheckOptions) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    let mut rng = rng_from_seed(o.seed ^ 0x6e);

    // first-order image paths vs the closed-form mirror
    let dims = [10.15, 7.9, 5.8];
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut pt = || [0, 1, 2].map(|k| rng.random_range(0.05..0.95) * dims[k]);
        let (tx, rx) = (pt(), pt());
        let g = RoomGeometry {
            length: dims[0],
            width: dims[1],
            height: dims[2],
            tx_pos: tx,
            rx_pos: rx,
            active_surfaces: Surface::ALL.to_vec(),
            max_reflection_order: 1,
        };
        let paths = trace(&g, 1)?;
        if paths.iter().filter(|p| p.reflection_order == 1).count() != 6 {
            worst = f64::INFINITY;
        }
        for p in paths.iter().filter(|p| p.reflection_order == 1) {
            let s = p.surfaces_hit[0];
            let (axis, plane) = (s.axis(), s.offset(dims));
            let mut img = tx;
            img[axis] = 2.0 * plane - tx[axis];
            worst = worst.max((p.length - dist(img, rx)).abs());
            let t = (plane - rx[axis]) / (img[axis] - rx[axis]);
            for j in 0..3 {
                worst = worst.max((p.points[0][j] - (rx[j] + t * (img[j] - rx[j]))).abs());
            }
        }
    }
    out.push(line(
        6,
        "order-1 image paths vs closed-form mirror",
        format!("max err {worst:.2e} m"),
        format!("<= {MIRROR_TOL_M:e} m"),
        worst <= MIRROR_TOL_M,
    ));

    // ctf -> cir -> ctf
    let mut worst: f64 = 0.0;
    for n in [1usize, 2, 7, 64, 801, 1000] {
        let ctf: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let back = cir_to_ctf(&ctf_to_cir(&ctf));
        let scale = ctf.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in ctf.iter().zip(&back) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    out.push(line(
        6,
        "ctf_to_cir round trip",
        format!("max rel err {worst:.2e}"),
        format!("<= {ROUND_TRIP_TOL:e}"),
        worst <= ROUND_TRIP_TOL,
    ));

    // rms_asa vs brute-force offset search
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..30);
        let m: Vec<Mpc> = (0..n)
            .map(|_| Mpc {
                toa: 10.0,
                aoa_az: rng.random_range(0.0..360.0),
                aoa_el: 0.0,
                power_db: rng.random_range(-30.0..0.0),
            })
            .collect();
        let got = rms_asa(&m, 1.0)?;
        let w: Vec<f64> = m.iter().map(|x| 10f64.powf(x.power_db / 10.0)).collect();
        let tot: f64 = w.iter().sum();
        let mut best = f64::INFINITY;
        for j in 0..360 {
            let a: Vec<f64> = m.iter().map(|x| (x.aoa_az + j as f64).rem_euclid(360.0)).collect();
            let mean = a.iter().zip(&w).map(|(x, p)| x * p).sum::<f64>() / tot;
            let var = a.iter().zip(&w).map(|(x, p)| (x - mean).powi(2) * p).sum::<f64>() / tot;
            best = best.min(var.sqrt());
        }
        worst = worst.max((got - best).abs());
    }
    out.push(line(
        6,
        "rms_asa vs brute force",
        format!("max diff {worst:.2e} deg"),
        format!("<= {ASA_TOL_DEG:e} deg"),
        worst <= ASA_TOL_DEG,
    ));

    // planted clusters
    let centres = [(10.0, 0.0), (35.0, 90.0), (60.0, 200.0), (85.0, 300.0)];
    let mut m = Vec::new();
    for &(t, az) in &centres {
        for _ in 0..25 {
            m.push(Mpc {
                toa: t + rng.random_range(-0.3..0.3),
                aoa_az: (az + rng.random_range(-2.0..2.0f64)).rem_euclid(360.0),
                aoa_el: 0.0,
                power_db: rng.random_range(-20.0..0.0),
            });
        }
    }
    let set = dbscan_mcd(&MpcSet::new(m), DbscanParams::default())?;
    let labels_ok = set.labels.chunks(25).enumerate().all(|(c, ls)| ls.iter().all(|&l| l == c as i32));
    out.push(line(
        6,
        "DBSCAN planted clusters",
        format!("{} clusters, {} outliers", set.n_clusters(), set.n_outliers()),
        "4 clusters, 0 outliers, labels match",
        set.n_clusters() == 4 && set.n_outliers() == 0 && labels_ok,
    ));

    // delay aliasing
    let sys = SystemParams::preset(ScenarioKind::MeetingRoom);
    let path = |toa: f64| single_path_realization(toa);
    let late = synthesize_ctf(&path(120.0), &sys, &AntennaPattern::Omni, 0.0, 0.0);
    let early = synthesize_ctf(&path(20.0), &sys, &AntennaPattern::Omni, 0.0, 0.0);
    let diff = late.iter().zip(&early).map(|(a, b)| (a - b).norm() / a.norm()).fold(0.0, f64::max);
    let cir = ctf_to_cir(&late);
    let peak = (0..cir.len()).max_by(|&i, &j| cir[i].norm().total_cmp(&cir[j].norm())).unwrap_or(0);
    let at = peak as f64 * sys.tap_spacing_ns();
    out.push(line(
        6,
        "120 ns ToA wraps to 20 ns",
        format!("peak at {at:.3} ns, ctf diff {diff:.1e}"),
        "peak within half a tap of 20 ns, identical CTF",
        (at - 20.0).abs() <= sys.tap_spacing_ns() / 2.0 && diff <= ROUND_TRIP_TOL,
    ));
    Ok(out)
}

fn single_path_realization(toa: f64) -> thzsim::stochastic::ChannelRealization {
    use thzsim::stochastic::{ChannelRealization, Cluster, Origin, Subpath};
    ChannelRealization {
        scenario: ScenarioKind::MeetingRoom,
        distance: 3.0,
        clusters: vec![Cluster {
            index: 0,
            toa,
            power_frac: 1.0,
            aoa_az: 0.0,
            subpaths: vec![Subpath {
                toa,
                aoa_az: 0.0,
                aoa_el: 0.0,
                amplitude: 1e-4,
                phase: 0.3,
                power_frac_within_cluster: 1.0,
                friis_scaled: false,
            }],
            origin: Origin::Statistical,
            rl_db: None,
            reflection_order: 0,
        }],
        seed: 0,
        pl_omni_db: 80.0,
        f_ref: 205.0,
    }
}

/// Run the generate, sound and montecarlo commands twice into fresh
/// directories and compare every output byte for byte.
pub fn determinism(o: &CheckOptions) -> Result<Vec<CheckLine>> {
    use crate::commands::{self, Command, Run};
    let mut out = Vec::new();
    for (cmd, drops) in [(Command::Generate, None), (Command::Sound, None), (Command::Montecarlo, Some(100))] {
        let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
        let mut files = Vec::new();
        for d in &dirs {
            let run = Run {
                scenarios: ScenarioKind::ALL.to_vec(),
                config: o.config.clone(),
                config_path: None,
                seed: Some(o.seed),
                drops,
                distance: None,
                jobs: o.jobs,
                out: d.path().to_path_buf(),
                check: false,
            };
            let r = commands::execute(&cmd, &run)?;
            let mut named: Vec<(String, Vec<u8>)> = r
                .files
                .iter()
                .map(|p| Ok((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), std::fs::read(p)?)))
                .collect::<Result<_>>()?;
            named.sort();
            files.push(named);
        }
        let same = files[0] == files[1] && !files[0].is_empty();
        let bytes: usize = files[0].iter().map(|(_, b)| b.len()).sum();
        out.push(line(
            7,
            format!("{} outputs reproducible", cmd.name()),
            format!("{} files, {bytes} bytes, identical = {same}", files[0].len()),
            "identical",
            same,
        ));
    }
    Ok(out)
}

/// Every criterion in order.
pub fn run_all(o: &CheckOptions, mut progress: impl FnMut(&CheckLine)) -> Result<Vec<CheckLine>> {
    let mut all = Vec::new();
    let stages: [fn(&CheckOptions) -> Result<Vec<CheckLine>>; 7] = [
        hybrid_validation,
        cluster_statistics,
        path_loss,
        reflection_loss,
        cluster_loss,
        equivalences,
        determinism,
    ];
    for stage in stages {
        for l in stage(o)? {
            progress(&l);
            all.push(l);
        }
    }
    Ok(all)
}
