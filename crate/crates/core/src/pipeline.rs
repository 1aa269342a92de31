//! End-to-end chains: generate, sound, analyze, and fit.

use serde::{Deserialize, Serialize};

use crate::analysis::{self, ClusterSummary, DbscanParams, MpcSet, Pdap};
use crate::config::ScenarioSetup;
use crate::pathloss::{self, CiModel};
use crate::raytracer::{DropLayout, Surface};
use crate::rng::{drop_seed, sub_stream};
use crate::scenario::{preset, ScenarioKind, SystemParams};
use crate::sounding::{angle_between, full_scan, full_scan_with, AntennaPattern, ScanOptions, SoundingSweep};
use crate::stochastic::{generate, GenerateOptions};
use crate::{Error, Result};

/// Clustered view of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAnalysis {
    pub noise_floor_db: f64,
    pub threshold_db: f64,
    pub n_mpcs: usize,
    pub n_outliers: usize,
    pub clusters: Vec<ClusterSummary>,
    pub ds_ns: Option<f64>,
    pub asa_deg: Option<f64>,
}

/// Threshold the PDAP, cluster the surviving MPCs and compute spreads.
pub fn analyze_sweep(sweep: &SoundingSweep, dbscan: DbscanParams, offset_step: f64) -> Result<(MpcSet, SweepAnalysis)> {
    let pdap = Pdap::from_sweep(sweep);
    let mpcs = pdap.mpcs();
    if mpcs.is_empty() {
        return Err(Error::InsufficientData("no MPC above the noise threshold".into()));
    }
    let set = analysis::dbscan_mcd(&mpcs, dbscan)?;
    let clusters = set.cluster_summaries();
    let summary = SweepAnalysis {
        noise_floor_db: pdap.noise_floor,
        threshold_db: pdap.threshold,
        n_mpcs: set.len(),
        n_outliers: set.n_outliers(),
        clusters,
        ds_ns: analysis::rms_delay_spread(&set.mpcs).ok(),
        asa_deg: analysis::rms_asa(&set.mpcs, offset_step).ok(),
    };
    Ok((set, summary))
}

/// Best-direction and omni path loss of one sweep, dB.
pub fn sweep_path_loss(sweep: &SoundingSweep, los: bool) -> Result<(f64, f64)> {
    let w = sweep.system.window_w;
    let best = if los {
        pathloss::pl_best_los(sweep)?
    } else {
        pathloss::pl_best_nlos(sweep, w)?
    };
    Ok((best, pathloss::pl_omni(sweep, w)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossPoint {
    pub distance: f64,
    pub pl_best_db: f64,
    pub pl_omni_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossFit {
    pub scenario: ScenarioKind,
    pub points: Vec<PathLossPoint>,
    pub best: CiModel,
    pub omni: CiModel,
}

/// Sound `drops` links at random Rx positions of the drop region and fit
/// best-direction and omni CI models.
pub fn fit_path_loss(setup: &ScenarioSetup, drops: u64, seed: u64) -> Result<PathLossFit> {
    let kind = setup.params.kind;
    let opts = GenerateOptions::new(kind, &setup.system);
    let mut points = Vec::with_capacity(drops as usize);
    for i in 0..drops {
        let s = drop_seed(seed, i);
        let rx = setup.layout.sample_rx(&mut sub_stream(s, u64::MAX))?;
        let real = generate(&setup.params, &setup.layout.geometry_at(rx), &opts, s)?;
        let sweep = full_scan(&real, &setup.system, s)?;
        let (best, omni) = sweep_path_loss(&sweep, kind.is_los())?;
        points.push(PathLossPoint {
            distance: real.distance,
            pl_best_db: best,
            pl_omni_db: omni,
        });
    }
    let f = setup.system.f_ref;
    let best = pathloss::ci_fit(&points.iter().map(|p| (p.distance, p.pl_best_db)).collect::<Vec<_>>(), f)?;
    let omni = pathloss::ci_fit(&points.iter().map(|p| (p.distance, p.pl_omni_db)).collect::<Vec<_>>(), f)?;
    Ok(PathLossFit {
        scenario: kind,
        points,
        best,
        omni,
    })
}

/// Free-space link: LoS path only, Tx aimed at Rx, noise on.
pub fn free_space_fit(system: &SystemParams, distances: &[f64], seed: u64) -> Result<CiModel> {
    let kind = ScenarioKind::MeetingRoom;
    let mut setup = ScenarioSetup::preset(kind);
    setup.system = system.clone();
    setup.layout.active_surfaces.clear();
    setup.layout.length = 40.0;
    setup.layout.width = 40.0;
    setup.layout.typical_rx = [20.0, 20.0, setup.layout.tx_pos[2]];
    let mut opts = GenerateOptions::new(kind, system);
    opts.statistical = false;
    let mut samples = Vec::with_capacity(distances.len());
    for (i, &d) in distances.iter().enumerate() {
        let s = drop_seed(seed, i as u64);
        let geom = setup.layout.geometry_at(setup.layout.rx_at_distance(d)?);
        let real = generate(&setup.params, &geom, &opts, s)?;
        let sweep = full_scan(&real, system, s)?;
        samples.push((d, pathloss::pl_best_los(&sweep)?));
    }
    pathloss::ci_fit(&samples, system.f_ref)
}

/// Reflection-loss round trip outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlRoundTrip {
    /// RL values drawn by the generator, dB.
    pub drawn: Vec<f64>,
    /// RL values re-estimated from the clustered sweeps, dB.
    pub estimated: Vec<f64>,
    pub mu_ln: f64,
    pub sigma_ln: f64,
}

/// Clustering used by the RL round trip: adjacent 10-degree beams link.
pub const RL_DBSCAN: DbscanParams = DbscanParams {
    min_pts: analysis::DEFAULT_MIN_PTS,
    eps: 0.1,
    zeta: analysis::DEFAULT_ZETA,
};

/// Sum of the pattern gain over the scan grid for a path arriving from
/// `(az, el)`: the factor by which summing a cluster over overlapping beams
/// overstates its power.
pub fn grid_gain_sum(system: &SystemParams, pattern: &AntennaPattern, az: f64, el: f64) -> f64 {
    let mut g = 0.0;
    for &e in &system.el_grid {
        for &a in &system.az_grid {
            g += pattern.gain(angle_between(a, e, az, el));
        }
    }
    g
}

/// Estimate the reflection loss of every cluster in a sweep, dB. Cluster
/// powers are de-embedded from the beam overlap of the scan grid.
pub fn estimate_reflection_losses(sweep: &SoundingSweep, pattern: &AntennaPattern, dbscan: DbscanParams) -> Result<Vec<f64>> {
    let (_, a) = analyze_sweep(sweep, dbscan, 1.0)?;
    let sys = &sweep.system;
    let mut out = Vec::with_capacity(a.clusters.len());
    for c in &a.clusters {
        let g = grid_gain_sum(sys, pattern, c.aoa_az, c.aoa_el);
        out.push(pathloss::reflection_loss(c.power / g, 1.0, sys.f_ref, c.toa)?);
    }
    Ok(out)
}

/// Meeting-room links with first-order wall reflections only: generate,
/// sound, cluster, estimate each cluster's reflection loss and refit the
/// log-normal. Tx sits away from the corner so the four wall echoes stay
/// apart, and the Rx horn has no side-lobe floor, which would otherwise
/// bridge every echo into one cluster.
pub fn rl_round_trip(drops: u64, seed: u64) -> Result<RlRoundTrip> {
    let kind = ScenarioKind::MeetingRoom;
    let params = preset(kind);
    let system = SystemParams::preset(kind);
    let mut layout = DropLayout::preset(kind);
    layout.tx_pos = [3.0, 3.0, 1.2];
    layout.active_surfaces = Surface::WALLS.to_vec();
    layout.max_reflection_order = 1;
    let mut opts = GenerateOptions::new(kind, &system);
    opts.statistical = false;
    opts.traced_los = false;
    opts.tx_pattern = AntennaPattern::Omni;
    let scan = ScanOptions {
        rx_pattern: AntennaPattern::Gaussian {
            hpbw: system.rx_hpbw,
            floor_db: None,
        },
        noise: true,
    };
    let mut drawn = Vec::new();
    let mut estimated = Vec::new();
    for i in 0..drops {
        let s = drop_seed(seed, i);
        let rx = layout.sample_rx(&mut sub_stream(s, u64::MAX))?;
        let real = generate(&params, &layout.geometry_at(rx), &opts, s)?;
        drawn.extend(real.clusters.iter().filter_map(|c| c.rl_db));
        let sweep = full_scan_with(&real, &system, &scan, s)?;
        let Ok(rl) = estimate_reflection_losses(&sweep, &scan.rx_pattern, RL_DBSCAN) else {
            continue;
        };
        estimated.extend(rl.into_iter().filter(|&x| x > 0.0));
    }
    let (mu_ln, sigma_ln) = analysis::lognormal_fit(&estimated)?;
    Ok(RlRoundTrip {
        drawn,
        estimated,
        mu_ln,
        sigma_ln,
    })
}
