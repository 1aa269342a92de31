//! Monte-Carlo drops over a scenario's drop region.
//!
//! Drop `i` draws its Rx position and its realization from seeds derived
//! from `(master seed, i)`, so results are independent of the thread count.
//! The cluster count is stratified over the run: drop `i` of `n` takes the
//! Poisson quantile at a uniform point of `[i/n, (i+1)/n)`, and the first
//! cluster gap is stratified the same way over a scrambled index (a Latin
//! hypercube in two dimensions). Each drop keeps its marginal distribution,
//! but the share of drops with no or only one nearby NLoS cluster no longer
//! fluctuates from run to run, which otherwise dominates the spread of mean ln DS.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, ChannelStats, CnlPoint};
use crate::config::ScenarioSetup;
use crate::rng::{drop_seed, sub_stream};
use crate::scenario::ScenarioKind;
use crate::stochastic::{generate, realization_stats, GenerateOptions};
use crate::{Error, Result};

/// Azimuth step of the ASA offset search used for Monte-Carlo statistics, deg.
pub const ASA_OFFSET_STEP: f64 = 1.0;

const PLACEMENT_STREAM: u64 = u64::MAX;
const STRATUM_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    pub index: u64,
    pub seed: u64,
    pub rx_pos: [f64; 3],
    pub distance: f64,
    /// `None` when nothing survives the noise threshold.
    pub stats: Option<ChannelStats>,
}

/// A multiplier near `n / golden ratio` coprime with `n`, so `i -> i * m mod n`
/// permutes the strata without lining them up with the drop index.
fn scramble(n: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let mut m = ((n as f64 * 0.618_033_988_75) as u64).max(1);
    while gcd(m, n) != 1 {
        m += 1;
    }
    m
}

/// Run drop `index` of a run of `drops`.
pub fn run_drop(setup: &ScenarioSetup, opts: &GenerateOptions, master_seed: u64, index: u64, drops: u64) -> Result<DropResult> {
    let seed = drop_seed(master_seed, index);
    let rx = setup.layout.sample_rx(&mut sub_stream(seed, PLACEMENT_STREAM))?;
    let geom = setup.layout.geometry_at(rx);
    let mut o = opts.clone();
    let n = drops.max(index + 1);
    let mut jitter = sub_stream(seed, STRATUM_STREAM);
    if o.count_quantile.is_none() {
        o.count_quantile = Some((index as f64 + jitter.random::<f64>()) / n as f64);
    }
    if o.gap_quantile.is_none() {
        let j = (index as u128 * scramble(n) as u128 % n as u128) as f64;
        o.gap_quantile = Some((j + jitter.random::<f64>()) / n as f64);
    }
    let real = generate(&setup.params, &geom, &o, seed)?;
    Ok(DropResult {
        index,
        seed,
        rx_pos: rx,
        distance: real.distance,
        stats: realization_stats(&real, &setup.system, ASA_OFFSET_STEP),
    })
}

/// Run `drops` drops on up to `jobs` threads; results are in drop order.
pub fn run_drops(setup: &ScenarioSetup, opts: &GenerateOptions, drops: u64, master_seed: u64, jobs: usize) -> Result<Vec<DropResult>> {
    let jobs = jobs.clamp(1, drops.max(1) as usize);
    if jobs == 1 {
        return (0..drops).map(|i| run_drop(setup, opts, master_seed, i, drops)).collect();
    }
    let mut slots: Vec<Option<Result<DropResult>>> = (0..drops).map(|_| None).collect();
    let chunk = (drops as usize).div_ceil(jobs);
    std::thread::scope(|s| {
        for (c, part) in slots.chunks_mut(chunk).enumerate() {
            s.spawn(move || {
                for (j, slot) in part.iter_mut().enumerate() {
                    *slot = Some(run_drop(setup, opts, master_seed, (c * chunk + j) as u64, drops));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Aggregate statistics of a set of drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub scenario: ScenarioKind,
    pub drops: usize,
    /// Drops with a finite, non-zero DS and ASA.
    pub valid: usize,
    pub mean_ln_ds: f64,
    pub std_ln_ds: f64,
    pub mean_ln_asa: f64,
    pub std_ln_asa: f64,
    pub mean_n_clusters: f64,
    pub mean_gap_ns: f64,
    /// Pooled CNL regression, dB/ns.
    pub cnl_slope: Option<f64>,
    pub cnl_corr: Option<f64>,
    /// CNL slope with a free intercept per drop, dB/ns.
    pub cnl_within_slope: Option<f64>,
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn summarize(kind: ScenarioKind, results: &[DropResult]) -> Result<McSummary> {
    let stats: Vec<&ChannelStats> = results.iter().filter_map(|r| r.stats.as_ref()).collect();
    let ok: Vec<&&ChannelStats> = stats.iter().filter(|s| s.ds_ns > 0.0 && s.asa_deg > 0.0).collect();
    if ok.is_empty() {
        return Err(Error::InsufficientData("no drop produced a non-zero spread".into()));
    }
    let (mean_ln_ds, std_ln_ds) = mean_std(&ok.iter().map(|s| s.ds_ns.ln()).collect::<Vec<_>>());
    let (mean_ln_asa, std_ln_asa) = mean_std(&ok.iter().map(|s| s.asa_deg.ln()).collect::<Vec<_>>());
    let (mean_n, _) = mean_std(&stats.iter().map(|s| s.n_clusters as f64).collect::<Vec<_>>());
    let gaps: Vec<f64> = stats.iter().flat_map(|s| s.gaps_ns.iter().copied()).collect();
    let cnl: Vec<CnlPoint> = stats.iter().flat_map(|s| s.cnl_points.iter().copied()).collect();
    let fit = analysis::cnl_regression(&cnl).ok();
    let per_drop: Vec<Vec<CnlPoint>> = stats.iter().map(|s| s.cnl_points.clone()).collect();
    Ok(McSummary {
        scenario: kind,
        drops: results.len(),
        valid: ok.len(),
        mean_ln_ds,
        std_ln_ds,
        mean_ln_asa,
        std_ln_asa,
        mean_n_clusters: mean_n,
        mean_gap_ns: mean_std(&gaps).0,
        cnl_slope: fit.as_ref().map(|f| f.slope),
        cnl_corr: fit.as_ref().map(|f| f.corr),
        cnl_within_slope: analysis::cnl_within_slope(&per_drop).ok(),
    })
}

/// Run and summarise.
pub fn monte_carlo(setup: &ScenarioSetup, drops: u64, master_seed: u64, jobs: usize) -> Result<McSummary> {
    let opts = GenerateOptions::new(setup.params.kind, &setup.system);
    summarize(setup.params.kind, &run_drops(setup, &opts, drops, master_seed, jobs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_count_does_not_change_results() {
        let setup = ScenarioSetup::preset(ScenarioKind::MeetingRoom);
        let opts = GenerateOptions::new(setup.params.kind, &setup.system);
        let a = run_drops(&setup, &opts, 17, 9, 1).unwrap();
        let b = run_drops(&setup, &opts, 17, 9, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.distance >= setup.layout.d_min && r.distance <= setup.layout.d_max));
    }
}
