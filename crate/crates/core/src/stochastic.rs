//! Statistical part of the hybrid model and assembly of a full realization.
//!
//! Clusters arrive as a Poisson process after the first arrival; cluster
//! powers decay exponentially with excess delay under log-normal shadowing;
//! in LoS scenarios the first cluster takes the Ricean share `K/(K+1)`.
//! Cluster AoAs are the inverse-Gaussian map of the relative powers with a
//! random sign. Within a cluster, subpaths follow their own Poisson process
//! with an exponential power decay of the same time constant.
//!
//! All azimuths in a realization are relative to the LoS arrival direction
//! (direction from Rx towards Tx), wrapped to `[0, 360)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{self, ChannelStats, ClusterSummary, DbscanParams, Mpc, MpcSet};
use crate::pathloss::CiModel;
use crate::raytracer::{self, RoomGeometry, TracedPath};
use crate::rng::{open_unit, rng_from_seed, SimRng};
use crate::scenario::{ReflectionLossMode, ScenarioKind, ScenarioParams, SystemParams};
use crate::sounding::AntennaPattern;
use crate::{distance_to_ns, lin_to_db, wrap_deg, Error, Result};

/// Where a cluster comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Los,
    Deterministic,
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subpath {
    /// ns
    pub toa: f64,
    /// deg, relative to the LoS arrival direction
    pub aoa_az: f64,
    pub aoa_el: f64,
    /// Linear amplitude at the reference frequency.
    pub amplitude: f64,
    /// rad in [0, 2 pi)
    pub phase: f64,
    pub power_frac_within_cluster: f64,
    /// Amplitude scales as `f_ref / f` across the band (traced Friis paths).
    pub friis_scaled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub index: usize,
    /// ToA of the first subpath, ns.
    pub toa: f64,
    /// Share of the statistical power budget (LoS split included);
    /// 0 for traced reflection clusters, which sit outside that budget.
    pub power_frac: f64,
    /// deg
    pub aoa_az: f64,
    pub subpaths: Vec<Subpath>,
    pub origin: Origin,
    /// Reflection loss applied to a traced path, dB.
    pub rl_db: Option<f64>,
    pub reflection_order: usize,
}

impl Cluster {
    /// Sum of subpath powers at the reference frequency.
    pub fn power(&self) -> f64 {
        self.subpaths.iter().map(|s| s.amplitude * s.amplitude).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub scenario: ScenarioKind,
    /// Tx-Rx distance, m.
    pub distance: f64,
    pub clusters: Vec<Cluster>,
    pub seed: u64,
    /// Omni CI path loss at `distance`, dB.
    pub pl_omni_db: f64,
    /// GHz
    pub f_ref: f64,
}

impl ChannelRealization {
    pub fn subpaths(&self) -> impl Iterator<Item = (&Cluster, &Subpath)> {
        self.clusters.iter().flat_map(|c| c.subpaths.iter().map(move |s| (c, s)))
    }

    pub fn n_subpaths(&self) -> usize {
        self.clusters.iter().map(|c| c.subpaths.len()).sum()
    }
}

/// Number of clusters: Poisson(`lambda_n`), at least one in LoS scenarios.
pub fn sample_num_clusters<R: Rng + ?Sized>(lambda_n: f64, los: bool, rng: &mut R) -> Result<usize> {
    if !(lambda_n > 0.0) {
        return Err(Error::param("lambda_n", "must be > 0"));
    }
    let n = Poisson::new(lambda_n)
        .map_err(|e| Error::param("lambda_n", e.to_string()))?
        .sample(rng) as usize;
    Ok(if los { n.max(1) } else { n })
}

/// Poisson(`lambda_n`) quantile at `u` in `[0, 1)`, clamped like [`sample_num_clusters`].
pub fn num_clusters_at(lambda_n: f64, los: bool, u: f64) -> Result<usize> {
    if !(lambda_n > 0.0) {
        return Err(Error::param("lambda_n", "must be > 0"));
    }
    let mut pmf = (-lambda_n).exp();
    let mut cdf = pmf;
    let mut n = 0usize;
    // the tail guard stops at a count far beyond any plausible draw
    while cdf <= u && n < 10_000 {
        n += 1;
        pmf *= lambda_n / n as f64;
        cdf += pmf;
    }
    Ok(if los { n.max(1) } else { n })
}

/// Exponential gap `-mean * ln(x)` for a uniform draw `x` in `(0, 1]`.
pub fn gap_from_uniform(mean: f64, x: f64) -> f64 {
    -mean * x.ln()
}

/// `n` cluster delays starting at `first_arrival`, gaps with mean `r_tau * sigma_tau`.
pub fn sample_cluster_delays<R: Rng + ?Sized>(
    n: usize,
    r_tau: f64,
    sigma_tau: f64,
    first_arrival: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mean = r_tau * sigma_tau;
    let mut out = Vec::with_capacity(n);
    let mut t = first_arrival;
    for i in 0..n {
        if i > 0 {
            t += gap_from_uniform(mean, open_unit(rng));
        }
        out.push(t);
    }
    out
}

/// Unnormalised powers `exp(-dtau (r_tau-1)/(r_tau sigma_tau)) * 10^(-Z/10)`,
/// `dtau` being the excess delay over the first entry of `delays`.
pub fn cluster_power_weights<R: Rng + ?Sized>(
    delays: &[f64],
    r_tau: f64,
    sigma_tau: f64,
    xi_db: f64,
    rng: &mut R,
) -> Vec<f64> {
    let t0 = delays.first().copied().unwrap_or(0.0);
    let rate = (r_tau - 1.0) / (r_tau * sigma_tau);
    delays
        .iter()
        .map(|&t| {
            // always drawn, so the stream does not depend on xi
            let n: f64 = StandardNormal.sample(rng);
            let z = xi_db.max(0.0) * n;
            (-(t - t0) * rate).exp() * 10f64.powf(-z / 10.0)
        })
        .collect()
}

/// Cluster power fractions summing to one. With `k_db = Some(K)` the first
/// cluster is the LoS cluster with share `K/(K+1)`.
pub fn sample_cluster_powers<R: Rng + ?Sized>(
    delays: &[f64],
    r_tau: f64,
    sigma_tau: f64,
    xi_db: f64,
    k_db: Option<f64>,
    rng: &mut R,
) -> Vec<f64> {
    if delays.is_empty() {
        return Vec::new();
    }
    let w = cluster_power_weights(delays, r_tau, sigma_tau, xi_db, rng);
    match k_db {
        Some(k_db) => {
            if delays.len() == 1 {
                return vec![1.0];
            }
            let k = crate::db_to_lin(k_db);
            // K -> inf: the LoS takes everything
            let (p_los, p_rest) = if k.is_infinite() { (1.0, 0.0) } else { (k / (k + 1.0), 1.0 / (k + 1.0)) };
            let rest: f64 = w[1..].iter().sum();
            let mut out = Vec::with_capacity(w.len());
            out.push(p_los);
            out.extend(w[1..].iter().map(|p| p_rest * p / rest));
            out
        }
        None => {
            let total: f64 = w.iter().sum();
            w.iter().map(|p| p / total).collect()
        }
    }
}

/// Inverse-Gaussian AoA offset `sign * scale * sqrt(-ln(p / p_max))`.
pub fn inverse_gaussian_offset(p: f64, p_max: f64, scale: f64, sign: f64) -> f64 {
    let r = (p / p_max).min(1.0);
    sign * scale * (-r.ln()).max(0.0).sqrt()
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Cluster azimuths relative to boresight, wrapped to `[0, 360)`.
pub fn sample_cluster_aoas<R: Rng + ?Sized>(
    power_fracs: &[f64],
    r_phi: f64,
    mu_asa_deg: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let p_max = power_fracs.iter().copied().fold(0.0, f64::max);
    if power_fracs.is_empty() || !(p_max > 0.0) {
        return Err(Error::InsufficientData("need a positive cluster power".into()));
    }
    Ok(power_fracs
        .iter()
        .map(|&p| {
            let c = random_sign(rng);
            wrap_deg(inverse_gaussian_offset(p, p_max, r_phi * mu_asa_deg, c))
        })
        .collect())
}

/// Subpaths of a statistical cluster. Intra-cluster gaps are exponential
/// with mean `r_tau_c`; subpath powers decay as `exp(-dtau / r_tau_c)`.
/// Amplitudes are left at `sqrt(fraction)`; [`generate`] scales them.
pub fn sample_subpaths<R: Rng + ?Sized>(
    cluster_toa: f64,
    cluster_aoa: f64,
    m_subpaths: usize,
    r_tau_c: f64,
    r_phi_c: f64,
    rng: &mut R,
) -> Result<Vec<Subpath>> {
    if m_subpaths < 1 {
        return Err(Error::param("m_subpaths", "must be >= 1"));
    }
    let toas = sample_cluster_delays(m_subpaths, 1.0, r_tau_c, cluster_toa, rng);
    let w: Vec<f64> = toas.iter().map(|t| (-(t - cluster_toa) / r_tau_c).exp()).collect();
    let total: f64 = w.iter().sum();
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let d = random_sign(rng);
    Ok(toas
        .iter()
        .zip(&w)
        .map(|(&t, &p)| {
            let frac = p / total;
            Subpath {
                toa: t,
                aoa_az: wrap_deg(cluster_aoa + inverse_gaussian_offset(p, w_max, r_phi_c, d)),
                aoa_el: 0.0,
                amplitude: frac.sqrt(),
                phase: rng.random::<f64>() * std::f64::consts::TAU,
                power_frac_within_cluster: frac,
                friis_scaled: false,
            }
        })
        .collect())
}

/// Tx antenna pointing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxPointing {
    /// Boresight towards Rx.
    TowardRx,
    /// Fixed horizontal azimuth in the room frame, deg.
    FixedAz(f64),
}

/// Which parts of the hybrid model to include and how to weight them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    /// Reference frequency for amplitudes, GHz.
    pub f_ref: f64,
    pub tx_pattern: AntennaPattern,
    pub tx_pointing: TxPointing,
    /// Ray-traced part; also gated by `ScenarioParams::deterministic`.
    pub deterministic: bool,
    pub statistical: bool,
    /// Keep the traced order-0 path (ignored in NLoS, where it is blocked).
    pub traced_los: bool,
    /// Dynamic range for counting resolvable traced clusters, dB.
    pub det_dynamic_range_db: f64,
    /// Clustering used to count resolvable traced clusters.
    pub det_grouping: DbscanParams,
    /// Draw the cluster count as this Poisson quantile instead of at random.
    /// Monte-Carlo runs set it per drop to stratify the count.
    #[serde(default)]
    pub count_quantile: Option<f64>,
    /// Likewise for the gap between the first two clusters.
    #[serde(default)]
    pub gap_quantile: Option<f64>,
}

impl GenerateOptions {
    pub fn new(kind: ScenarioKind, system: &SystemParams) -> Self {
        GenerateOptions {
            f_ref: system.f_ref,
            tx_pattern: AntennaPattern::gaussian(system.tx_hpbw, system.sidelobe_db),
            tx_pointing: match kind {
                // NLoS Tx faces a fixed reference point down the hallway
                ScenarioKind::NLoS => TxPointing::FixedAz(0.0),
                _ => TxPointing::TowardRx,
            },
            deterministic: true,
            statistical: true,
            traced_los: true,
            det_dynamic_range_db: analysis::DYNAMIC_RANGE_DB,
            det_grouping: DbscanParams {
                min_pts: 1,
                ..DbscanParams::default()
            },
            count_quantile: None,
            gap_quantile: None,
        }
    }
}

fn tx_boresight(geom: &RoomGeometry, pointing: TxPointing) -> [f64; 3] {
    match pointing {
        TxPointing::TowardRx => {
            let v = raytracer::sub(geom.rx_pos, geom.tx_pos);
            raytracer::scale(v, 1.0 / raytracer::norm(v))
        }
        TxPointing::FixedAz(az) => {
            let a = az.to_radians();
            [a.cos(), a.sin(), 0.0]
        }
    }
}

/// Sample a reflection loss in dB for a path of the given order.
fn sample_rl<R: Rng + ?Sized>(params: &ScenarioParams, order: usize, rng: &mut R) -> f64 {
    let ln = LogNormal::new(params.rl_mu_ln, params.rl_sigma_ln).expect("validated sigma");
    match params.rl_mode {
        ReflectionLossMode::PerPath => ln.sample(rng),
        ReflectionLossMode::PerBounce => (0..order).map(|_| ln.sample(rng)).sum(),
    }
}

/// Number of resolvable groups among traced reflections within the dynamic
/// range. Reflections grouped with the LoS path are part of the LoS cluster.
fn resolvable_groups(paths: &[(TracedPath, f64)], opts: &GenerateOptions, frame_az: f64) -> usize {
    let p_max = paths.iter().map(|(_, a)| a * a).fold(0.0, f64::max);
    let floor = p_max * crate::db_to_lin(-opts.det_dynamic_range_db);
    let kept: Vec<&(TracedPath, f64)> = paths.iter().filter(|(_, a)| *a > 0.0 && a * a >= floor).collect();
    if kept.is_empty() {
        return 0;
    }
    let mpcs: Vec<Mpc> = kept
        .iter()
        .map(|(p, a)| Mpc {
            toa: p.toa,
            aoa_az: wrap_deg(p.aoa_az - frame_az),
            aoa_el: p.aoa_el,
            power_db: lin_to_db(a * a),
        })
        .collect();
    let Ok(set) = analysis::dbscan_mcd(&MpcSet::new(mpcs), opts.det_grouping) else {
        return 0;
    };
    let los_label = kept
        .iter()
        .position(|(p, _)| p.reflection_order == 0)
        .map(|i| set.labels[i]);
    let mut labels: Vec<i32> = set.labels.iter().copied().filter(|&l| l >= 0 && Some(l) != los_label).collect();
    labels.sort_unstable();
    labels.dedup();
    labels.len()
}

/// Generate one realization of the hybrid channel for a fixed geometry.
pub fn generate(
    params: &ScenarioParams,
    geom: &RoomGeometry,
    opts: &GenerateOptions,
    seed: u64,
) -> Result<ChannelRealization> {
    params.validate()?;
    geom.validate()?;
    let mut rng: SimRng = rng_from_seed(seed);
    let d = geom.distance();
    let tau_los = distance_to_ns(d);
    let los = params.is_los();
    let frame_az = geom.los_arrival_az();
    let ci = CiModel::new(params.ple_omni, opts.f_ref);
    let pl_omni_db = ci.eval(d.max(ci.d0), 0.0)?;
    let pl_lin = crate::db_to_lin(pl_omni_db);

    // deterministic part
    let mut traced: Vec<(TracedPath, f64, f64)> = Vec::new(); // (path, amplitude, rl)
    if params.deterministic && opts.deterministic {
        let boresight = tx_boresight(geom, opts.tx_pointing);
        for p in raytracer::trace(geom, geom.max_reflection_order)? {
            if p.reflection_order == 0 && (!los || !opts.traced_los) {
                continue;
            }
            let rl = if p.reflection_order == 0 { 0.0 } else { sample_rl(params, p.reflection_order, &mut rng) };
            let psi = raytracer::dot(p.aod, boresight).clamp(-1.0, 1.0).acos().to_degrees();
            let amp = raytracer::path_gain(&p, opts.f_ref, rl)? * opts.tx_pattern.amplitude(psi);
            traced.push((p, amp, rl));
        }
    }
    let has_traced_los = traced.iter().any(|(p, _, _)| p.reflection_order == 0);

    let mut clusters: Vec<Cluster> = Vec::new();

    // statistical part
    if opts.statistical {
        let n_total = match opts.count_quantile {
            Some(u) => num_clusters_at(params.lambda_n, los, u)?,
            None => sample_num_clusters(params.lambda_n, los, &mut rng)?,
        };
        let mut n_nlos = if los { n_total - 1 } else { n_total };
        if params.double_count_guard && !traced.is_empty() {
            let all: Vec<(TracedPath, f64)> = traced.iter().map(|(p, a, _)| (p.clone(), *a)).collect();
            n_nlos = n_nlos.saturating_sub(resolvable_groups(&all, opts, frame_az));
        }
        let first_arrival = if los {
            tau_los
        } else {
            let e = Exp::new(1.0 / params.mu_dtau).map_err(|e| Error::param("mu_dtau", e.to_string()))?;
            tau_los + e.sample(&mut rng)
        };
        let n_clusters = if los { n_nlos + 1 } else { n_nlos };
        let mut delays = sample_cluster_delays(n_clusters, params.r_tau, params.sigma_tau(), first_arrival, &mut rng);
        if let (Some(u), true) = (opts.gap_quantile, delays.len() > 1) {
            let shift = gap_from_uniform(params.r_tau * params.sigma_tau(), 1.0 - u) - (delays[1] - delays[0]);
            delays[1..].iter_mut().for_each(|t| *t += shift);
        }
        let k_db = los.then_some(params.k_factor_db);
        let powers = sample_cluster_powers(&delays, params.r_tau, params.sigma_tau(), params.xi_db, k_db, &mut rng);
        if !powers.is_empty() {
            let aoas = sample_cluster_aoas(&powers, params.r_phi, params.mu_asa_deg(), &mut rng)?;
            for (i, ((&t, &p), &az)) in delays.iter().zip(&powers).zip(&aoas).enumerate() {
                let is_los = los && i == 0;
                let mut subpaths = if is_los {
                    vec![Subpath {
                        toa: t,
                        aoa_az: 0.0,
                        aoa_el: 0.0,
                        amplitude: 1.0,
                        phase: rng.random::<f64>() * std::f64::consts::TAU,
                        power_frac_within_cluster: 1.0,
                        friis_scaled: false,
                    }]
                } else {
                    sample_subpaths(t, az, params.m_subpaths, params.r_tau_c, params.r_phi_c, &mut rng)?
                };
                if is_los && has_traced_los {
                    // the traced LoS path carries this share
                    continue;
                }
                for s in &mut subpaths {
                    s.amplitude = (p * s.power_frac_within_cluster / pl_lin).sqrt();
                }
                clusters.push(Cluster {
                    index: 0,
                    toa: t,
                    power_frac: p,
                    aoa_az: if is_los { 0.0 } else { az },
                    subpaths,
                    origin: if is_los { Origin::Los } else { Origin::Statistical },
                    rl_db: None,
                    reflection_order: 0,
                });
            }
            if has_traced_los {
                let los_frac = powers[0];
                let (p, amp, _) = traced.iter().find(|(p, _, _)| p.reflection_order == 0).unwrap();
                clusters.push(traced_cluster(p, *amp, None, los_frac, frame_az, &mut rng));
            }
        }
    }
    for (p, amp, rl) in &traced {
        if p.reflection_order == 0 && opts.statistical {
            continue;
        }
        let frac = if p.reflection_order == 0 { 1.0 } else { 0.0 };
        let rl = (p.reflection_order > 0).then_some(*rl);
        clusters.push(traced_cluster(p, *amp, rl, frac, frame_az, &mut rng));
    }

    clusters.sort_by(|a, b| a.toa.total_cmp(&b.toa).then(a.aoa_az.total_cmp(&b.aoa_az)));
    for (i, c) in clusters.iter_mut().enumerate() {
        c.index = i;
    }
    Ok(ChannelRealization {
        scenario: params.kind,
        distance: d,
        clusters,
        seed,
        pl_omni_db,
        f_ref: opts.f_ref,
    })
}

fn traced_cluster(
    p: &TracedPath,
    amp: f64,
    rl_db: Option<f64>,
    power_frac: f64,
    frame_az: f64,
    rng: &mut SimRng,
) -> Cluster {
    let az = wrap_deg(p.aoa_az - frame_az);
    Cluster {
        index: 0,
        toa: p.toa,
        power_frac,
        aoa_az: az,
        subpaths: vec![Subpath {
            toa: p.toa,
            aoa_az: az,
            aoa_el: p.aoa_el,
            amplitude: amp,
            phase: rng.random::<f64>() * std::f64::consts::TAU,
            power_frac_within_cluster: 1.0,
            friis_scaled: true,
        }],
        origin: if p.reflection_order == 0 { Origin::Los } else { Origin::Deterministic },
        rl_db,
        reflection_order: p.reflection_order,
    }
}

/// Cluster summaries of a realization with full (unthresholded) powers.
pub fn cluster_summaries(real: &ChannelRealization) -> Vec<ClusterSummary> {
    real.clusters
        .iter()
        .map(|c| ClusterSummary {
            toa: c.toa,
            aoa_az: c.aoa_az,
            aoa_el: 0.0,
            power: c.power(),
            peak_power: c.power(),
            n_mpcs: c.subpaths.len(),
            is_los: c.origin == Origin::Los,
        })
        .collect()
}

/// Subpaths of a realization as MPCs with received power in dBm.
pub fn realization_mpcs(real: &ChannelRealization, tx_power_dbm: f64) -> Vec<Mpc> {
    real.subpaths()
        .filter(|(_, s)| s.amplitude > 0.0)
        .map(|(_, s)| Mpc {
            toa: s.toa,
            aoa_az: s.aoa_az,
            aoa_el: s.aoa_el,
            power_db: tx_power_dbm + lin_to_db(s.amplitude * s.amplitude),
        })
        .collect()
}

/// Channel statistics computed directly on the generated subpaths, after
/// the noise-elimination threshold. `None` when nothing survives.
pub fn realization_stats(real: &ChannelRealization, system: &SystemParams, offset_step: f64) -> Option<ChannelStats> {
    let mpcs = realization_mpcs(real, system.tx_power_dbm);
    let p_max = mpcs.iter().map(|m| m.power_db).fold(f64::NEG_INFINITY, f64::max);
    if !p_max.is_finite() {
        return None;
    }
    let th = analysis::noise_threshold(p_max, system.noise_floor_dbm);
    let kept: Vec<Mpc> = mpcs.into_iter().filter(|m| m.power_db >= th).collect();
    let ds = analysis::rms_delay_spread(&kept).ok()?;
    let asa = analysis::rms_asa(&kept, offset_step).ok()?;
    let summaries: Vec<ClusterSummary> = real
        .clusters
        .iter()
        .filter_map(|c| {
            let lin_th = crate::db_to_lin(th - system.tx_power_dbm);
            let power: f64 = c.subpaths.iter().map(|s| s.amplitude * s.amplitude).filter(|&p| p >= lin_th).sum();
            (power > 0.0).then_some(ClusterSummary {
                toa: c.toa,
                aoa_az: c.aoa_az,
                aoa_el: 0.0,
                power,
                peak_power: power,
                n_mpcs: c.subpaths.len(),
                is_los: c.origin == Origin::Los,
            })
        })
        .collect();
    let toas: Vec<f64> = summaries.iter().map(|c| c.toa).collect();
    Some(ChannelStats {
        ds_ns: ds,
        asa_deg: asa,
        n_clusters: summaries.len(),
        gaps_ns: analysis::inter_cluster_delays(&toas).unwrap_or_default(),
        cnl_points: analysis::cnl_points(&summaries).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    #[test]
    fn gap_of_unit_draw_is_zero() {
        assert_eq!(gap_from_uniform(11.89, 1.0), 0.0);
        assert!((gap_from_uniform(10.0, (-1.0f64).exp()) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn decay_law_value() {
        let mut rng = rng_from_seed(1);
        let sigma = 11.89 / 2.0;
        let w = cluster_power_weights(&[0.0, 11.89], 2.0, sigma, 0.0, &mut rng);
        assert_eq!(w[0], 1.0);
        // rate (r_tau - 1) / (r_tau sigma_tau) = 1 / 11.89 per ns
        assert!((w[1] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn los_share_and_normalisation() {
        let mut rng = rng_from_seed(2);
        let delays = [10.0, 20.0, 35.0, 50.0];
        let p = sample_cluster_powers(&delays, 2.0, 6.0, 3.0, Some(10.0), &mut rng);
        assert!((p[0] - 10.0 / 11.0).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = sample_cluster_powers(&delays, 2.0, 6.0, 3.0, None, &mut rng);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = sample_cluster_powers(&delays, 2.0, 6.0, 3.0, Some(400.0), &mut rng);
        assert!((p[0] - 1.0).abs() < 1e-12);
        let p = sample_cluster_powers(&delays, 2.0, 6.0, 3.0, Some(f64::INFINITY), &mut rng);
        assert_eq!(p[0], 1.0);
        assert_eq!(sample_cluster_powers(&[5.0], 2.0, 6.0, 3.0, Some(10.0), &mut rng), vec![1.0]);
    }

    #[test]
    fn strongest_cluster_at_boresight() {
        let mut rng = rng_from_seed(3);
        let p = [0.5, 0.5 * (-1.0f64).exp(), 0.1];
        let a = sample_cluster_aoas(&p, 1.0, 29.0, &mut rng).unwrap();
        assert_eq!(a[0], 0.0);
        let off = if a[1] > 180.0 { 360.0 - a[1] } else { a[1] };
        assert!((off - 29.0).abs() < 1e-9);
        assert!(sample_cluster_aoas(&[], 1.0, 29.0, &mut rng).is_err());
    }

    #[test]
    fn single_subpath_takes_whole_cluster() {
        let mut rng = rng_from_seed(4);
        let s = sample_subpaths(12.0, 30.0, 1, 0.5, 5.0, &mut rng).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].toa, 12.0);
        assert_eq!(s[0].power_frac_within_cluster, 1.0);
        assert_eq!(s[0].aoa_az, 30.0);
        let s = sample_subpaths(12.0, 30.0, 20, 0.5, 5.0, &mut rng).unwrap();
        assert_eq!(s[0].aoa_az, 30.0);
        assert!(s.windows(2).all(|w| w[0].toa <= w[1].toa));
        assert!((s.iter().map(|x| x.power_frac_within_cluster).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sample_subpaths(12.0, 30.0, 0, 0.5, 5.0, &mut rng).is_err());
    }

    #[test]
    fn poisson_pmf_reference() {
        // P(N = 2) for lambda = 2.10
        let lambda: f64 = 2.10;
        let pmf = lambda.powi(2) * (-lambda).exp() / 2.0;
        assert!((pmf - 0.270).abs() < 5e-4);
        let mut rng = rng_from_seed(5);
        let n = 50_000;
        let hits = (0..n).filter(|_| sample_num_clusters(lambda, false, &mut rng).unwrap() == 2).count();
        assert!((hits as f64 / n as f64 - pmf).abs() < 0.01);
    }

    #[test]
    fn tiny_lambda_gives_no_nlos_clusters() {
        let mut rng = rng_from_seed(6);
        let zeros = (0..1000).filter(|_| sample_num_clusters(1e-9, false, &mut rng).unwrap() == 0).count();
        assert_eq!(zeros, 1000);
        assert_eq!(sample_num_clusters(1e-9, true, &mut rng).unwrap(), 1);
        assert!(sample_num_clusters(0.0, true, &mut rng).is_err());
    }

    #[test]
    fn hallway_first_arrival() {
        let kind = ScenarioKind::Hallway;
        let params = preset(kind);
        let layout = raytracer::DropLayout::preset(kind);
        let geom = layout.geometry_at(layout.rx_at_distance(30.0).unwrap());
        let sys = SystemParams::preset(kind);
        let real = generate(&params, &geom, &GenerateOptions::new(kind, &sys), 11).unwrap();
        assert!((real.distance - 30.0).abs() < 1e-9);
        assert!((real.clusters[0].toa - 100.07).abs() < 0.005);
        assert_eq!(real.clusters[0].origin, Origin::Los);
    }

    #[test]
    fn meeting_room_has_wall_clusters() {
        let kind = ScenarioKind::MeetingRoom;
        let params = preset(kind);
        let geom = RoomGeometry::preset(kind);
        let sys = SystemParams::preset(kind);
        let real = generate(&params, &geom, &GenerateOptions::new(kind, &sys), 3).unwrap();
        assert!(real.clusters.iter().any(|c| c.origin == Origin::Deterministic));
        let again = generate(&params, &geom, &GenerateOptions::new(kind, &sys), 3).unwrap();
        assert_eq!(real, again);
        let frac: f64 = real.clusters.iter().map(|c| c.power_frac).sum();
        assert!((frac - 1.0).abs() < 1e-12);
    }

    #[test]
    fn office_scenarios_have_no_traced_paths() {
        for kind in [ScenarioKind::CubicleArea, ScenarioKind::NLoS] {
            let params = preset(kind);
            let geom = RoomGeometry::preset(kind);
            let sys = SystemParams::preset(kind);
            for seed in 0..20 {
                let real = generate(&params, &geom, &GenerateOptions::new(kind, &sys), seed).unwrap();
                assert!(real.clusters.iter().all(|c| c.origin != Origin::Deterministic));
                assert!(real.subpaths().all(|(_, s)| !s.friis_scaled));
            }
        }
    }

    #[test]
    fn statistical_amplitudes_follow_ci_power() {
        let kind = ScenarioKind::CubicleArea;
        let params = preset(kind);
        let geom = RoomGeometry::preset(kind);
        let sys = SystemParams::preset(kind);
        let real = generate(&params, &geom, &GenerateOptions::new(kind, &sys), 8).unwrap();
        let pl = crate::db_to_lin(real.pl_omni_db);
        for c in &real.clusters {
            for s in &c.subpaths {
                let lhs = s.amplitude * s.amplitude * pl;
                assert!((lhs - c.power_frac * s.power_frac_within_cluster).abs() < 1e-12);
            }
        }
    }
}
