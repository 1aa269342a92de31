//! Measurement-analysis chain: CIR and PDAP construction, noise thresholding,
//! DBSCAN clustering over the multipath component distance, delay and angular
//! spreads, inter-cluster delays and normalized cluster loss.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::sounding::SoundingSweep;
use crate::{db_to_lin, lin_to_db, wrap_deg, Error, Result};

/// Dynamic range below the strongest MPC kept by [`noise_threshold`], dB.
pub const DYNAMIC_RANGE_DB: f64 = 40.0;
/// Margin above the noise floor kept by [`noise_threshold`], dB.
pub const NOISE_MARGIN_DB: f64 = 10.0;
pub const DEFAULT_MIN_PTS: usize = 5;
pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_ZETA: f64 = 5.0;

/// Noise-elimination threshold: `max(p_max - 40, nf + 10)` in dB.
pub fn noise_threshold(p_max_db: f64, nf_db: f64) -> f64 {
    (p_max_db - DYNAMIC_RANGE_DB).max(nf_db + NOISE_MARGIN_DB)
}

/// Inverse DFT of a uniformly sampled CTF, normalised by `1/N`.
///
/// Tap `k` corresponds to delay `k / (N df)`; delays beyond `1/df` wrap.
pub fn ctf_to_cir(ctf: &[Complex64]) -> Vec<Complex64> {
    let n = ctf.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = ctf.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

/// Forward DFT, the inverse of [`ctf_to_cir`].
pub fn cir_to_ctf(cir: &[Complex64]) -> Vec<Complex64> {
    let n = cir.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = cir.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf
}

/// Noise floor estimate from tap powers (linear): the median of an
/// exponential variable is `ln 2` times its mean, and most taps are noise.
pub fn estimate_noise_floor_db(tap_powers: &[f64]) -> f64 {
    if tap_powers.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut v: Vec<f64> = tap_powers.to_vec();
    let mid = v.len() / 2;
    let (_, median, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    lin_to_db(*median / std::f64::consts::LN_2)
}

/// One multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mpc {
    /// ns
    pub toa: f64,
    /// deg
    pub aoa_az: f64,
    /// deg
    pub aoa_el: f64,
    /// dB
    pub power_db: f64,
}

impl Mpc {
    pub fn power_lin(&self) -> f64 {
        db_to_lin(self.power_db)
    }

    fn unit(&self) -> [f64; 3] {
        let (az, el) = (self.aoa_az.to_radians(), self.aoa_el.to_radians());
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }
}

/// MPCs with optional cluster labels (`-1` = outlier).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MpcSet {
    pub mpcs: Vec<Mpc>,
    pub labels: Vec<i32>,
}

impl MpcSet {
    pub fn new(mpcs: Vec<Mpc>) -> Self {
        MpcSet { mpcs, labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.mpcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mpcs.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    /// Keep MPCs at or above `threshold_db`.
    pub fn thresholded(&self, threshold_db: f64) -> MpcSet {
        MpcSet::new(self.mpcs.iter().copied().filter(|m| m.power_db >= threshold_db).collect())
    }

    /// Per-cluster summaries, ordered by label.
    pub fn cluster_summaries(&self) -> Vec<ClusterSummary> {
        let k = self.n_clusters();
        let mut out: Vec<Option<ClusterSummary>> = vec![None; k];
        for (m, &l) in self.mpcs.iter().zip(&self.labels) {
            if l < 0 {
                continue;
            }
            let p = m.power_lin();
            let slot = &mut out[l as usize];
            match slot {
                None => {
                    *slot = Some(ClusterSummary {
                        toa: m.toa,
                        aoa_az: m.aoa_az,
                        aoa_el: m.aoa_el,
                        power: p,
                        peak_power: p,
                        n_mpcs: 1,
                        is_los: false,
                    })
                }
                Some(c) => {
                    c.power += p;
                    c.n_mpcs += 1;
                    if p > c.peak_power {
                        c.peak_power = p;
                        c.toa = m.toa;
                        c.aoa_az = m.aoa_az;
                        c.aoa_el = m.aoa_el;
                    }
                }
            }
        }
        out.into_iter().flatten().collect()
    }
}

/// Summary of one cluster: ToA and angles of its strongest MPC and its total power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub toa: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    /// Sum of member powers, linear.
    pub power: f64,
    pub peak_power: f64,
    pub n_mpcs: usize,
    pub is_los: bool,
}

/// Power-delay-angular profile on the sounder grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pdap {
    /// ns
    pub delay_axis: Vec<f64>,
    pub az_axis: Vec<f64>,
    pub el_axis: Vec<f64>,
    /// dB, indexed `[(el * n_az + az) * n_delay + delay]`; `None` below threshold.
    pub power: Vec<Option<f64>>,
    pub noise_floor: f64,
    pub threshold: f64,
}

impl Pdap {
    /// Build the PDAP of a sweep. The noise floor is estimated from the data.
    pub fn from_sweep(sweep: &SoundingSweep) -> Pdap {
        let sys = &sweep.system;
        let n = sys.n_sweep;
        let dt = sys.tap_spacing_ns();
        let mut lin = Vec::with_capacity(sweep.ctf.len());
        for dir in sweep.ctf.chunks(n) {
            lin.extend(ctf_to_cir(dir).iter().map(|c| c.norm_sqr()));
        }
        let p_max = lin.iter().copied().fold(0.0, f64::max);
        let nf = estimate_noise_floor_db(&lin);
        let th = noise_threshold(lin_to_db(p_max), nf);
        let power = lin
            .iter()
            .map(|&p| {
                let db = lin_to_db(p);
                (p > 0.0 && db >= th).then_some(db)
            })
            .collect();
        Pdap {
            delay_axis: (0..n).map(|k| k as f64 * dt).collect(),
            az_axis: sys.az_grid.clone(),
            el_axis: sys.el_grid.clone(),
            power,
            noise_floor: nf,
            threshold: th,
        }
    }

    /// All retained entries as MPCs.
    pub fn mpcs(&self) -> MpcSet {
        let nd = self.delay_axis.len();
        let na = self.az_axis.len();
        let mut out = Vec::new();
        for (idx, p) in self.power.iter().enumerate() {
            if let Some(db) = p {
                let d = idx % nd;
                let a = (idx / nd) % na;
                let e = idx / (nd * na);
                out.push(Mpc {
                    toa: self.delay_axis[d],
                    aoa_az: self.az_axis[a],
                    aoa_el: self.el_axis[e],
                    power_db: *db,
                });
            }
        }
        MpcSet::new(out)
    }

    /// CSV `delay_ns,az_deg,el_deg,power_db`; sub-threshold entries are omitted.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delay_ns,az_deg,el_deg,power_db\n");
        for m in &self.mpcs().mpcs {
            s.push_str(&format!("{:.4},{:.1},{:.1},{:.3}\n", m.toa, m.aoa_az, m.aoa_el, m.power_db));
        }
        s
    }
}

/// Multipath component distance between `a` and `b`.
///
/// Angular part: half the Euclidean distance between arrival unit vectors.
/// Delay part: `zeta * |dtau| / dtau_max * tau_std / dtau_max`.
pub fn mcd(a: &Mpc, b: &Mpc, tau_scale: f64) -> f64 {
    let (ua, ub) = (a.unit(), b.unit());
    mcd_parts(ua, ub, (a.toa - b.toa).abs() * tau_scale)
}

fn mcd_parts(ua: [f64; 3], ub: [f64; 3], delay_part: f64) -> f64 {
    let d2: f64 = (0..3).map(|k| (ua[k] - ub[k]).powi(2)).sum();
    let ang = 0.5 * d2.sqrt();
    (ang * ang + delay_part * delay_part).sqrt()
}

/// Delay scaling `zeta * tau_std / dtau_max^2` for a set of ToAs (0 if degenerate).
pub fn mcd_delay_scale(toas: &[f64], zeta: f64) -> f64 {
    if toas.len() < 2 {
        return 0.0;
    }
    let (lo, hi) = toas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| (l.min(t), h.max(t)));
    let range = hi - lo;
    if !(range > 0.0) {
        return 0.0;
    }
    let n = toas.len() as f64;
    let mean = toas.iter().sum::<f64>() / n;
    let std = (toas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    zeta * std / (range * range)
}

/// DBSCAN parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub min_pts: usize,
    pub eps: f64,
    pub zeta: f64,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            min_pts: DEFAULT_MIN_PTS,
            eps: DEFAULT_EPS,
            zeta: DEFAULT_ZETA,
        }
    }
}

/// DBSCAN over the MCD metric.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Labels are canonical: clusters are numbered by the
/// earliest-arriving member (ties broken by azimuth, then elevation), so
/// the labelling does not depend on input order. Clusters that end up with
/// fewer than `min_pts` members after border assignment are demoted to
/// outliers.
pub fn dbscan_mcd(mpcs: &MpcSet, params: DbscanParams) -> Result<MpcSet> {
    if mpcs.is_empty() {
        return Err(Error::InsufficientData("no MPCs to cluster".into()));
    }
    if params.min_pts == 0 {
        return Err(Error::param("min_pts", "must be >= 1"));
    }
    let pts = &mpcs.mpcs;
    let n = pts.len();
    // visit in canonical order so results are permutation invariant
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| canonical_cmp(&pts[i], &pts[j]));
    let toas: Vec<f64> = order.iter().map(|&i| pts[i].toa).collect();
    let units: Vec<[f64; 3]> = order.iter().map(|&i| pts[i].unit()).collect();
    let scale = mcd_delay_scale(&toas, params.zeta);
    // the delay part alone bounds the MCD, so only a ToA window needs scanning
    let window = if scale > 0.0 { params.eps / scale } else { f64::INFINITY };

    let neighbours = |i: usize| -> Vec<usize> {
        let lo = toas.partition_point(|&t| t < toas[i] - window);
        let hi = toas.partition_point(|&t| t <= toas[i] + window);
        (lo..hi)
            .filter(|&j| mcd_parts(units[i], units[j], (toas[i] - toas[j]).abs() * scale) <= params.eps)
            .collect()
    };

    const UNVISITED: i32 = -2;
    let mut lab = vec![UNVISITED; n];
    let mut next = 0i32;
    for i in 0..n {
        if lab[i] != UNVISITED {
            continue;
        }
        let nb = neighbours(i);
        if nb.len() < params.min_pts {
            lab[i] = -1;
            continue;
        }
        let c = next;
        next += 1;
        lab[i] = c;
        let mut queue: Vec<usize> = nb;
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if lab[j] == -1 {
                lab[j] = c;
            }
            if lab[j] != UNVISITED {
                continue;
            }
            lab[j] = c;
            let nb_j = neighbours(j);
            if nb_j.len() >= params.min_pts {
                queue.extend(nb_j);
            }
        }
    }

    // demote undersized clusters and renumber densely
    let mut counts = vec![0usize; next as usize];
    for &l in &lab {
        if l >= 0 {
            counts[l as usize] += 1;
        }
    }
    let mut remap = vec![-1i32; next as usize];
    let mut k = 0;
    for &l in &lab {
        if l >= 0 && remap[l as usize] < 0 && counts[l as usize] >= params.min_pts {
            remap[l as usize] = k;
            k += 1;
        }
    }
    let mut labels = vec![-1i32; n];
    for (pos, &orig) in order.iter().enumerate() {
        let l = lab[pos];
        labels[orig] = if l >= 0 { remap[l as usize] } else { -1 };
    }
    Ok(MpcSet {
        mpcs: pts.clone(),
        labels,
    })
}

fn canonical_cmp(a: &Mpc, b: &Mpc) -> std::cmp::Ordering {
    a.toa
        .total_cmp(&b.toa)
        .then(a.aoa_az.total_cmp(&b.aoa_az))
        .then(a.aoa_el.total_cmp(&b.aoa_el))
        .then(b.power_db.total_cmp(&a.power_db))
}

/// Power-weighted RMS delay spread, ns.
pub fn rms_delay_spread(mpcs: &[Mpc]) -> Result<f64> {
    if mpcs.is_empty() {
        return Err(Error::InsufficientData("delay spread of an empty set".into()));
    }
    let w: Vec<f64> = mpcs.iter().map(Mpc::power_lin).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("zero total power".into()));
    }
    let mean = mpcs.iter().zip(&w).map(|(m, p)| m.toa * p).sum::<f64>() / total;
    let var = mpcs.iter().zip(&w).map(|(m, p)| (m.toa - mean).powi(2) * p).sum::<f64>() / total;
    Ok(var.max(0.0).sqrt())
}

/// RMS azimuth spread minimised over reference offsets `j * offset_step`, degrees.
pub fn rms_asa(mpcs: &[Mpc], offset_step: f64) -> Result<f64> {
    if mpcs.is_empty() {
        return Err(Error::InsufficientData("angular spread of an empty set".into()));
    }
    if !(offset_step > 0.0) {
        return Err(Error::param("offset_step", "must be > 0"));
    }
    let w: Vec<f64> = mpcs.iter().map(Mpc::power_lin).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("zero total power".into()));
    }
    let n_off = (360.0 / offset_step).ceil() as usize;
    let mut best = f64::INFINITY;
    let mut rot = vec![0.0; mpcs.len()];
    for j in 0..n_off {
        let off = j as f64 * offset_step;
        for (r, m) in rot.iter_mut().zip(mpcs) {
            *r = wrap_deg(m.aoa_az + off);
        }
        let mean = rot.iter().zip(&w).map(|(a, p)| a * p).sum::<f64>() / total;
        let var = rot.iter().zip(&w).map(|(a, p)| (a - mean).powi(2) * p).sum::<f64>() / total;
        best = best.min(var.max(0.0).sqrt());
    }
    Ok(best)
}

/// Sorted adjacent differences of cluster ToAs.
pub fn inter_cluster_delays(toas: &[f64]) -> Result<Vec<f64>> {
    if toas.len() < 2 {
        return Err(Error::InsufficientData("need at least two clusters".into()));
    }
    let mut t = toas.to_vec();
    t.sort_by(f64::total_cmp);
    Ok(t.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Strength class of a non-reference cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlosClass {
    Strongest,
    SecondStrongest,
    Weak,
}

/// One (excess delay, normalized cluster loss) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnlPoint {
    pub excess_delay: f64,
    pub cnl_db: f64,
    pub class: NlosClass,
}

/// Least-squares line through CNL points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnlFit {
    /// dB/ns
    pub slope: f64,
    /// dB
    pub intercept: f64,
    /// Pearson correlation; NaN when either variable is constant.
    pub corr: f64,
    pub points: Vec<CnlPoint>,
}

/// CNL points of one channel. The reference is the cluster flagged `is_los`,
/// or the first-arriving cluster when none is flagged.
pub fn cnl_points(clusters: &[ClusterSummary]) -> Result<Vec<CnlPoint>> {
    if clusters.is_empty() {
        return Err(Error::InsufficientData("no clusters".into()));
    }
    let ref_idx = clusters.iter().position(|c| c.is_los).unwrap_or_else(|| {
        clusters
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.toa.total_cmp(&b.1.toa))
            .map(|(i, _)| i)
            .unwrap()
    });
    let r = clusters[ref_idx];
    let mut others: Vec<&ClusterSummary> =
        clusters.iter().enumerate().filter(|(i, _)| *i != ref_idx).map(|(_, c)| c).collect();
    others.sort_by(|a, b| b.power.total_cmp(&a.power));
    Ok(others
        .iter()
        .enumerate()
        .map(|(rank, c)| CnlPoint {
            excess_delay: c.toa - r.toa,
            cnl_db: lin_to_db(r.power / c.power),
            class: match rank {
                0 => NlosClass::Strongest,
                1 => NlosClass::SecondStrongest,
                _ => NlosClass::Weak,
            },
        })
        .collect())
}

/// Fit a line to CNL versus excess delay.
pub fn cnl_regression(points: &[CnlPoint]) -> Result<CnlFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least two NLoS clusters".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.excess_delay).collect();
    let y: Vec<f64> = points.iter().map(|p| p.cnl_db).collect();
    let (slope, intercept, corr) = linear_fit(&x, &y)?;
    Ok(CnlFit {
        slope,
        intercept,
        corr,
        points: points.to_vec(),
    })
}

/// CNL slope with a free intercept per channel: each channel's points are
/// centred on their own means before pooling. This removes the per-channel
/// normalisation offset of the reference cluster.
pub fn cnl_within_slope(channels: &[Vec<CnlPoint>]) -> Result<f64> {
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for pts in channels.iter().filter(|p| p.len() >= 2) {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.excess_delay).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.cnl_db).sum::<f64>() / n;
        for p in pts {
            sxx += (p.excess_delay - mx).powi(2);
            sxy += (p.excess_delay - mx) * (p.cnl_db - my);
        }
    }
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("need channels with two or more spread NLoS clusters".into()));
    }
    Ok(sxy / sxx)
}

/// Ordinary least squares `y = slope x + intercept` and Pearson correlation.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("excess delays are all equal".into()));
    }
    let slope = sxy / sxx;
    let corr = if syy > 0.0 { sxy / (sxx * syy).sqrt() } else { f64::NAN };
    Ok((slope, my - slope * mx, corr))
}

/// Mean and (population) standard deviation of `ln(x)`.
pub fn lognormal_fit(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() || samples.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InsufficientData("log-normal fit needs positive samples".into()));
    }
    let logs: Vec<f64> = samples.iter().map(|s| s.ln()).collect();
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt()))
}

/// One-sample Kolmogorov-Smirnov test against Exponential(mean).
/// Returns `(D, p_value)` using the asymptotic Kolmogorov distribution.
pub fn ks_exponential(samples: &[f64], mean: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("KS test needs samples".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let cdf = 1.0 - (-v.max(0.0) / mean).exp();
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok((d, kolmogorov_q(lambda)))
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // the alternating series converges slowly here; use the dual form
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let sum: f64 = (1..=6).map(|k| y.powi((2 * k - 1) * (2 * k - 1))).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Per-realization statistics record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub ds_ns: f64,
    pub asa_deg: f64,
    pub n_clusters: usize,
    pub gaps_ns: Vec<f64>,
    pub cnl_points: Vec<CnlPoint>,
}
