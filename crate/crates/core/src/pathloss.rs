//! Close-in (CI) path-loss model, free-space loss, and the directional
//! path-loss estimators applied to a sounding sweep.

use serde::{Deserialize, Serialize};

use crate::analysis::ctf_to_cir;
use crate::sounding::SoundingSweep;
use crate::{lin_to_db, Error, Result, SPEED_OF_LIGHT};

/// Reference distance of the CI model, m.
pub const D0: f64 = 1.0;

/// Free-space path loss `-20 log10(c / (4 pi f d0))` in dB, `f` in GHz.
pub fn fspl(d0: f64, f_ghz: f64) -> Result<f64> {
    if !(d0 > 0.0) {
        return Err(Error::param("d0", "must be > 0"));
    }
    if !(f_ghz > 0.0) {
        return Err(Error::param("f", "must be > 0"));
    }
    Ok(-20.0 * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f_ghz * 1e9 * d0)).log10())
}

/// Close-in free-space reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiModel {
    pub ple: f64,
    pub d0: f64,
    /// Shadow-fading standard deviation, dB.
    pub sigma_sf: f64,
    /// GHz
    pub f_ref: f64,
}

impl CiModel {
    pub fn new(ple: f64, f_ref: f64) -> Self {
        CiModel {
            ple,
            d0: D0,
            sigma_sf: 0.0,
            f_ref,
        }
    }

    /// Path loss at `d` with an explicit shadowing term, dB.
    pub fn eval(&self, d: f64, shadowing_db: f64) -> Result<f64> {
        ci_eval(self, d, shadowing_db)
    }

    /// Linear path loss (>= 1 for lossy links) without shadowing.
    pub fn linear(&self, d: f64) -> Result<f64> {
        Ok(10f64.powf(self.eval(d, 0.0)? / 10.0))
    }
}

/// `10 PLE log10(d/d0) + FSPL(d0) + shadowing`.
pub fn ci_eval(model: &CiModel, d: f64, shadowing_db: f64) -> Result<f64> {
    if !(d >= model.d0) {
        return Err(Error::param("d", format!("must be >= d0 = {} m", model.d0)));
    }
    Ok(10.0 * model.ple * (d / model.d0).log10() + fspl(model.d0, model.f_ref)? + shadowing_db)
}

/// MMSE fit of the PLE with the intercept pinned at FSPL(d0).
pub fn ci_fit(samples: &[(f64, f64)], f_ghz: f64) -> Result<CiModel> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("CI fit needs at least two samples".into()));
    }
    if samples.iter().any(|&(d, pl)| !(d >= D0) || !pl.is_finite()) {
        return Err(Error::param("samples", "distances must be >= d0 and losses finite"));
    }
    let anchor = fspl(D0, f_ghz)?;
    let x: Vec<f64> = samples.iter().map(|&(d, _)| 10.0 * (d / D0).log10()).collect();
    let y: Vec<f64> = samples.iter().map(|&(_, pl)| pl - anchor).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let d_first = samples[0].0;
    if samples.iter().all(|&(d, _)| d == d_first) || !(sxx > 0.0) {
        return Err(Error::InsufficientData("PLE unidentifiable: distances do not vary".into()));
    }
    let ple = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let ssr: f64 = x.iter().zip(&y).map(|(a, b)| (b - ple * a).powi(2)).sum();
    Ok(CiModel {
        ple,
        d0: D0,
        sigma_sf: (ssr / samples.len() as f64).sqrt(),
        f_ref: f_ghz,
    })
}

/// Best-direction path loss from the band-averaged |H|^2 (LoS estimator).
pub fn pl_best_los(sweep: &SoundingSweep) -> Result<f64> {
    let n = sweep.system.n_sweep;
    if sweep.ctf.is_empty() {
        return Err(Error::InsufficientData("sweep has no directions".into()));
    }
    let best = sweep
        .ctf
        .chunks(n)
        .map(|h| h.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64)
        .fold(0.0, f64::max);
    Ok(-lin_to_db(best))
}

/// Energy of the `w` strongest CIR taps of every direction.
pub fn windowed_direction_powers(sweep: &SoundingSweep, w: usize) -> Result<Vec<f64>> {
    if w < 1 {
        return Err(Error::param("w", "must be >= 1"));
    }
    let n = sweep.system.n_sweep;
    if sweep.ctf.is_empty() {
        return Err(Error::InsufficientData("sweep has no directions".into()));
    }
    Ok(sweep
        .ctf
        .chunks(n)
        .map(|h| {
            let mut p: Vec<f64> = ctf_to_cir(h).iter().map(|c| c.norm_sqr()).collect();
            p.sort_by(|a, b| b.total_cmp(a));
            p.iter().take(w).sum()
        })
        .collect())
}

/// Best-direction path loss from the `w` strongest CIR taps (NLoS estimator).
pub fn pl_best_nlos(sweep: &SoundingSweep, w: usize) -> Result<f64> {
    let p = windowed_direction_powers(sweep, w)?;
    Ok(-lin_to_db(p.into_iter().fold(0.0, f64::max)))
}

/// Omni-directional path loss: windowed power summed over all directions.
pub fn pl_omni(sweep: &SoundingSweep, w: usize) -> Result<f64> {
    let p = windowed_direction_powers(sweep, w)?;
    Ok(-lin_to_db(p.iter().sum()))
}

/// Reflection loss of a cluster: its loss relative to `p_tx` minus the Friis
/// spreading loss at the cluster delay (`toa_ns`, strongest MPC).
pub fn reflection_loss(cluster_power: f64, p_tx: f64, f_ghz: f64, toa_ns: f64) -> Result<f64> {
    if !(toa_ns > 0.0) {
        return Err(Error::param("toa", "must be > 0"));
    }
    if !(cluster_power > 0.0 && p_tx > 0.0) {
        return Err(Error::param("power", "must be > 0"));
    }
    let spreading = 20.0 * (4.0 * std::f64::consts::PI * f_ghz * toa_ns).log10();
    Ok(-lin_to_db(cluster_power / p_tx) - spreading)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fspl_values() {
        assert!((fspl(1.0, 205.0).unwrap() - 78.683).abs() < 0.001);
        assert!((fspl(1.0, 140.0).unwrap() - 75.370).abs() < 0.001);
        let step = fspl(2.0, 205.0).unwrap() - fspl(1.0, 205.0).unwrap();
        assert!((step - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(fspl(0.0, 205.0).is_err());
    }

    #[test]
    fn ci_eval_values() {
        let m = CiModel::new(2.13, 205.0);
        assert!((m.eval(10.0, 0.0).unwrap() - 99.983).abs() < 0.001);
        assert_eq!(m.eval(1.0, 0.0).unwrap(), fspl(1.0, 205.0).unwrap());
        let h = CiModel::new(1.50, 205.0);
        assert!((h.eval(30.0, 0.0).unwrap() - 100.840).abs() < 0.001);
        assert!(m.eval(0.5, 0.0).is_err());
    }

    #[test]
    fn ci_fit_exact_recovery() {
        let m = CiModel::new(2.13, 205.0);
        let s: Vec<(f64, f64)> = [2.0, 3.5, 7.0, 12.0].iter().map(|&d| (d, m.eval(d, 0.0).unwrap())).collect();
        let fit = ci_fit(&s, 205.0).unwrap();
        assert!((fit.ple - 2.13).abs() < 1e-9);
        assert!(fit.sigma_sf < 1e-9);
    }

    #[test]
    fn ci_fit_rejects_equal_distances() {
        assert!(ci_fit(&[(3.0, 90.0), (3.0, 91.0)], 205.0).is_err());
        assert!(ci_fit(&[(3.0, 90.0)], 205.0).is_err());
        assert!(ci_fit(&[(1.0, 78.0), (1.0, 79.0)], 205.0).is_err());
    }

    #[test]
    fn reflection_loss_of_friis_path_is_zero() {
        let toa = crate::distance_to_ns(4.0);
        let g = crate::raytracer::friis_amplitude(toa, 205.0, 0.0).unwrap();
        assert!(reflection_loss(g * g, 1.0, 205.0, toa).unwrap().abs() < 1e-9);
        let g = crate::raytracer::friis_amplitude(toa, 205.0, 15.0).unwrap();
        assert!((reflection_loss(g * g, 1.0, 205.0, toa).unwrap() - 15.0).abs() < 1e-9);
        assert!(reflection_loss(1e-9, 1.0, 205.0, 0.0).is_err());
    }
}
