//! Synthetic VNA sounding: frequency sweeps of a realization seen through a
//! rotating horn, with additive receiver noise, plus de-embedding of a
//! calibrated measurement and a plain-text sweep file format.

use std::fmt::Write as _;
use std::io::BufRead;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::sub_stream;
use crate::scenario::SystemParams;
use crate::stochastic::ChannelRealization;
use crate::{db_to_lin, Error, Result};

/// Normalised antenna power pattern, peak gain 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaPattern {
    Omni,
    /// `exp(-4 ln2 (psi / hpbw)^2)`, optionally floored at `floor_db`.
    Gaussian { hpbw: f64, floor_db: Option<f64> },
}

impl AntennaPattern {
    pub fn gaussian(hpbw: f64, floor_db: f64) -> Self {
        AntennaPattern::Gaussian {
            hpbw,
            floor_db: Some(floor_db),
        }
    }

    /// Power gain at `psi_deg` off boresight.
    pub fn gain(&self, psi_deg: f64) -> f64 {
        match *self {
            AntennaPattern::Omni => 1.0,
            AntennaPattern::Gaussian { hpbw, floor_db } => {
                let g = (-4.0 * std::f64::consts::LN_2 * (psi_deg / hpbw).powi(2)).exp();
                match floor_db {
                    Some(f) => g.max(db_to_lin(f)),
                    None => g,
                }
            }
        }
    }

    pub fn amplitude(&self, psi_deg: f64) -> f64 {
        self.gain(psi_deg).sqrt()
    }
}

fn unit(az_deg: f64, el_deg: f64) -> [f64; 3] {
    let (a, e) = (az_deg.to_radians(), el_deg.to_radians());
    [e.cos() * a.cos(), e.cos() * a.sin(), e.sin()]
}

/// Angle in degrees between two (az, el) directions.
pub fn angle_between(az1: f64, el1: f64, az2: f64, el2: f64) -> f64 {
    let (u, v) = (unit(az1, el1), unit(az2, el2));
    let c = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Options of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub rx_pattern: AntennaPattern,
    pub noise: bool,
}

impl ScanOptions {
    pub fn new(system: &SystemParams) -> Self {
        ScanOptions {
            rx_pattern: AntennaPattern::gaussian(system.rx_hpbw, system.sidelobe_db),
            noise: true,
        }
    }
}

/// Noiseless CTF seen by the Rx horn pointing at `(rx_az, rx_el)`.
pub fn synthesize_ctf(
    real: &ChannelRealization,
    system: &SystemParams,
    rx_pattern: &AntennaPattern,
    rx_az: f64,
    rx_el: f64,
) -> Vec<Complex64> {
    let n = system.n_sweep;
    let f0 = system.f_start;
    let df = system.sweep_interval_ghz();
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for (_, s) in real.subpaths() {
        let g = rx_pattern.amplitude(angle_between(rx_az, rx_el, s.aoa_az, s.aoa_el));
        let a = s.amplitude * g;
        if a == 0.0 {
            continue;
        }
        let tau = s.toa;
        for (k, hk) in h.iter_mut().enumerate() {
            let f = f0 + k as f64 * df;
            let amp = if s.friis_scaled { a * real.f_ref / f } else { a };
            let phi = s.phase - std::f64::consts::TAU * (f * tau).fract();
            *hk += Complex64::from_polar(amp, phi);
        }
    }
    h
}

/// Add complex Gaussian noise whose per-tap CIR power equals the floor.
pub fn add_noise<R: Rng + ?Sized>(ctf: &mut [Complex64], system: &SystemParams, rng: &mut R) {
    let var = ctf.len() as f64 * db_to_lin(system.noise_floor_dbm - system.tx_power_dbm);
    let s = (var / 2.0).sqrt();
    for h in ctf {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *h += Complex64::new(s * re, s * im);
    }
}

/// A full directional scan. `ctf` holds `n_sweep` samples per direction,
/// directions ordered by elevation then azimuth of `system`'s grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundingSweep {
    pub system: SystemParams,
    pub ctf: Vec<Complex64>,
    pub seed: u64,
    #[serde(skip)]
    pub truth: Option<ChannelRealization>,
}

impl SoundingSweep {
    pub fn n_directions(&self) -> usize {
        self.ctf.len() / self.system.n_sweep
    }

    /// CTF of direction `(el_idx, az_idx)`.
    pub fn direction(&self, el_idx: usize, az_idx: usize) -> &[Complex64] {
        let n = self.system.n_sweep;
        let d = el_idx * self.system.az_grid.len() + az_idx;
        &self.ctf[d * n..(d + 1) * n]
    }
}

/// Scan every grid direction with the default Rx horn and noise on.
pub fn full_scan(real: &ChannelRealization, system: &SystemParams, seed: u64) -> Result<SoundingSweep> {
    full_scan_with(real, system, &ScanOptions::new(system), seed)
}

/// Scan every grid direction. Noise of direction `d` comes from stream `d`
/// of `seed`, so any subset of directions can be reproduced independently.
pub fn full_scan_with(
    real: &ChannelRealization,
    system: &SystemParams,
    opts: &ScanOptions,
    seed: u64,
) -> Result<SoundingSweep> {
    system.validate()?;
    let mut ctf = Vec::with_capacity(system.n_sweep * system.az_grid.len() * system.el_grid.len());
    let mut d = 0u64;
    for &el in &system.el_grid {
        for &az in &system.az_grid {
            let mut h = synthesize_ctf(real, system, &opts.rx_pattern, az, el);
            if opts.noise {
                add_noise(&mut h, system, &mut sub_stream(seed, d));
            }
            ctf.extend(h);
            d += 1;
        }
    }
    Ok(SoundingSweep {
        system: system.clone(),
        ctf,
        seed,
        truth: Some(real.clone()),
    })
}

/// De-embed a measurement: `H = S_meas * H_att / S_cal` per frequency.
pub fn calibrate_ctf(s_meas: &[Complex64], s_cal: &[Complex64], h_att: &[Complex64]) -> Result<Vec<Complex64>> {
    if s_meas.len() != s_cal.len() || s_meas.len() != h_att.len() {
        return Err(Error::param("calibration", "sweeps must have equal length"));
    }
    if s_cal.iter().any(|c| c.norm_sqr() == 0.0 || !c.is_finite()) {
        return Err(Error::param("s_cal", "contains zero or non-finite samples"));
    }
    Ok(s_meas.iter().zip(s_cal).zip(h_att).map(|((m, c), a)| m * a / c).collect())
}

const SWEEP_MAGIC: &str = "# thzsim-sweep v1";

/// Serialise a sweep as text: a version line, the system as JSON, the
/// seed, then `el_deg,az_deg,f_ghz,re,im` rows.
pub fn write_sweep(sweep: &SoundingSweep) -> Result<String> {
    let sys = &sweep.system;
    let freqs = sys.frequencies();
    let mut s = String::new();
    let _ = writeln!(s, "{SWEEP_MAGIC}");
    let _ = writeln!(s, "# system {}", serde_json::to_string(sys)?);
    let _ = writeln!(s, "# seed {}", sweep.seed);
    s.push_str("el_deg,az_deg,f_ghz,re,im\n");
    let mut it = sweep.ctf.iter();
    for &el in &sys.el_grid {
        for &az in &sys.az_grid {
            for &f in &freqs {
                let h = it.next().ok_or_else(|| Error::InsufficientData("sweep is truncated".into()))?;
                let _ = writeln!(s, "{el},{az},{f},{},{}", h.re, h.im);
            }
        }
    }
    Ok(s)
}

/// Parse the output of [`write_sweep`].
pub fn read_sweep<R: BufRead>(reader: R) -> Result<SoundingSweep> {
    let mut lines = reader.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Config("unexpected end of sweep file".into()))
    };
    if next()?.trim() != SWEEP_MAGIC {
        return Err(Error::Config("not a v1 sweep file".into()));
    }
    let sys_line = next()?;
    let system: SystemParams = serde_json::from_str(
        sys_line
            .strip_prefix("# system ")
            .ok_or_else(|| Error::Config("missing system line".into()))?,
    )?;
    let seed_line = next()?;
    let seed = seed_line
        .strip_prefix("# seed ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Config("missing seed line".into()))?;
    next()?;
    let expected = system.n_sweep * system.az_grid.len() * system.el_grid.len();
    let mut ctf = Vec::with_capacity(expected);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Config(format!("bad sweep row: {line}")));
        }
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("{e}: {line}")));
        ctf.push(Complex64::new(parse(cols[3])?, parse(cols[4])?));
    }
    if ctf.len() != expected {
        return Err(Error::Config(format!("expected {expected} samples, found {}", ctf.len())));
    }
    Ok(SoundingSweep {
        system,
        ctf,
        seed,
        truth: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_pattern_values() {
        let p = AntennaPattern::Gaussian {
            hpbw: 10.0,
            floor_db: None,
        };
        assert_eq!(p.gain(0.0), 1.0);
        assert!((p.gain(5.0) - 0.5).abs() < 1e-12);
        // 90 deg off a 10 deg beam is suppressed far beyond 40 dB
        assert!(crate::lin_to_db(p.gain(90.0)) < -40.0);
        let floored = AntennaPattern::gaussian(10.0, -30.0);
        assert!((crate::lin_to_db(floored.gain(90.0)) + 30.0).abs() < 1e-9);
        assert_eq!(AntennaPattern::Omni.gain(123.0), 1.0);
    }

    #[test]
    fn angle_between_wraps() {
        assert!((angle_between(350.0, 0.0, 10.0, 0.0) - 20.0).abs() < 1e-9);
        assert!((angle_between(0.0, 0.0, 0.0, 20.0) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn calibration_rejects_zero() {
        let one = vec![Complex64::new(1.0, 0.0); 3];
        let mut cal = one.clone();
        cal[1] = Complex64::new(0.0, 0.0);
        assert!(calibrate_ctf(&one, &cal, &one).is_err());
        assert!(calibrate_ctf(&one, &one[..2], &one).is_err());
    }

    #[test]
    fn calibration_recovers_channel() {
        let h: Vec<Complex64> = (0..5).map(|k| Complex64::from_polar(1e-4, k as f64)).collect();
        let sys: Vec<Complex64> = (0..5).map(|k| Complex64::from_polar(3.0 + k as f64, -0.3 * k as f64)).collect();
        let att = vec![Complex64::new(1e-3, 0.0); 5];
        let meas: Vec<Complex64> = h.iter().zip(&sys).map(|(a, b)| a * b).collect();
        let cal: Vec<Complex64> = sys.iter().zip(&att).map(|(a, b)| a * b).collect();
        let out = calibrate_ctf(&meas, &cal, &att).unwrap();
        for (a, b) in out.iter().zip(&h) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
