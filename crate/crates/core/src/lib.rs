//! Hybrid ray-tracing / statistical channel simulator for indoor links in the
//! 201-209 GHz band, together with the analysis chain used to check it:
//! synthetic VNA sounding, PDAP construction, DBSCAN clustering over the
//! multipath component distance, CI path-loss fitting and spread statistics.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: per-scenario fitted parameters and measurement-system presets.
//! - [`raytracer`]: image-method tracing of boundary reflections in a box room.
//! - [`stochastic`]: cluster/subpath sampling and realization assembly.
//! - [`pathloss`]: FSPL, CI model evaluation/fitting and the directional estimators.
//! - [`analysis`]: CIR/PDAP, thresholding, clustering, DS/ASA and cluster statistics.
//! - [`sounding`]: frequency-sweep synthesis with beam scanning and calibration.
//! - [`calibrate`]: Monte-Carlo search of the free model parameters.
//! - [`config`]: TOML overrides of presets and geometry.
//! - [`montecarlo`]: seeded drop batches and their summaries.
//! - [`pipeline`]: generate, sound, analyze and fit in one call.
//! - [`export`]: JSON/CSV output of realizations.

pub mod analysis;
pub mod calibrate;
pub mod config;
pub mod export;
pub mod montecarlo;
pub mod pathloss;
pub mod pipeline;
pub mod raytracer;
pub mod rng;
pub mod scenario;
pub mod sounding;
pub mod stochastic;

mod error;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Convert a propagation distance in metres to a delay in nanoseconds.
#[inline]
pub fn distance_to_ns(d_m: f64) -> f64 {
    d_m / SPEED_OF_LIGHT * 1e9
}

/// Convert a delay in nanoseconds to a propagation distance in metres.
#[inline]
pub fn ns_to_distance(tau_ns: f64) -> f64 {
    tau_ns * 1e-9 * SPEED_OF_LIGHT
}

#[inline]
pub(crate) fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub(crate) fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Wrap an angle in degrees into `[0, 360)`.
#[inline]
pub fn wrap_deg(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    // rem_euclid can return exactly 360.0 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}
