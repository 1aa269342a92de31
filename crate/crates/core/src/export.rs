//! Serialisation of realizations.

use std::fmt::Write as _;

use crate::stochastic::{ChannelRealization, Origin};
use crate::Result;

pub fn realization_to_json(real: &ChannelRealization) -> Result<String> {
    Ok(serde_json::to_string_pretty(real)?)
}

pub fn realization_from_json(s: &str) -> Result<ChannelRealization> {
    Ok(serde_json::from_str(s)?)
}

/// One row per subpath:
/// `cluster,origin,toa_ns,aoa_az_deg,aoa_el_deg,amplitude,phase_rad`.
pub fn realization_to_csv(real: &ChannelRealization) -> String {
    let mut s = String::from("cluster,origin,toa_ns,aoa_az_deg,aoa_el_deg,amplitude,phase_rad\n");
    for (c, p) in real.subpaths() {
        let origin = match c.origin {
            Origin::Los => "los",
            Origin::Deterministic => "deterministic",
            Origin::Statistical => "statistical",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{}",
            c.index, origin, p.toa, p.aoa_az, p.aoa_el, p.amplitude, p.phase
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raytracer::RoomGeometry;
    use crate::scenario::{preset, ScenarioKind, SystemParams};
    use crate::stochastic::{generate, GenerateOptions};

    #[test]
    fn json_round_trip() {
        let kind = ScenarioKind::MeetingRoom;
        let sys = SystemParams::preset(kind);
        let real = generate(&preset(kind), &RoomGeometry::preset(kind), &GenerateOptions::new(kind, &sys), 5).unwrap();
        let back = realization_from_json(&realization_to_json(&real).unwrap()).unwrap();
        assert_eq!(back, real);
        let csv = realization_to_csv(&real);
        assert_eq!(csv.lines().count(), real.n_subpaths() + 1);
    }
}
