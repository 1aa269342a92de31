//! TOML run configuration.
//!
//! A config file may set a master seed and drop count and override any
//! field of a scenario's parameters, sounder or drop layout:
//!
//! ```toml
//! seed = 7
//! drops = 1000
//!
//! [scenarios.hallway.params]
//! r_tau = 2.4
//!
//! [scenarios.meeting_room.system]
//! noise_floor_dbm = -150.0
//! ```
//!
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::raytracer::DropLayout;
use crate::scenario::{preset, ScenarioKind, ScenarioParams, SystemParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<toml::Table>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drops: Option<usize>,
    /// Keyed by scenario name (`meeting_room`, `cubicle_area`, `hallway`, `nlos`).
    #[serde(default)]
    pub scenarios: BTreeMap<String, Overrides>,
}

/// Everything needed to simulate one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSetup {
    pub params: ScenarioParams,
    pub system: SystemParams,
    pub layout: DropLayout,
}

impl ScenarioSetup {
    pub fn preset(kind: ScenarioKind) -> Self {
        ScenarioSetup {
            params: preset(kind),
            system: SystemParams::preset(kind),
            layout: DropLayout::preset(kind),
        }
    }
}

fn merge<T: Serialize + for<'de> Deserialize<'de>>(base: &T, patch: Option<&toml::Table>, what: &str) -> Result<T> {
    let Some(patch) = patch else {
        return Ok(serde_json::from_value(serde_json::to_value(base)?)?);
    };
    let mut v = serde_json::to_value(base)?;
    let p = serde_json::to_value(patch)?;
    let (Some(obj), Some(pobj)) = (v.as_object_mut(), p.as_object()) else {
        return Err(Error::Config(format!("{what}: expected a table")));
    };
    for (k, val) in pobj {
        obj.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| Error::Config(format!("{what}: {e}")))
}

impl Config {
    pub fn from_toml(s: &str) -> Result<Config> {
        let c: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        for name in c.scenarios.keys() {
            name.parse::<ScenarioKind>()?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn overrides(&self, kind: ScenarioKind) -> Option<&Overrides> {
        self.scenarios
            .iter()
            .find(|(k, _)| k.parse::<ScenarioKind>().ok() == Some(kind))
            .map(|(_, v)| v)
    }

    /// Presets of `kind` with this config's overrides applied.
    pub fn resolve(&self, kind: ScenarioKind) -> Result<ScenarioSetup> {
        let base = ScenarioSetup::preset(kind);
        let o = self.overrides(kind);
        let params: ScenarioParams = merge(&base.params, o.and_then(|o| o.params.as_ref()), "params")?;
        if params.kind != kind {
            return Err(Error::Config(format!("params.kind does not match scenario {kind}")));
        }
        params.validate()?;
        let system: SystemParams = merge(&base.system, o.and_then(|o| o.system.as_ref()), "system")?;
        system.validate()?;
        let layout: DropLayout = merge(&base.layout, o.and_then(|o| o.layout.as_ref()), "layout")?;
        Ok(ScenarioSetup { params, system, layout })
    }

    /// Record `params` as the parameter overrides of its scenario.
    pub fn set_params(&mut self, params: &ScenarioParams) -> Result<()> {
        let table: toml::Table = toml::Table::try_from(params).map_err(|e| Error::Config(e.to_string()))?;
        self.scenarios.entry(params.kind.as_str().to_string()).or_default().params = Some(table);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_presets() {
        let c = Config::from_toml("").unwrap();
        for kind in ScenarioKind::ALL {
            assert_eq!(c.resolve(kind).unwrap(), ScenarioSetup::preset(kind));
        }
    }

    #[test]
    fn partial_override() {
        let c = Config::from_toml(
            "seed = 3\n[scenarios.hallway.params]\nr_tau = 2.5\n[scenarios.hallway.system]\nnoise_floor_dbm = -150.0\n",
        )
        .unwrap();
        let s = c.resolve(ScenarioKind::Hallway).unwrap();
        assert_eq!(s.params.r_tau, 2.5);
        assert_eq!(s.params.lambda_n, preset(ScenarioKind::Hallway).lambda_n);
        assert_eq!(s.system.noise_floor_dbm, -150.0);
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.resolve(ScenarioKind::NLoS).unwrap(), ScenarioSetup::preset(ScenarioKind::NLoS));
    }

    #[test]
    fn rejects_typos_and_bad_values() {
        assert!(Config::from_toml("[scenarios.hallway.params]\nr_tua = 2.5\n")
            .unwrap()
            .resolve(ScenarioKind::Hallway)
            .is_err());
        assert!(Config::from_toml("[scenarios.atrium]\n").is_err());
        assert!(Config::from_toml("sed = 1\n").is_err());
        assert!(Config::from_toml("[scenarios.nlos.params]\nr_tau = 0.5\n")
            .unwrap()
            .resolve(ScenarioKind::NLoS)
            .is_err());
    }

    #[test]
    fn set_params_round_trips() {
        let mut c = Config::default();
        let mut p = preset(ScenarioKind::CubicleArea);
        p.r_phi = 1.37;
        c.set_params(&p).unwrap();
        let back = Config::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back.resolve(ScenarioKind::CubicleArea).unwrap().params, p);
    }
}
