use thzsim::config::ScenarioSetup;
use thzsim::export::realization_to_json;
use thzsim::montecarlo::monte_carlo;
use thzsim::pipeline::*;
use thzsim::scenario::{ScenarioKind, SystemParams};
use thzsim::sounding::{full_scan, write_sweep};
use thzsim::stochastic::{generate, GenerateOptions};

#[test]
fn free_space_link_has_ple_two() {
    let sys = SystemParams::preset(ScenarioKind::MeetingRoom);
    let fit = free_space_fit(&sys, &[1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 20.0, 25.0], 1).unwrap();
    assert!((fit.ple - 2.0).abs() < 0.02, "{}", fit.ple);
}

#[test]
fn same_seed_same_bytes() {
    for kind in ScenarioKind::ALL {
        let setup = ScenarioSetup::preset(kind);
        let opts = GenerateOptions::new(kind, &setup.system);
        let geom = setup.layout.geometry_at(setup.layout.typical_rx);
        let run = || {
            let real = generate(&setup.params, &geom, &opts, 42).unwrap();
            let sweep = full_scan(&real, &setup.system, 42).unwrap();
            (realization_to_json(&real).unwrap(), write_sweep(&sweep).unwrap())
        };
        assert_eq!(run(), run());
        let a = serde_json::to_string(&monte_carlo(&setup, 50, 9, 1).unwrap()).unwrap();
        let b = serde_json::to_string(&monte_carlo(&setup, 50, 9, 3).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn different_seeds_differ() {
    let kind = ScenarioKind::CubicleArea;
    let setup = ScenarioSetup::preset(kind);
    let opts = GenerateOptions::new(kind, &setup.system);
    let geom = setup.layout.geometry_at(setup.layout.typical_rx);
    let a = generate(&setup.params, &geom, &opts, 1).unwrap();
    let b = generate(&setup.params, &geom, &opts, 2).unwrap();
    assert_ne!(a, b);
}

#[test]
fn sweep_analysis_finds_the_los_cluster() {
    let kind = ScenarioKind::MeetingRoom;
    let setup = ScenarioSetup::preset(kind);
    let opts = GenerateOptions::new(kind, &setup.system);
    let geom = setup.layout.geometry_at(setup.layout.typical_rx);
    let real = generate(&setup.params, &geom, &opts, 5).unwrap();
    let sweep = full_scan(&real, &setup.system, 5).unwrap();
    let (set, a) = analyze_sweep(&sweep, Default::default(), 1.0).unwrap();
    assert_eq!(set.len(), a.n_mpcs);
    assert!(!a.clusters.is_empty());
    let strongest = a.clusters.iter().max_by(|x, y| x.power.total_cmp(&y.power)).unwrap();
    // LoS arrives at 0 deg in the Rx frame, delayed by d / c
    assert!(strongest.aoa_az < 10.0 || strongest.aoa_az > 350.0);
    assert!((strongest.toa - thzsim::distance_to_ns(real.distance)).abs() < 0.5);
}
