use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thzsim::analysis::*;
use thzsim::scenario::{ScenarioKind, SystemParams};
use thzsim::sounding::{synthesize_ctf, AntennaPattern};
use thzsim::stochastic::{ChannelRealization, Cluster, Origin, Subpath};

fn mpc(toa: f64, az: f64, el: f64, p_db: f64) -> Mpc {
    Mpc {
        toa,
        aoa_az: az,
        aoa_el: el,
        power_db: p_db,
    }
}

proptest! {
    #[test]
    fn ctf_cir_round_trip(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..300)) {
        let ctf: Vec<Complex64> = v.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let back = cir_to_ctf(&ctf_to_cir(&ctf));
        let scale = ctf.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        for (a, b) in ctf.iter().zip(&back) {
            prop_assert!((a - b).norm() / scale < 1e-9);
        }
    }

    #[test]
    fn asa_matches_brute_force(v in prop::collection::vec((0f64..360.0, -30f64..0.0), 1..40)) {
        let m: Vec<Mpc> = v.iter().map(|&(az, p)| mpc(10.0, az, 0.0, p)).collect();
        let got = rms_asa(&m, 1.0).unwrap();
        let w: Vec<f64> = v.iter().map(|&(_, p)| 10f64.powf(p / 10.0)).collect();
        let tot: f64 = w.iter().sum();
        let mut best = f64::INFINITY;
        for j in 0..360 {
            let a: Vec<f64> = v.iter().map(|&(az, _)| (az + j as f64).rem_euclid(360.0)).collect();
            let mean: f64 = a.iter().zip(&w).map(|(x, p)| x * p).sum::<f64>() / tot;
            let var: f64 = a.iter().zip(&w).map(|(x, p)| (x - mean).powi(2) * p).sum::<f64>() / tot;
            best = best.min(var.sqrt());
        }
        prop_assert!((got - best).abs() < 1e-9);
    }

    #[test]
    fn delay_spread_invariances(v in prop::collection::vec((0f64..100.0, -30f64..0.0), 1..40), shift in -50f64..50.0, gain in -20f64..20.0) {
        let m: Vec<Mpc> = v.iter().map(|&(t, p)| mpc(t, 0.0, 0.0, p)).collect();
        let ds = rms_delay_spread(&m).unwrap();
        let moved: Vec<Mpc> = m.iter().map(|x| mpc(x.toa + shift, 0.0, 0.0, x.power_db + gain)).collect();
        prop_assert!((rms_delay_spread(&moved).unwrap() - ds).abs() < 1e-7);
        prop_assert!(ds >= 0.0);
    }
}

#[test]
fn single_component_has_zero_spread() {
    let m = [mpc(40.0, 123.0, 0.0, -3.0)];
    assert_eq!(rms_delay_spread(&m).unwrap(), 0.0);
    assert!(rms_asa(&m, 1.0).unwrap() < 1e-9);
    assert!(rms_delay_spread(&[]).is_err());
}

/// Four compact clusters far apart in delay and angle.
fn planted(rng: &mut ChaCha8Rng) -> (Vec<Mpc>, Vec<usize>) {
    let centres = [(10.0, 0.0), (35.0, 90.0), (60.0, 200.0), (85.0, 300.0)];
    let mut m = Vec::new();
    let mut truth = Vec::new();
    for (c, &(t, az)) in centres.iter().enumerate() {
        for _ in 0..25 {
            m.push(mpc(
                t + rng.random_range(-0.3..0.3),
                (az + rng.random_range(-2.0..2.0f64)).rem_euclid(360.0),
                0.0,
                rng.random_range(-20.0..0.0),
            ));
            truth.push(c);
        }
    }
    (m, truth)
}

#[test]
fn dbscan_recovers_planted_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, truth) = planted(&mut rng);
    let set = dbscan_mcd(&MpcSet::new(m), DbscanParams::default()).unwrap();
    assert_eq!(set.n_outliers(), 0);
    assert_eq!(set.n_clusters(), 4);
    // planted clusters are ordered by delay, and so are canonical labels
    for (l, t) in set.labels.iter().zip(&truth) {
        assert_eq!(*l, *t as i32);
    }
}

#[test]
fn dbscan_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (m, _) = planted(&mut rng);
    let a = dbscan_mcd(&MpcSet::new(m.clone()), DbscanParams::default()).unwrap();
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.shuffle(&mut rng);
    let shuffled: Vec<Mpc> = idx.iter().map(|&i| m[i]).collect();
    let b = dbscan_mcd(&MpcSet::new(shuffled), DbscanParams::default()).unwrap();
    for (k, &i) in idx.iter().enumerate() {
        assert_eq!(b.labels[k], a.labels[i]);
    }
}

#[test]
fn dbscan_eps_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, _) = planted(&mut rng);
    let set = MpcSet::new(m);
    let tiny = dbscan_mcd(&set, DbscanParams { eps: 1e-9, ..DbscanParams::default() }).unwrap();
    assert_eq!(tiny.n_outliers(), set.len());
    let huge = dbscan_mcd(&set, DbscanParams { eps: 10.0, ..DbscanParams::default() }).unwrap();
    assert_eq!(huge.n_clusters(), 1);
    assert_eq!(huge.n_outliers(), 0);
}

fn one_path(toa: f64) -> ChannelRealization {
    ChannelRealization {
        scenario: ScenarioKind::MeetingRoom,
        distance: 3.0,
        clusters: vec![Cluster {
            index: 0,
            toa,
            power_frac: 1.0,
            aoa_az: 0.0,
            subpaths: vec![Subpath {
                toa,
                aoa_az: 0.0,
                aoa_el: 0.0,
                amplitude: 1e-4,
                phase: 0.3,
                power_frac_within_cluster: 1.0,
                friis_scaled: false,
            }],
            origin: Origin::Statistical,
            rl_db: None,
            reflection_order: 0,
        }],
        seed: 0,
        pl_omni_db: 80.0,
        f_ref: 205.0,
    }
}

#[test]
fn toa_beyond_alias_period_wraps() {
    let sys = SystemParams::preset(ScenarioKind::MeetingRoom);
    assert!((sys.alias_period_ns() - 100.0).abs() < 1e-9);
    let omni = AntennaPattern::Omni;
    let late = synthesize_ctf(&one_path(120.0), &sys, &omni, 0.0, 0.0);
    let early = synthesize_ctf(&one_path(20.0), &sys, &omni, 0.0, 0.0);
    for (a, b) in late.iter().zip(&early) {
        assert!((a - b).norm() < 1e-9 * a.norm());
    }
    let cir = ctf_to_cir(&late);
    let peak = (0..cir.len()).max_by(|&i, &j| cir[i].norm().total_cmp(&cir[j].norm())).unwrap();
    assert!((peak as f64 * sys.tap_spacing_ns() - 20.0).abs() <= sys.tap_spacing_ns() / 2.0);
}

#[test]
fn noise_threshold_rule() {
    assert_eq!(noise_threshold(-60.0, -140.0), -100.0);
    assert_eq!(noise_threshold(-110.0, -140.0), -130.0);
}

#[test]
fn lognormal_fit_recovers_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = rand_distr::LogNormal::new(2.71, 0.5).unwrap();
    let x: Vec<f64> = (0..20_000).map(|_| rng.sample(d)).collect();
    let (mu, s) = lognormal_fit(&x).unwrap();
    assert!((mu - 2.71).abs() < 0.02 && (s - 0.5).abs() < 0.02);
}
