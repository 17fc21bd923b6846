use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use xlmimo_access::channel::steering;
use xlmimo_access::frontend::{design_combiners, design_pilots, simulate_measurements, PilotMode};
use xlmimo_access::geometry::{
    generate_scenario, path_parameters, PathKind, Point, Scenario, ScenarioConfig, SPEED_OF_LIGHT,
};
use xlmimo_access::harness::{metric_pe, run_trial, Cdf, ExperimentConfig, TrialInstance};
use xlmimo_access::linalg::CMatrix;
use xlmimo_access::localization::{
    delay_steering, music_aoa, music_delay, wls_locate, AnchorObservation, LocalizationConfig, Weighting,
};
use xlmimo_access::recovery::{strbomp, RecoveryConfig, Refinement};
use xlmimo_access::rng::{complex_normal, rng_from};

fn small_scenario() -> ScenarioConfig {
    ScenarioConfig {
        users: 12,
        active_users: 4,
        subarrays: 6,
        ..ScenarioConfig::default()
    }
}

fn small_experiment() -> ExperimentConfig {
    let mut c = ExperimentConfig::reduced_scale();
    c.scenario.users = 8;
    c.scenario.active_users = 2;
    c.scenario.subarrays = 4;
    c.channel.subcarriers = 256;
    c.frontend.g_symbols = 16;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn los_delay_differences_match_ranges(seed in any::<u64>()) {
        let sc = generate_scenario(&small_scenario(), seed).unwrap();
        let geo = path_parameters(&sc);
        for (k, u) in sc.users.iter().enumerate() {
            if !u.active {
                continue;
            }
            let los = &geo.users[k][0];
            prop_assert_eq!(los.kind, PathKind::LineOfSight);
            let vis: Vec<usize> = (0..los.mask.len()).filter(|&m| los.mask[m]).collect();
            for &a in &vis {
                for &b in &vis {
                    let lhs = (los.delay_s[a] - los.delay_s[b]) * SPEED_OF_LIGHT;
                    prop_assert!((lhs - (los.distance_m[a] - los.distance_m[b])).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn all_angles_strictly_inside_half_plane(seed in any::<u64>()) {
        let sc = generate_scenario(&small_scenario(), seed).unwrap();
        for paths in path_parameters(&sc).users {
            for p in paths {
                for &t in &p.aoa_rad {
                    prop_assert!(t > 0.0 && t < PI && t.sin() > 0.0);
                }
            }
        }
    }

    #[test]
    fn scenario_json_round_trips(seed in any::<u64>()) {
        let sc = generate_scenario(&small_scenario(), seed).unwrap();
        prop_assert_eq!(Scenario::from_json(&sc.to_json().unwrap()).unwrap(), sc);
    }

    #[test]
    fn channel_support_is_common_and_bounded(seed in any::<u64>()) {
        let cfg = small_experiment();
        let inst = TrialInstance::draw(&cfg, seed).unwrap();
        let ch = &inst.channel;
        let bound = cfg.scenario.active_users * ch.antennas();
        let zero = Complex64::new(0.0, 0.0);
        let first: Vec<bool> = ch.h.column(0).iter().map(|z| *z != zero).collect();
        for p in 0..ch.pilots() {
            prop_assert!(ch.support_size(p) <= bound);
            let pat: Vec<bool> = ch.h.column(p).iter().map(|z| *z != zero).collect();
            prop_assert_eq!(&pat, &first);
        }
    }

    #[test]
    fn combiners_semi_unitary(g in 1usize..6, m in 1usize..8, ns in 1usize..10, seed in any::<u64>()) {
        let cs = design_combiners(g, m, ns, seed).unwrap();
        for gg in 0..g {
            let w = cs.dense(gg);
            prop_assert!((w.adjoint() * &w - CMatrix::identity(m, m)).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_unit_modulus(theta in 1e-6f64..PI - 1e-6, ns in 1usize..64) {
        let a = steering(theta, ns);
        prop_assert_eq!(a[0], Complex64::new(1.0, 0.0));
        for z in a.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pe_lies_in_unit_interval(bits in proptest::collection::vec(any::<(bool, bool)>(), 1..64)) {
        let (z, zh): (Vec<bool>, Vec<bool>) = bits.into_iter().unzip();
        let pe = metric_pe(&z, &zh).unwrap();
        prop_assert!((0.0..=1.0).contains(&pe));
        prop_assert_eq!(metric_pe(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn cdf_is_monotone_and_saturates(samples in proptest::collection::vec(0.0f64..1.0, 1..50)) {
        let cdf = Cdf::new(&samples);
        prop_assert_eq!(cdf.eval(f64::INFINITY), 1.0);
        prop_assert_eq!(cdf.eval(-1.0), 0.0);
        let steps = cdf.steps();
        prop_assert!(steps.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pursuit_residual_monotone_and_refinement_sound(seed in any::<u64>(), sigma2 in 1e-4f64..1e-1) {
        let (k_n, m_n, ns, g, p) = (6, 4, 2, 12, 4);
        let mut rng = rng_from(seed);
        let mut h = CMatrix::zeros(k_n * m_n * ns, p);
        for (k, blocks) in [(1usize, [0usize, 1, 2]), (4, [1, 2, 3])] {
            for m in blocks {
                for n in 0..ns {
                    for pp in 0..p {
                        h[((k * m_n + m) * ns + n, pp)] = complex_normal(&mut rng, 1.0);
                    }
                }
            }
        }
        let pilots = design_pilots(k_n, p, g, 1.0, PilotMode::Gmmv, seed ^ 1).unwrap();
        let comb = design_combiners(g, m_n, ns, seed ^ 2).unwrap();
        let meas = simulate_measurements(&h, pilots, comb, sigma2, seed ^ 3).unwrap();
        let res = strbomp(&meas, &RecoveryConfig::new(sigma2, 16)).unwrap();
        // Each accepted step lowered ε; only the last may be the rejected one.
        let trace = &res.residual_trace;
        if trace.len() > 2 {
            prop_assert!(trace[..trace.len() - 1].windows(2).all(|w| w[1] < w[0]));
        }
        let by_user = res.blocks_by_user(m_n);
        match &res.refinement {
            Refinement::Added { user, .. } => prop_assert_eq!(by_user[user].len(), 2),
            _ => {
                prop_assert!(by_user.values().all(|b| b.len() >= 2) || by_user.len() <= 1);
            }
        }
    }

    #[test]
    fn music_is_scale_invariant(
        theta in 0.05f64..PI - 0.05,
        tau_frac in 0.01f64..1.0,
        re in -3.0f64..3.0,
        im in 0.1f64..3.0,
    ) {
        let cfg = LocalizationConfig {
            aoa_refine_levels: 1,
            delay_coarse_divisions: 512,
            delay_refine_levels: 1,
            ..LocalizationConfig::default()
        };
        let tau_max = 100e-9;
        let grids = cfg.grids(tau_max);
        let offsets: Vec<f64> = (0..16).map(|p| -50e6 + p as f64 * 6.25e6).collect();
        let a = steering(theta, 6);
        let g = delay_steering(tau_frac * tau_max, &offsets);
        let h = &a * g.transpose();
        let hc = &h * Complex64::new(re, im);
        prop_assert_eq!(music_aoa(&h, &grids).unwrap().value, music_aoa(&hc, &grids).unwrap().value);
        prop_assert_eq!(
            music_delay(&h, &grids, &offsets).unwrap().value,
            music_delay(&hc, &grids, &offsets).unwrap().value
        );
    }

    #[test]
    fn wls_exact_and_third_anchor_harmless(
        x in 0.0f64..40.0,
        y in 1.0f64..25.0,
        anchors in proptest::sample::subsequence((0..8usize).collect::<Vec<_>>(), 3),
    ) {
        let user = Point::new(x, y);
        let obs: Vec<AnchorObservation> = anchors
            .iter()
            .map(|&m| {
                let xm = (m as f64 + 0.5) * 5.0;
                AnchorObservation {
                    subarray: m,
                    x_m: xm,
                    aoa_rad: y.atan2(xm - x),
                    delay_s: Point::new(xm, 0.0).distance(&user) / SPEED_OF_LIGHT,
                }
            })
            .collect();
        let two = wls_locate(&obs[..2], obs[0].subarray, Weighting::Range).unwrap();
        let three = wls_locate(&obs, obs[0].subarray, Weighting::Range).unwrap();
        prop_assert!(two.position.distance(&user) < 1e-9);
        prop_assert!(three.position.distance(&user) < 1e-9);
        prop_assert!(three.residual < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn trial_is_deterministic(seed in any::<u64>()) {
        let mut cfg = small_experiment();
        cfg.sweep.seed = seed;
        let a = run_trial(&cfg, 0, 20.0, 3).unwrap();
        let b = run_trial(&cfg, 0, 20.0, 3).unwrap();
        prop_assert_eq!(a.solvers, b.solvers);
        prop_assert_eq!(a.seed, b.seed);
    }
}
