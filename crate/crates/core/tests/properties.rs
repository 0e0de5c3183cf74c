use std::sync::Arc;

use proptest::prelude::*;

use shield_vimpc::cbf::{h0_track, h_modified, Heuristic};
use shield_vimpc::config::{ScenarioConfig, Variant};
use shield_vimpc::cost::{QuadraticCost, TrajectoryCost};
use shield_vimpc::dynamics::{rollout, ControlSequence, DoubleIntegrator, DroneModel, DroneParams, Dynamics};
use shield_vimpc::experiments::Scenario;
use shield_vimpc::sampler::{
    ess, mppi_weights, normalize, rollout_ensemble, snis_estimate, Algorithm, RolloutContext, SafetyPredicate,
};
use shield_vimpc::valuefn::{LearnedBarrier, Mlp};

fn drone() -> DroneModel {
    DroneModel::new(DroneParams::default()).unwrap()
}

proptest! {
    #[test]
    fn free_fall_loses_exactly_g_dt(
        z in 1.0..100.0f64,
        vx in -5.0..5.0f64,
        vz in -5.0..5.0f64,
        pitch in -1.0..1.0f64,
        rate in -2.0..2.0f64,
    ) {
        let m = drone();
        let p = m.params().clone();
        let x = [0.0, z, vx, vz, pitch, rate];
        let next = m.step(&x, &[0.0, 0.0]).unwrap();
        prop_assert_eq!(next[3], vz - p.gravity * p.dt);
    }

    #[test]
    fn ground_effect_fades_with_height(f_in in 0.1..10.0f64, z in 0.0..3.0f64, dz in 0.0..3.0f64) {
        let m = drone();
        prop_assert!(m.rotor_thrust(f_in, z) >= m.rotor_thrust(f_in, z + dz));
        prop_assert!((m.rotor_thrust(f_in, 1e12) - f_in).abs() <= 1e-9 * f_in);
    }

    #[test]
    fn drone_rollouts_are_bit_identical(u in prop::collection::vec(0.0..9.81f64, 2..40)) {
        let m = drone();
        let controls = ControlSequence::from_flat(u.len() / 2, 2, u[..u.len() / 2 * 2].to_vec()).unwrap();
        let x0 = [0.0, 1.5, 2.0, 0.0, 0.0, 0.0];
        prop_assert_eq!(rollout(&m, &x0, &controls).ok(), rollout(&m, &x0, &controls).ok());
    }

    #[test]
    fn modified_heuristic_keeps_the_avoid_set(e_y in -3.0..3.0f64) {
        prop_assert_eq!(h_modified(e_y, 1.5, 1.8) > 0.0, h0_track(e_y, 1.5) > 0.0);
    }

    #[test]
    fn learned_barrier_dominates_heuristic(seed in 0u64..1000, x in -50.0..50.0f64, y in -50.0..50.0f64) {
        let net = Arc::new(Mlp::new(&[2, 8, 8, 1], seed).unwrap());
        let h: Arc<dyn Heuristic> = Arc::new(|s: &[f64]| s[0] - s[1].abs());
        let b = LearnedBarrier { net, h: h.clone() };
        prop_assert!(b.value(&[x, y]) >= h.value(&[x, y]));
    }

    #[test]
    fn weights_normalize_and_estimate_stays_in_hull(
        costs in prop::collection::vec(0.0..500.0f64, 1..30),
        seed in 0u64..1000,
    ) {
        let horizon = 3;
        let controls: Vec<ControlSequence> = (0..costs.len())
            .map(|i| {
                let data = (0..horizon).map(|k| ((seed + 7 * i as u64 + 3 * k as u64) % 17) as f64 - 8.0).collect();
                ControlSequence::from_flat(horizon, 1, data).unwrap()
            })
            .collect();
        let mean = ControlSequence::zeros(horizon, 1);
        let w = normalize(&mppi_weights(&costs, &controls, &mean, &[1.0], 10.0)).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let e = ess(&w).unwrap().value;
        prop_assert!((1.0 - 1e-9..=costs.len() as f64 + 1e-9).contains(&e));
        let est = snis_estimate(&controls, &w).unwrap();
        for k in 0..horizon {
            let lo = controls.iter().map(|u| u.step(k)[0]).fold(f64::INFINITY, f64::min);
            let hi = controls.iter().map(|u| u.step(k)[0]).fold(f64::NEG_INFINITY, f64::max);
            let v = est.step(k)[0];
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn rewired_ensembles_replay_and_alive_flags_never_recover(
        u in prop::collection::vec(-2.0..2.0f64, 48),
        seed in 0u64..1000,
    ) {
        let model = DoubleIntegrator::new(0.2, 2.0);
        let cost = TrajectoryCost::new(QuadraticCost::new(vec![1.0, 0.1], vec![0.0, 0.0]).unwrap()).with_collision(10.0);
        let avoid = |x: &[f64]| x[0].abs() - 1.0;
        let ctx = RolloutContext {
            model: &model,
            cost: &cost,
            avoid: &avoid,
            barrier: None,
            rbr: Some(SafetyPredicate::AvoidSet),
        };
        let samples: Vec<ControlSequence> =
            u.chunks(6).map(|c| ControlSequence::from_flat(6, 1, c.to_vec()).unwrap()).collect();
        let e = rollout_ensemble(&[0.5, 0.0], samples, &ctx, seed, 0).unwrap();
        prop_assert!(e.replays(&model));
        for alive in &e.alive {
            prop_assert!(alive.windows(2).all(|w| w[0] || !w[1]));
        }
        for r in &e.rewires {
            prop_assert!(e.alive[r.source][r.step]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn crashes_end_the_episode_and_count_as_collisions(seed in 0u64..10_000) {
        let mut cfg = ScenarioConfig::vehicle();
        cfg.controller.samples = 20;
        cfg.controller.horizon = 10;
        cfg.experiment.episode_steps = 80;
        let mut d = vec![0.0; 8];
        d[5] = 0.05;
        d[6] = 0.05;
        cfg.environment.disturbance = d;
        let s = Scenario::new(cfg).unwrap();
        let r = s.run_trial(Variant::new(Algorithm::Mppi, false), seed);
        if r.crash {
            prop_assert!(r.collision);
            prop_assert_eq!(r.cause.as_deref(), Some("contact"));
            prop_assert!(r.steps <= 80);
        } else {
            prop_assert_eq!(r.steps, 80);
        }
        prop_assert!(r.collision_steps <= r.steps);
    }

    #[test]
    fn effective_config_round_trips(
        samples in 1usize..500,
        horizon in 1usize..60,
        seed in 0..=i64::MAX as u64,
        decay in 0.01..0.99f64,
        rbr in any::<bool>(),
    ) {
        let mut cfg = ScenarioConfig::drone();
        cfg.controller.samples = samples;
        cfg.controller.elite = cfg.controller.elite.min(samples);
        cfg.controller.horizon = horizon;
        cfg.controller.rbr = rbr;
        cfg.experiment.seed = seed;
        cfg.barrier.decay = decay;
        let text = cfg.to_toml();
        let back = ScenarioConfig::parse(&text, None).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn seeds_beyond_toml_range_are_rejected(seed in i64::MAX as u64 + 1..=u64::MAX) {
        let mut cfg = ScenarioConfig::oracle();
        cfg.experiment.seed = seed;
        prop_assert!(cfg.validate().is_err());
    }
}
