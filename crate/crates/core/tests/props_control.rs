//! Invariants of the draft model, message codec, speed response, optimizer and track.

use ecotim::codec::{res, Codec, EfficiencyBroadcast, GroundSpeed, HitchState, SpeedAccelCommand};
use ecotim::draft::{draft_force, draft_gradient, DraftCoefficients};
use ecotim::implement::{optimize_step, OptimizerConfig};
use ecotim::track::{generate, TrackConfig};
use ecotim::tractor::respond;
use proptest::prelude::*;

fn draft_coeffs() -> impl Strategy<Value = DraftCoefficients> {
    (0.0..700.0f64, 0.0..50.0f64, 0.0..10.0f64, prop::sample::select(vec![0.45, 0.7, 1.0]), 1.0..40.0f64, 5.0..30.0f64)
        .prop_map(|(a, b, c, f_s, w, d)| DraftCoefficients { a, b, c, f_s, w, d })
}

fn broadcast() -> impl Strategy<Value = EfficiencyBroadcast> {
    (0.0..100.0f64, -300.0..300.0f64, 0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64).prop_map(
        |(eta_tractor, deta_dv, eta_engine_rel, eta_transmission, eta_tractive, load_fraction)| EfficiencyBroadcast {
            eta_tractor,
            deta_dv,
            eta_engine_rel,
            eta_transmission,
            eta_tractive,
            load_fraction,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn efficiency_round_trip(m in broadcast()) {
        let c = Codec::default();
        let back = c.decode_efficiency(&c.encode_efficiency(&m).unwrap()).unwrap();
        let half = |r: f64| 0.5 * r + 1e-9;
        prop_assert!((back.eta_tractor - m.eta_tractor).abs() <= half(res::ETA));
        prop_assert!((back.deta_dv - m.deta_dv).abs() <= half(res::DETA));
        for (a, b) in [
            (back.eta_engine_rel, m.eta_engine_rel),
            (back.eta_transmission, m.eta_transmission),
            (back.eta_tractive, m.eta_tractive),
            (back.load_fraction, m.load_fraction),
        ] {
            prop_assert!((a - b).abs() <= half(res::DIAG));
        }
    }

    #[test]
    fn speed_accel_round_trip(speed in 0.0..64.0f64, accel in prop::option::of(-8.0..8.0f64)) {
        let c = Codec::default();
        let m = SpeedAccelCommand { speed, accel };
        let back = c.decode_speed_accel(&c.encode_speed_accel(&m).unwrap()).unwrap();
        prop_assert!((back.speed - speed).abs() <= 0.5 * res::SPEED + 1e-9);
        match (accel, back.accel) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                // raw -1 collides with the not-available pattern and goes out as 0
                let bound = if (a / res::ACCEL).round() == -1.0 { 1.5 } else { 0.5 };
                prop_assert!((a - b).abs() <= bound * res::ACCEL + 1e-9);
            }
            other => prop_assert!(false, "accel presence changed: {other:?}"),
        }
    }

    #[test]
    fn ground_speed_and_hitch_round_trip(speed in 0.0..64.0f64, distance in 0.0..1e6f64, position in 0.0..100.0f64, draft in -320_000.0..300_000.0f64) {
        let c = Codec::default();
        let g = c.decode_ground_speed(&c.encode_ground_speed(&GroundSpeed { speed, distance }).unwrap()).unwrap();
        prop_assert!((g.speed - speed).abs() <= 0.5 * res::SPEED + 1e-9);
        prop_assert!((g.distance - distance).abs() <= 0.5 * res::DISTANCE + 1e-6);
        let h = c.decode_hitch(&c.encode_hitch(&HitchState { position, draft }).unwrap()).unwrap();
        prop_assert!((h.position - position).abs() <= 0.5 * res::HITCH_POS + 1e-9);
        prop_assert!((h.draft - draft).abs() <= 0.5 * res::DRAFT + 1e-6);
    }
}

proptest! {
    #[test]
    fn draft_gradient_matches_finite_difference(c in draft_coeffs(), v in 1.0..15.0f64) {
        let h = 1e-3;
        let fd = (draft_force(&c, v + h) - draft_force(&c, v - h)) / (2.0 * h);
        let g = draft_gradient(&c, v);
        prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0));
    }

    #[test]
    fn response_is_monotone_in_the_setpoint(v in 0.0..4.0f64, s1 in 0.0..4.0f64, ds in 0.0..1.0f64, a in prop::option::of(-1.0..1.0f64)) {
        let lo = respond(v, &SpeedAccelCommand { speed: s1, accel: a }, 0.1, 2.0, None);
        let hi = respond(v, &SpeedAccelCommand { speed: s1 + ds, accel: a }, 0.1, 2.0, None);
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn response_without_accel_is_first_order(v in 0.1..4.0f64, s in 0.0..4.0f64, dt in 0.01..0.5f64, tau in 0.5..5.0f64) {
        let next = respond(v, &SpeedAccelCommand { speed: s, accel: None }, dt, tau, None);
        prop_assert!((next - (v + dt / tau * (s - v))).abs() <= 1e-12);
        let k = 0.7;
        let scaled = respond(k * v, &SpeedAccelCommand { speed: k * s, accel: None }, dt, tau, None);
        prop_assert!((scaled - k * next).abs() <= 1e-12);
    }

    #[test]
    fn response_respects_the_power_limit(v in 0.5..4.0f64, s in 0.0..4.0f64, a in -1.0..1.0f64, limit in 0.5..4.0f64) {
        let next = respond(v, &SpeedAccelCommand { speed: s, accel: Some(a) }, 0.1, 2.0, Some(limit));
        prop_assert!(next <= limit && next >= 0.0);
    }

    #[test]
    fn optimizer_commands_stay_in_bounds(
        c in draft_coeffs(), v in 3.0..13.0f64, eta in 20.0..80.0f64, deta in -20.0..20.0f64,
    ) {
        prop_assume!(draft_force(&c, v) > 0.0);
        let cfg = OptimizerConfig::default();
        let rx = EfficiencyBroadcast { eta_tractor: eta, deta_dv: deta, eta_engine_rel: 90.0, eta_transmission: 80.0, eta_tractive: 70.0, load_fraction: 50.0 };
        if let Ok(step) = optimize_step(&cfg, &c, &rx, v) {
            prop_assert!(step.v_cmd >= cfg.v_min && step.v_cmd <= cfg.v_max);
            prop_assert!(step.a_cmd.abs() <= cfg.a_max);
            let unclamped = v + (-cfg.k_v * step.gradient).clamp(-cfg.dv_max, cfg.dv_max);
            prop_assert!((step.v_cmd - unclamped.clamp(cfg.v_min, cfg.v_max)).abs() <= 1e-12);
        }
    }

    #[test]
    fn optimizer_ignores_draft_scale(
        c in draft_coeffs(), k in 0.1..10.0f64, v in 4.0..10.0f64, eta in 20.0..80.0f64, deta in -20.0..20.0f64,
    ) {
        prop_assume!(draft_force(&c, v) > 0.0);
        let cfg = OptimizerConfig::default();
        let rx = EfficiencyBroadcast { eta_tractor: eta, deta_dv: deta, eta_engine_rel: 90.0, eta_transmission: 80.0, eta_tractive: 70.0, load_fraction: 50.0 };
        let scaled = DraftCoefficients { w: c.w * k, ..c };
        match (optimize_step(&cfg, &c, &rx, v), optimize_step(&cfg, &scaled, &rx, v)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.gradient - b.gradient).abs() <= 1e-9 * a.gradient.abs().max(1e-6));
                prop_assert!((a.v_cmd - b.v_cmd).abs() <= 1e-9);
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn track_is_deterministic_and_bounded(seed in any::<u64>()) {
        let cfg = TrackConfig::default();
        let t = generate(&cfg, seed).unwrap();
        prop_assert_eq!(&t, &generate(&cfg, seed).unwrap());
        prop_assert!(t.max_abs_grade() <= 0.08 + 1e-12);
        prop_assert!(t.elevation_range() <= 10.5 + 1e-12);
        for (i, &ci) in cfg.soil_ci.iter().enumerate() {
            let zones = t.zones.iter().filter(|z| z.soil == i && z.ci == ci).count();
            prop_assert_eq!(zones, 2);
        }
        prop_assert!(t.ci.iter().all(|&c| (800.0..=1300.0).contains(&c)));
        // trapezoidal integral of grade recovers the elevation change
        let integral: f64 = t.grade.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
        let rise = t.elevation[t.elevation.len() - 1] - t.elevation[0];
        prop_assert!((integral - rise).abs() <= 1e-3);
    }
}
