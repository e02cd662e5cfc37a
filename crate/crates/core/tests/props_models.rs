//! Invariants of the engine, transmission, traction and tractor models.

use ecotim::engine::{
    asae_sfc, calibrate_willans, default_map, eco_mode_select, fuel_flow, DynoPoint, EngineEnvelope, WillansCoefficients,
};
use ecotim::traction::{mobility_number, solve_slip, traction_curves, tractive_efficiency, TyreConfig, S_MAX};
use ecotim::tractor::{Env, TractorConfig, TractorModel};
use ecotim::transmission::{hydro_fraction, transmission_efficiency, TransmissionParams};
use proptest::prelude::*;

fn model() -> &'static TractorModel {
    use std::sync::OnceLock;
    static M: OnceLock<TractorModel> = OnceLock::new();
    M.get_or_init(|| TractorModel::new(TractorConfig::default()).unwrap())
}

fn map() -> &'static WillansCoefficients {
    use std::sync::OnceLock;
    static M: OnceLock<WillansCoefficients> = OnceLock::new();
    M.get_or_init(default_map)
}

fn rear_tyre(load: f64) -> TyreConfig {
    TyreConfig {
        section_width: 0.65,
        overall_diameter: TyreConfig::metric_diameter(0.65, 0.65, 38.0),
        deflection_ratio: 0.2,
        axle_load: load,
        k_mp: 1.0,
    }
}

proptest! {
    #[test]
    fn willans_is_affine_in_power_and_quadratic_in_speed(n in 1400.0..1900.0f64, p in 5.0..80.0f64, h in 1.0..10.0f64) {
        let m = map();
        let f = |n: f64, p: f64| m.fuel_flow_unchecked(n, p);
        let second_in_p = f(n, p + h) - 2.0 * f(n, p) + f(n, p - h);
        prop_assert!(second_in_p.abs() < 1e-8 * f(n, p));
        let k = 10.0 * h;
        let third_in_n = f(n + 3.0 * k, p) - 3.0 * f(n + 2.0 * k, p) + 3.0 * f(n + k, p) - f(n, p);
        prop_assert!(third_in_n.abs() < 1e-8 * f(n, p));
    }

    #[test]
    fn eco_mode_beats_every_feasible_rpm(p in 0.5..100.0f64) {
        let m = map();
        let op = eco_mode_select(m, p, 10.0).unwrap();
        let env = &m.envelope;
        let mut n = env.n_torque_peak;
        while n <= env.n_rated {
            if env.full_load_power(n) >= p {
                prop_assert!(op.fuel_flow <= m.fuel_flow_unchecked(n, p) + 1e-9);
            }
            n += 1.0;
        }
        prop_assert!(env.full_load_power(op.speed) >= p * (1.0 - 1e-9));
    }

    #[test]
    fn calibration_recovers_generating_coefficients(
        c1 in 500.0..2000.0f64, c2 in -500.0..500.0f64, c3 in 100.0..600.0f64,
        c4 in 150.0..220.0f64, c5 in 5.0..40.0f64,
    ) {
        let c = [c1, c2, c3, c4, c5];
        let speeds_powers = [(850.0, 0.0), (1000.0, 20.0), (1200.0, 40.0), (1400.0, 44.0), (1400.0, 88.0),
            (1600.0, 70.0), (1700.0, 100.0), (1800.0, 40.0), (2000.0, 50.0), (2000.0, 100.0)];
        let pts: Vec<DynoPoint> = speeds_powers.iter().map(|&(n, p)| {
            let x = n / 1000.0;
            DynoPoint { speed: n, power_pto: p, fuel_flow: c1 + c2 * x + c3 * x * x + (c4 + c5 * x) * p }
        }).collect();
        let cal = calibrate_willans(&pts, 1.0, EngineEnvelope::default()).unwrap();
        for i in 0..5 {
            prop_assert!(((cal.map.c[i] - c[i]) / c[i]).abs() <= 1e-9, "{i}: {} vs {}", cal.map.c[i], c[i]);
        }
        let again: Vec<DynoPoint> = pts.iter().map(|p| DynoPoint {
            fuel_flow: cal.map.fuel_flow_unchecked(p.speed, p.power_pto), ..*p
        }).collect();
        let cal2 = calibrate_willans(&again, 1.0, EngineEnvelope::default()).unwrap();
        for i in 0..5 {
            prop_assert!(((cal2.map.c[i] - cal.map.c[i]) / cal.map.c[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn asae_sfc_falls_with_load(chi in 0.05..0.95f64, d in 0.01..0.05f64, b in 150.0..300.0f64) {
        prop_assert!(asae_sfc(chi + d, b, 1.0).unwrap() < asae_sfc(chi, b, 1.0).unwrap());
    }

    #[test]
    fn b_e_best_is_a_lower_bound(n in 1400.0..2000.0f64, frac in 0.05..1.0f64) {
        let m = map();
        let p = frac * m.full_load_power(n);
        let b = fuel_flow(m, n, p).unwrap() / p;
        prop_assert!(m.b_e_best <= b + 1e-9);
    }

    #[test]
    fn hydro_fraction_is_symmetric(d in 0.0..10.0f64) {
        let p = TransmissionParams::default();
        prop_assert!((hydro_fraction(&p, p.v_sync - d) - hydro_fraction(&p, p.v_sync + d)).abs() <= 1e-12);
    }

    #[test]
    fn part_load_never_beats_full_load(v in 0.5..15.0f64, load in 0.05..1.0f64) {
        let p = TransmissionParams::default();
        let part = transmission_efficiency(&p, v, load).unwrap();
        let half = transmission_efficiency(&p, v, 0.5).unwrap();
        let full = transmission_efficiency(&p, v, 1.0).unwrap();
        prop_assert!(part <= full + 1e-15);
        prop_assert!(half <= full);
    }

    #[test]
    fn transmission_rises_to_lock_up_then_falls(v in 0.2..14.8f64, load in 0.2..1.0f64) {
        let p = TransmissionParams::default();
        let e = |u| transmission_efficiency(&p, u, load).unwrap();
        if v + 0.1 <= p.v_sync {
            prop_assert!(e(v + 0.1) > e(v));
        } else if v >= p.v_sync {
            prop_assert!(e(v + 0.1) < e(v));
        }
    }

    #[test]
    fn traction_curves_increase_with_slip(bn in 10.0..120.0f64, s in 0.0..0.24f64, ds in 1e-4..0.01f64) {
        let (k0, r0) = traction_curves(bn, s);
        let (k1, r1) = traction_curves(bn, s + ds);
        prop_assert!(k1 > k0);
        prop_assert!(r1 > r0);
    }

    #[test]
    fn tractive_efficiency_is_unimodal(bn in 20.0..100.0f64) {
        let eta: Vec<f64> = (1..=2500).map(|i| {
            let s = i as f64 * 1e-4;
            let (k, r) = traction_curves(bn, s);
            tractive_efficiency(k, r, s)
        }).collect();
        let peak = eta.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert!(peak > 0 && peak < eta.len() - 1);
        prop_assert!(eta[..=peak].windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(eta[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn solve_slip_meets_demand(ci in 800.0..1300.0f64, frac in 0.0..0.99f64, load in 30_000.0..60_000.0f64) {
        let t = rear_tyre(load);
        let cap = traction_curves(mobility_number(&t, ci), S_MAX).0 * load;
        let demand = frac * cap.max(0.0);
        let sol = solve_slip(&t, ci, demand).unwrap();
        prop_assert!((sol.kappa * load - demand).abs() <= 1.0);
        prop_assert!((0.0..=S_MAX).contains(&sol.slip));
    }

    #[test]
    fn firmer_soil_never_hurts(ci in 800.0..1250.0f64, dci in 1.0..50.0f64, pull in 1_000.0..20_000.0f64) {
        let t = rear_tyre(50_000.0);
        let soft = solve_slip(&t, ci, pull).unwrap();
        let firm = solve_slip(&t, ci + dci, pull).unwrap();
        prop_assert!(firm.eta_tractive >= soft.eta_tractive - 1e-12);
    }

    #[test]
    fn tractor_state_is_consistent(v in 3.0..12.0f64, draft in 2_000.0..20_000.0f64, ci in 800.0..1300.0f64, grade in -0.08..0.08f64) {
        let m = model();
        let env = Env { ci, grade };
        if let Ok(st) = m.compute_efficiency(env, v, draft) {
            prop_assert_eq!(st.eta_tractor, st.eta_engine_rel * st.eta_transmission * st.eta_tractive);
            prop_assert!(st.fixed_point_iterations <= m.config.fixed_point_max_iter);
            let load = st.op.power_crank / m.engine.envelope.p_rated;
            let eta_t = transmission_efficiency(&m.config.transmission, v, load).unwrap();
            prop_assert!((eta_t - st.eta_transmission).abs() <= 1e-4 * eta_t);
            prop_assert!((st.op.power_crank * st.eta_transmission - st.wheel_power).abs() <= 1e-9 * st.wheel_power.max(1.0));
            prop_assert!(st.eta_engine_rel > 0.0 && st.eta_engine_rel <= 1.0 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_limit_matches_dense_sweep(ci in 800.0..1300.0f64, grade in 0.0..0.08f64, scale in 1.0..2.0f64) {
        let m = model();
        let env = Env { ci, grade };
        let draft = |v: f64| scale * 0.7 * (652.0 + 5.1 * v * v) * 32.0;
        let (lo, hi) = (2.0, 12.0);
        let Ok(v_lim) = m.max_feasible_speed(env, draft, lo, hi) else { return Ok(()) };
        let mut v = lo;
        let mut oracle = lo;
        while v <= hi + 1e-9 {
            if m.compute_efficiency(env, v, draft(v)).is_ok() {
                oracle = v;
            } else {
                break;
            }
            v += 0.001;
        }
        prop_assert!((v_lim - oracle).abs() <= 0.01, "{v_lim} vs {oracle}");
    }
}

#[test]
fn full_load_argmax_is_at_lock_up() {
    let p = TransmissionParams::default();
    let grid: Vec<f64> = (1..=150).map(|i| i as f64 * 0.1).collect();
    let best = grid
        .iter()
        .copied()
        .max_by(|a, b| transmission_efficiency(&p, *a, 1.0).unwrap().total_cmp(&transmission_efficiency(&p, *b, 1.0).unwrap()))
        .unwrap();
    assert!((best - p.v_sync).abs() < 1e-9);
}

#[test]
fn infinite_mobility_leaves_base_resistance() {
    let bn = 1e9;
    let (k, r) = traction_curves(bn, 0.0);
    assert!((r - 0.03).abs() < 1e-6);
    assert!((k + r).abs() < 1e-12);
}
