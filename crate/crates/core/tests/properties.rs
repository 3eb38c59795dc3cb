use approx::assert_relative_eq;
use nalgebra::Matrix3;
use proptest::prelude::*;

use tricat_core::cat_state::{delta_expanded, kernel, phi_coefficients, phi_direct, PacketSet};
use tricat_core::classical::{energy, orbit, ClassicalState};
use tricat_core::model::{packet_labels, same_group, ModelConfig, GROUP_DISPLACED, GROUP_ORIGIN};
use tricat_core::normal_modes::{coupling_matrix, diagonalize};
use tricat_core::oracle::jacobi_eigensolve;
use tricat_core::propagator::coefficients;

fn couplings() -> impl Strategy<Value = [f64; 3]> {
    [0.05f64..1.0, 0.05f64..1.0, 0.05f64..1.0]
        .prop_filter("clearly asymmetric", |w| {
            let spread = w.iter().cloned().fold(0.0, f64::max) - w.iter().cloned().fold(1.0, f64::min);
            spread > 0.02
        })
}

fn config() -> impl Strategy<Value = ModelConfig> {
    (couplings(), 0.5f64..2.0, 0.5f64..1.5, [0.5f64..2.0, 0.5f64..2.0, 0.5f64..2.0], [-8.0f64..8.0, -8.0f64..8.0, -8.0f64..8.0])
        .prop_map(|(w, mass, hbar, sigma, d)| ModelConfig {
            omega12: w[0],
            omega13: w[1],
            omega23: w[2],
            mass,
            hbar,
            sigma,
            d,
            ..Default::default()
        })
}

/// Sample time kept away from every caustic.
fn safe_time(cfg: &ModelConfig, raw: f64) -> Option<f64> {
    let basis = diagonalize(cfg).ok()?;
    coefficients(&basis, cfg.t0, raw).ok().filter(|c| {
        basis.frequencies.iter().all(|w| (w * c.dt).sin().abs() > 1e-3)
    })?;
    Some(raw)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_match_jacobi(cfg in config()) {
        let basis = diagonalize(&cfg).unwrap();
        let (vals, _) = jacobi_eigensolve(&coupling_matrix(&cfg)).unwrap();
        let scale = vals[2].abs();
        prop_assert!(vals[0].abs() < 1e-12 * scale);
        prop_assert!((vals[1] - basis.lambda[0]).abs() < 1e-10 * scale);
        prop_assert!((vals[2] - basis.lambda[1]).abs() < 1e-10 * scale);
    }

    #[test]
    fn transformation_diagonalizes(cfg in config()) {
        let basis = diagonalize(&cfg).unwrap();
        let d = basis.p * coupling_matrix(&cfg) * basis.p_inv;
        let expect = Matrix3::from_diagonal(&[basis.lambda[0], basis.lambda[1], 0.0].into());
        prop_assert!((d - expect).abs().max() < 1e-12 * basis.lambda[1].abs());
    }

    #[test]
    fn orbits_conserve_energy(cfg in config(), v in [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0], t in 0.0f64..100.0) {
        let basis = diagonalize(&cfg).unwrap();
        let s0 = ClassicalState { x: cfg.d, v };
        let e0 = energy(&s0, &cfg);
        let e1 = energy(&orbit(&s0, &basis, 0.0, t), &cfg);
        prop_assert!((e1 - e0).abs() <= 1e-10 * e0.abs().max(1e-12));
    }

    #[test]
    fn delta_routes_agree(cfg in config(), raw in 0.01f64..50.0) {
        let Some(t) = safe_time(&cfg, raw) else { return Ok(()) };
        let basis = diagonalize(&cfg).unwrap();
        let c = coefficients(&basis, 0.0, t).unwrap();
        let k = kernel(&c, &cfg).unwrap();
        let e = delta_expanded(&c, &cfg);
        prop_assert!((e - k.delta).norm() <= 1e-10 * k.delta.norm());
    }

    #[test]
    fn phi_routes_agree(cfg in config(), raw in 0.01f64..50.0, x in [-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0]) {
        let Some(t) = safe_time(&cfg, raw) else { return Ok(()) };
        let basis = diagonalize(&cfg).unwrap();
        let c = coefficients(&basis, 0.0, t).unwrap();
        let k = kernel(&c, &cfg).unwrap();
        for label in packet_labels(&cfg) {
            let poly = phi_coefficients(&k, &c, &label, &cfg).eval(x);
            let direct = phi_direct(&k, &c, &label, &cfg, x);
            prop_assert!((poly - direct).norm() <= 1e-10 * direct.norm().max(1.0), "{poly} vs {direct}");
        }
    }

    #[test]
    fn pair_sum_equals_squared_modulus(cfg in config(), raw in 0.01f64..20.0, x in [-6.0f64..10.0, -6.0f64..10.0, -6.0f64..10.0]) {
        let Some(t) = safe_time(&cfg, raw) else { return Ok(()) };
        let basis = diagonalize(&cfg).unwrap();
        let c = coefficients(&basis, 0.0, t).unwrap();
        let set = PacketSet::new(&c, &cfg).unwrap();
        let total = set.density(x);
        let pairs = tricat_core::cat_state::rho_total(&set.thetas, x, set.log_peak);
        prop_assert!((total - pairs).abs() <= 1e-10 * total.max(1e-200));
    }

    #[test]
    fn config_text_round_trips(cfg in config(), t in 0.1f64..10.0) {
        let cfg = ModelConfig { times: vec![t, 2.0 * t], ..cfg };
        let back = ModelConfig::from_config_str(&cfg.to_config_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn labels_are_a_bijection_onto_bit_patterns() {
    let cfg = ModelConfig { d: [1.0, 2.0, 3.0], ..Default::default() };
    let mut seen = std::collections::HashSet::new();
    for l in packet_labels(&cfg) {
        let bits: Vec<bool> = l.disp.iter().map(|&v| v != 0.0).collect();
        assert_eq!(bits, l.bits().to_vec());
        assert!(seen.insert(bits));
    }
    assert_eq!(seen.len(), 8);
}

#[test]
fn groups_follow_particle_one_offset() {
    let cfg = ModelConfig::default();
    let labels = packet_labels(&cfg);
    for k in GROUP_ORIGIN {
        assert_eq!(labels[k].disp[0], 0.0);
    }
    for k in GROUP_DISPLACED {
        assert_eq!(labels[k].disp[0], cfg.d[0]);
    }
    for k in 0..8 {
        for l in 0..8 {
            assert_eq!(same_group(k, l), labels[k].disp[0] == labels[l].disp[0]);
        }
    }
}

#[test]
fn preset_eigenvalues() {
    let basis = diagonalize(&ModelConfig::default()).unwrap();
    assert_relative_eq!(basis.lambda[0], -0.0711342, max_relative = 1e-6);
    assert_relative_eq!(basis.lambda[1], -0.2165238, max_relative = 1e-6);
    assert_relative_eq!(basis.mode_frequencies[0], 0.26671, max_relative = 1e-4);
    assert_relative_eq!(basis.mode_frequencies[1], 0.46532, max_relative = 1e-4);
}
