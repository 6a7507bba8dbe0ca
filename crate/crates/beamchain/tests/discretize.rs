mod common;

use beamchain::c64;
use beamchain::discretize::{self, discrete_power_balance, traces, DiscretizeError};
use beamchain::model::build_chain;
use beamchain::passivity::check_controller;
use beamchain::ports::{controller_of, PortLocation};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

#[test]
fn single_conservative_segment_is_skew() {
    let b = bundle(&uniform("clamped", "free", 1.0, 1.0, 1.0), 8);
    assert!(b.dim() < 2 * 9);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x = random_state(&b, &mut rng);
        assert!(b.rate(&x).abs() <= 1e-12 * b.m_norm_sq(&x));
    }
}

#[test]
fn damped_two_segment_chains_dissipative_for_all_kinds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for kind in 1..=4u8 {
        let b = bundle(&two_segment(r#"{"K0":[[1.0,0.2],[-0.2,0.5]]}"#, r#"{"closure":"pinned"}"#, kind, [0.4, 0.0]), 24);
        for _ in 0..100 {
            let x = random_state(&b, &mut rng);
            let r = b.rate(&x);
            assert!(r <= 1e-10 * b.m_norm_sq(&x), "kind {kind}: {r}");
            let pb = discrete_power_balance(&b, &x).unwrap();
            assert!(pb.diff.abs() <= 1e-10 * b.m_norm_sq(&x));
            assert!(pb.rhs <= 1e-10 * b.m_norm_sq(&x));
        }
    }
}

const CONTROLLED: &str = r#"{"segments":[{"length":1.0,"rho":[1.0,1.0],"ei":[1.0,1.0]}],
    "left_end":{"controller":{"A_c":[[-1.0,0.5],[-0.5,-0.2]],"B_c":[[1.0,0.0],[0.3,1.0]],
                              "C_c":[[1.0,0.3],[0.0,1.0]],"D_c":[[1.0,0.0],[0.0,0.5]]}},
    "right_end":{"closure":"pinned"}}"#;

#[test]
fn controller_states_and_closed_loop_inequality() {
    let plain = bundle(&CONTROLLED.replace(r#""A_c":[[-1.0,0.5],[-0.5,-0.2]],"B_c":[[1.0,0.0],[0.3,1.0]],
                              "C_c":[[1.0,0.3],[0.0,1.0]],"#, ""), 20);
    assert_eq!(plain.n_ctrl(), 0);
    let m = model(CONTROLLED);
    let b = bundle_of_model(&m, 20);
    assert_eq!(b.n_ctrl(), 2);
    assert_eq!(b.dim(), plain.dim() + 2);
    let ctrl = controller_of(&m, PortLocation::Left).unwrap();
    let v = check_controller(&ctrl);
    assert!(v.passive && v.kappa > 0.0 && v.kappa_feedthrough > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = random_state(&b, &mut rng);
        let tv = traces(&b, &x).unwrap();
        let u = &tv.ports[0].c;
        let xc = b.controller_state(&x);
        let du: Vec<c64> = (0..2).map(|i| (0..2).map(|j| ctrl.d[(i, j)] * u[j]).sum()).collect();
        let y: Vec<c64> = (0..2).map(|i| du[i] + (0..2).map(|j| ctrl.c[(i, j)] * xc[j]).sum::<c64>()).collect();
        let n2 = |w: &[c64]| w.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let tol = 1e-10 * b.m_norm_sq(&x);
        let r = b.rate(&x);
        assert!(r <= -v.kappa * n2(&y) + tol, "{r} vs {}", -v.kappa * n2(&y));
        assert!(r <= -v.kappa_feedthrough * n2(&du) + tol);
    }
}

#[test]
fn power_balance_on_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for name in ["chen87_m2_conservative", "inhomog_m3"] {
        let b = scenario_bundle(name, 40);
        for _ in 0..50 {
            let x = random_state(&b, &mut rng);
            let pb = discrete_power_balance(&b, &x).unwrap();
            assert!(pb.diff.abs() <= 1e-10 * b.m_norm_sq(&x), "{name}");
            if b.conservative {
                assert!(pb.lhs.abs() <= 1e-12 * b.m_norm_sq(&x));
            }
        }
    }
}

#[test]
fn interior_states_carry_no_flux() {
    let b = scenario_bundle("inhomog_m3", 40);
    let bump = |z: f64| if (0.3..=0.7).contains(&z) { (std::f64::consts::PI * (z - 0.3) / 0.4).sin().powi(2) } else { 0.0 };
    let x = b.sample_state(|j, z| if j == 1 { [re(bump(z)), re(0.5 * bump(z))] } else { [re(0.0), re(0.0)] }, &[]);
    let pb = discrete_power_balance(&b, &x).unwrap();
    assert!(pb.lhs.abs() <= 1e-12 * b.m_norm_sq(&x));
    assert!(pb.rhs.abs() <= 1e-12 * b.m_norm_sq(&x));
}

#[test]
fn linear_profile_derivative_traces_are_exact() {
    let b = bundle(&uniform("free", "free", 2.0, 1.0, 1.0), 16);
    // v = 1 + 2ζ on the unit reference interval ⇒ physical slope 1 on length 2
    let x = b.sample_state(|_, z| [re(1.0 + 2.0 * z), re(0.0)], &[]);
    let tv = traces(&b, &x).unwrap();
    let s = &tv.selector_components;
    assert!((s[2] - re(1.0)).norm() <= 1e-12, "{}", s[2]);
    assert!((s[6] - re(1.0)).norm() <= 1e-12, "{}", s[6]);
    assert!((s[0] - re(1.0)).norm() <= 1e-12 && (s[4] - re(3.0)).norm() <= 1e-12);
}

#[test]
fn junction_constraints_hold_on_admissible_states() {
    let b = scenario_bundle("chen87_m2", 30);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let x = random_state(&b, &mut rng);
        let tv = traces(&b, &x).unwrap();
        let j = tv.ports.iter().find(|p| p.label.starts_with("junction")).unwrap();
        let scale = b.m_norm_sq(&x).sqrt();
        assert!(j.b0.iter().chain(&j.b).all(|z| z.norm() <= 1e-10 * scale), "{:?} {:?}", j.b0, j.b);
        // pinned right end: v(1) = m(1) = 0
        assert!(tv.selector_components[4].norm() <= 1e-10 * scale);
        assert!(tv.selector_components[5].norm() <= 1e-10 * scale);
        assert!(tv.ports.iter().all(|p| p.condition_residual <= 1e-10 * scale));
    }
}

#[test]
fn assembly_is_deterministic() {
    let m = build_chain(&scenario("inhomog_m3").document).unwrap();
    let a = bundle_of_model(&m, 20);
    let c = bundle_of_model(&m, 20);
    assert_eq!(a.a, c.a);
    assert_eq!(a.m_diag, c.m_diag);
    assert_eq!(a.config_hash(), c.config_hash());
}

#[test]
fn derivative_traces_converge_at_second_order() {
    use std::f64::consts::PI;
    // v = cos(πζ) + ζ², m = sin²(πζ): free-free compatible; exact v'(1) = 2
    let err = |n: usize| {
        let b = bundle(&uniform("free", "free", 1.0, 1.0, 1.0), n);
        let x = b.sample_state(|_, z| [re((PI * z).cos() + z * z), re((PI * z).sin().powi(2))], &[]);
        (traces(&b, &x).unwrap().selector_components[6] - re(2.0)).norm()
    };
    let e: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| err(n)).collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{e:?}");
    }
}

#[test]
fn energy_errors_and_values() {
    let b = bundle(&uniform("free", "free", 1.0, 1.0, 1.0), 16);
    assert!(matches!(discretize::energy(&b, &[re(0.0)]), Err(DiscretizeError::DimensionMismatch { .. })));
    let x = b.sample_state(|_, _| [re(1.0), re(0.0)], &[]);
    assert!((discretize::energy(&b, &x).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn matrix_market_dump() {
    let b = scenario_bundle("chen87_m2", 8);
    let dir = tempfile::tempdir().unwrap();
    b.write_matrix_market(dir.path()).unwrap();
    let a = std::fs::read_to_string(dir.path().join("A_h.mtx")).unwrap();
    assert!(a.starts_with("%%MatrixMarket matrix coordinate real general"));
    let header: Vec<usize> = a.lines().nth(1).unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(header[0], b.dim());
    assert_eq!(header[2], a.lines().count() - 2);
}
