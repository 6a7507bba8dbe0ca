mod common;

use beamchain::c64;
use beamchain::linalg;
use beamchain::model::build_chain;
use beamchain::spectral::{self, ResolventContext, SpectralError};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn conservative_pair() -> String {
    two_segment(r#"{"closure":"free"}"#, r#"{"closure":"clamped"}"#, 2, [0.0, 0.0])
}

#[test]
fn clamped_free_lowest_modes() {
    let b = bundle(&uniform("clamped", "free", 1.0, 1.0, 1.0), 200);
    let s = spectral::eigenvalues(&b).unwrap();
    let by_mod = s.by_modulus();
    let expected = [3.51602, 22.0345, 61.6972];
    // each modulus appears as a conjugate pair
    for (k, e) in expected.iter().enumerate() {
        for z in &by_mod[2 * k..2 * k + 2] {
            assert!(rel(z.norm(), *e) < 5e-3, "{z} vs {e}");
            assert!(z.re.abs() <= 1e-8 * z.norm() + 1e-8);
        }
        assert!((by_mod[2 * k] - by_mod[2 * k + 1].conj()).norm() <= 1e-8 * e);
    }
    assert!(s.max_residual() <= 1e-8 * s.norm_estimate);
}

#[test]
fn conservative_spectrum_is_imaginary() {
    let b = bundle(&conservative_pair(), 40);
    assert!(b.conservative);
    let s = spectral::eigenvalues(&b).unwrap();
    for z in &s.eigenvalues {
        assert!(z.re.abs() <= 1e-8 * z.norm() + 1e-8, "{z}");
    }
    assert!(spectral::spectral_abscissa(&s).unwrap().abs() <= 1e-8);
}

#[test]
fn damped_chain_abscissa_negative_and_mesh_consistent() {
    let a50 = spectral::eigenvalues(&scenario_bundle("chen87_m2", 50)).unwrap().abscissa;
    let a100 = spectral::eigenvalues(&scenario_bundle("chen87_m2", 100)).unwrap().abscissa;
    assert!(a50 < 0.0 && a100 < 0.0);
    assert!(rel(a50, a100) < 0.05, "{a50} vs {a100}");
}

#[test]
fn real_spectrum_is_conjugation_closed() {
    let b = scenario_bundle("inhomog_m3", 20);
    let s = spectral::eigenvalues(&b).unwrap();
    for z in &s.eigenvalues {
        let d = s.eigenvalues.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
        assert!(d <= 1e-8 * (1.0 + z.norm()), "{z}");
    }
}

#[test]
fn eigenvalues_scale_with_density() {
    let m = build_chain(&scenario("inhomog_m3").document).unwrap();
    let base = spectral::eigenvalues(&bundle_of_model(&m, 16)).unwrap().by_modulus();
    for c in [0.5, 2.0, 10.0] {
        let scaled = spectral::eigenvalues(&bundle_of_model(&m.with_density_scaled(c), 16)).unwrap();
        let mut want: Vec<c64> = base.iter().map(|z| z * c).collect();
        let mut got = scaled.eigenvalues.clone();
        let key = |z: &c64| (z.norm(), z.im);
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (w, g) in want.iter().zip(&got) {
            assert!((w - g).norm() <= 1e-8 * w.norm().max(1.0), "c = {c}: {w} vs {g}");
        }
    }
}

#[test]
fn resolvent_near_eigenfrequency_is_large() {
    let b = bundle(&uniform("clamped", "free", 1.0, 1.0, 1.0), 200);
    let s = spectral::eigenvalues(&b).unwrap();
    let w1 = s.by_modulus()[0].im.abs();
    assert!((w1 - 3.51602).abs() < 1e-3);
    assert!(spectral::resolvent_norm(&b, w1 + 5e-7) >= 1e6);
}

#[test]
fn resolvent_at_zero_matches_dense_svd() {
    let b = scenario_bundle("chen87_m2", 30);
    let r = spectral::resolvent_norm(&b, 0.0);
    let sv = linalg::singular_values(&b.symmetrized().to_dense());
    let want = 1.0 / sv.last().unwrap();
    assert!(r.is_finite());
    assert!(rel(r, want) < 1e-8, "{r} vs {want}");
}

#[test]
fn resolvent_tail_decreases() {
    let b = scenario_bundle("chen87_m2", 16);
    let s = spectral::eigenvalues(&b).unwrap();
    let top = s.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(1e4 > 1.5 * top, "grid spectrum reaches {top}");
    for sign in [1.0, -1.0] {
        let betas = [1e4, 2e4, 5e4, 1e5].map(|b| sign * b);
        let norms: Vec<f64> = betas.iter().map(|&x| spectral::resolvent_norm(&b, x)).collect();
        for (x, n) in betas.iter().zip(&norms) {
            assert!(*n <= 10.0 / (x.abs() - top), "beta {x}: {n}");
        }
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }
}

#[test]
fn damped_sweep_is_finite() {
    let b = scenario_bundle("chen87_m2", 50);
    let sw = spectral::resolvent_sweep(&b, 0.0, 200.0, 64).unwrap();
    assert!(!sw.has_sentinel && sw.finite());
    assert!(sw.norms.iter().all(|n| *n > 0.0 && *n <= sw.sup_estimate));
    assert!(sw.betas.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn conservative_sweep_hits_sentinel() {
    let b = bundle(&uniform("clamped", "free", 1.0, 1.0, 1.0), 50);
    let sw = spectral::resolvent_sweep(&b, 0.0, 30.0, 32).unwrap();
    assert!(sw.has_sentinel);
    assert!(sw.sup_estimate.is_infinite());
}

#[test]
fn symmetric_sweep_on_real_system() {
    let b = scenario_bundle("chen87_m2", 30);
    let sw = spectral::resolvent_sweep(&b, -50.0, 50.0, 64).unwrap();
    let mut pairs = 0;
    for (x, n) in sw.betas.iter().zip(&sw.norms) {
        if *x <= 0.0 {
            continue;
        }
        if let Some(k) = sw.betas.iter().position(|y| *y == -x) {
            assert!(rel(sw.norms[k], *n) <= 1e-8, "beta {x}: {} vs {n}", sw.norms[k]);
            pairs += 1;
        }
    }
    assert!(pairs >= 16);
}

#[test]
fn sweep_rejects_too_few_samples() {
    let b = scenario_bundle("chen87_m2", 8);
    assert!(matches!(spectral::resolvent_sweep(&b, 0.0, 10.0, 15), Err(SpectralError::InvalidArgument(_))));
}

#[test]
fn kernel_dimensions() {
    assert_eq!(spectral::kernel_projection(&scenario_bundle("chen87_m2", 50)).unwrap().dim, 0);
    assert_eq!(spectral::kernel_projection(&scenario_bundle("rigid_mode", 50)).unwrap().dim, 1);
}

#[test]
fn kernel_projector_axioms() {
    let b = scenario_bundle("rigid_mode", 30);
    let k = spectral::kernel_projection(&b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ip = |x: &[c64], y: &[c64]| -> c64 { x.iter().zip(y).zip(&b.m_diag).map(|((a, c), w)| a * c.conj() * *w).sum() };
    for _ in 0..20 {
        let x = random_state(&b, &mut rng);
        let y = random_state(&b, &mut rng);
        let px = k.project(&b, &x);
        let ppx = k.project(&b, &px);
        let scale = b.m_norm_sq(&x).sqrt();
        let d: Vec<c64> = px.iter().zip(&ppx).map(|(a, c)| a - c).collect();
        assert!(b.m_norm_sq(&d).sqrt() <= 1e-10 * scale);
        let py = k.project(&b, &y);
        let (l, r) = (ip(&px, &y), ip(&x, &py));
        assert!((l - r).norm() <= 1e-10 * scale * b.m_norm_sq(&y).sqrt());
        let _ = rng.random::<u8>();
    }
}

#[test]
fn deflated_sweep_is_finite_on_rigid_mode() {
    let b = scenario_bundle("rigid_mode", 30);
    let k = spectral::kernel_projection(&b).unwrap();
    let plain = spectral::resolvent_norm(&b, 0.0);
    assert!(plain.is_infinite());
    let ctx = ResolventContext::new(&b, Some(&k));
    assert!(ctx.norm(0.0).is_finite());
}

#[test]
fn oracle_unsupported_pair_and_bounds() {
    use beamchain::model::Closure;
    assert!(spectral::uniform_beam_oracle((Closure::Pinned, Closure::Free), 2).is_err());
    assert!(spectral::uniform_beam_oracle((Closure::Clamped, Closure::Free), 21).is_err());
    let pp = spectral::uniform_beam_oracle((Closure::Pinned, Closure::Pinned), 4).unwrap();
    let b = bundle(&uniform("pinned", "pinned", 2.0, 2.0, 8.0), 100);
    // λ = iκ²·sqrt(EI/ρ)/L²
    let w = spectral::eigenvalues(&b).unwrap().by_modulus();
    for (k, kappa) in pp.iter().enumerate() {
        let want = kappa * kappa * 2.0 / 4.0;
        assert!(rel(w[2 * k].norm(), want) < 5e-3, "{} vs {want}", w[2 * k]);
    }
}
