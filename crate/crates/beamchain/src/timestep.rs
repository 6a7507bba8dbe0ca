//! Implicit-midpoint time integration, energy decay fits and generic initial data.
//!
//! The midpoint rule is exactly energy-conserving on skew generators and
//! monotonically dissipative on dissipative ones, so the discrete energy honestly
//! mirrors the semi-discrete balance.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::c64;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::{Conj, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::discretize::OperatorBundle;
use crate::linalg::{self, re};
use crate::spectral::KernelProjection;

pub const MAX_STEPS: f64 = 1e7;
pub const MAX_SAMPLES: usize = 100_000;
pub const MIN_FIT_SAMPLES: usize = 50;
/// decay rates above −NON_DECAY_TOL count as non-decaying
pub const NON_DECAY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimestepError {
    #[error("sparse factorization of the midpoint matrix failed")]
    FactorizationFailed,
    #[error("state dimension {got} does not match the operator ({expected})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),
    #[error("not enough samples for a fit: {got} < {MIN_FIT_SAMPLES}")]
    TooFewSamples { got: usize },
    #[error("initial energy must be positive, got {0}")]
    NonPositiveEnergy(f64),
}

type Key = (u64, u64, u64);

struct Factor {
    lu: Lu<usize, c64>,
}

fn cache() -> &'static Mutex<HashMap<Key, Arc<Factor>>> {
    static C: OnceLock<Mutex<HashMap<Key, Arc<Factor>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

const CACHE_CAP: usize = 8;

/// LU of (I − θ A_h), cached per (operator, θ, shift).
fn factor(bundle: &OperatorBundle, theta: f64) -> Result<Arc<Factor>, TimestepError> {
    let key = (bundle.config_hash(), theta.to_bits(), bundle.dim() as u64);
    if let Some(f) = cache().lock().unwrap().get(&key) {
        return Ok(f.clone());
    }
    let m = bundle.a.shifted_faer(re(1.0), re(-theta));
    let lu = m.sp_lu().map_err(|_| TimestepError::FactorizationFailed)?;
    let f = Arc::new(Factor { lu });
    let mut c = cache().lock().unwrap();
    if c.len() >= CACHE_CAP {
        c.clear();
    }
    c.insert(key, f.clone());
    Ok(f)
}

fn solve(f: &Factor, rhs: &[c64]) -> Vec<c64> {
    let mut b = Mat::<c64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    f.lu.solve_in_place_with_conj(Conj::No, b.as_mut());
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

/// One implicit-midpoint step: (I − dt/2 A) x⁺ = (I + dt/2 A) x.
pub fn step_midpoint(bundle: &OperatorBundle, x: &[c64], dt: f64) -> Result<Vec<c64>, TimestepError> {
    if x.len() != bundle.dim() {
        return Err(TimestepError::DimensionMismatch { expected: bundle.dim(), got: x.len() });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(TimestepError::InvalidArgument(format!("dt = {dt}")));
    }
    let f = factor(bundle, 0.5 * dt)?;
    Ok(step_with(bundle, &f, x, dt))
}

fn step_with(bundle: &OperatorBundle, f: &Factor, x: &[c64], dt: f64) -> Vec<c64> {
    let ax = bundle.a.matvec(x);
    let rhs: Vec<c64> = x.iter().zip(&ax).map(|(xi, ai)| xi + ai * (0.5 * dt)).collect();
    solve(f, &rhs)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub config_hash: u64,
    pub dt: f64,
    pub steps: usize,
    /// max over steps of H(t_{k+1}) − H(t_k), relative to H(0)
    pub max_relative_increase: f64,
}

/// Integrate to time `t_end` and record the energy (decimated to ≤ MAX_SAMPLES points).
pub fn simulate(bundle: &OperatorBundle, x0: &[c64], t_end: f64, dt: f64) -> Result<(EnergyTrace, Vec<c64>), TimestepError> {
    if x0.len() != bundle.dim() {
        return Err(TimestepError::DimensionMismatch { expected: bundle.dim(), got: x0.len() });
    }
    if !(dt > 0.0) || !dt.is_finite() || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(TimestepError::InvalidArgument(format!("T = {t_end}, dt = {dt}")));
    }
    let steps_f = (t_end / dt).ceil();
    if steps_f > MAX_STEPS {
        return Err(TimestepError::InvalidArgument(format!("T/dt = {steps_f:e} exceeds {MAX_STEPS:e} steps")));
    }
    let steps = steps_f as usize;
    let dt = t_end / steps as f64;
    let every = steps.div_ceil(MAX_SAMPLES - 1).max(1);
    let f = factor(bundle, 0.5 * dt)?;
    let mut x = x0.to_vec();
    let h0 = bundle.energy_of(&x);
    let mut hist = EnergyTrace { times: vec![0.0], energies: vec![h0], config_hash: bundle.config_hash(), dt, steps, max_relative_increase: 0.0 };
    let mut prev = h0;
    let scale = if h0 > 0.0 { h0 } else { 1.0 };
    for k in 1..=steps {
        x = step_with(bundle, &f, &x, dt);
        let h = bundle.energy_of(&x);
        if !h.is_finite() {
            return Err(TimestepError::NonFinite(k as f64 * dt));
        }
        hist.max_relative_increase = hist.max_relative_increase.max((h - prev) / scale);
        prev = h;
        if k % every == 0 || k == steps {
            hist.times.push(k as f64 * dt);
            hist.energies.push(h);
        }
    }
    Ok((hist, x))
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    /// M ≥ 1 in the envelope H(t) ≈ M e^{eta t}, from the fitted intercept
    #[serde(rename = "M")]
    pub m_const: f64,
    /// fitted exponential rate of the energy (twice the state-norm rate)
    pub eta: f64,
    pub window: [f64; 2],
    /// max |log H − fit| over the window
    pub residual: f64,
    pub non_decaying: bool,
    pub samples: usize,
}

pub fn fit_decay(trace: &EnergyTrace) -> Result<DecayFit, TimestepError> {
    fit_decay_samples(&trace.times, &trace.energies)
}

/// Least-squares fit of log H(t) against t on [T/10, T], using the running
/// suffix maximum as an envelope so that oscillatory energy exchange does not
/// bias the rate.
pub fn fit_decay_samples(t: &[f64], energy: &[f64]) -> Result<DecayFit, TimestepError> {
    if t.len() != energy.len() {
        return Err(TimestepError::InvalidArgument("t and energy lengths differ".into()));
    }
    if t.len() < MIN_FIT_SAMPLES {
        return Err(TimestepError::TooFewSamples { got: t.len() });
    }
    let h0 = energy[0];
    if !(h0 > 0.0) {
        return Err(TimestepError::NonPositiveEnergy(h0));
    }
    let t_end = *t.last().unwrap();
    let t_lo = t[0] + (t_end - t[0]) / 10.0;
    let mut env = vec![0.0; energy.len()];
    let mut run = 0.0f64;
    for k in (0..energy.len()).rev() {
        run = run.max(energy[k]);
        env[k] = run;
    }
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(&env)
        .filter(|(ti, h)| **ti >= t_lo && **h > 0.0)
        .map(|(ti, h)| (*ti, h.ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(TimestepError::TooFewSamples { got: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let eta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - eta * mt;
    let residual = pts.iter().map(|p| (p.1 - (b + eta * p.0)).abs()).fold(0.0, f64::max);
    Ok(DecayFit {
        m_const: b.exp().max(1.0),
        eta,
        window: [t_lo, t_end],
        residual,
        non_decaying: eta >= -NON_DECAY_TOL,
        samples: pts.len(),
    })
}

/// Seeded smooth random initial state with unit energy, orthogonal (in energy)
/// to the kernel when one is given. Real whenever the operator is real.
pub fn generic_initial_state(bundle: &OperatorBundle, seed: u64, kernel: Option<&KernelProjection>) -> Result<Vec<c64>, TimestepError> {
    let n = bundle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = bundle.is_real();
    let w: Vec<c64> = (0..n)
        .map(|_| {
            let a = rng.random_range(-1.0..1.0);
            let b = if real { 0.0 } else { rng.random_range(-1.0..1.0) };
            c64::new(a, b)
        })
        .collect();
    let mut x = bundle.from_tilde(&w);
    // smoothing: a few backward-Euler-like solves damp the highest grid modes
    let f = factor(bundle, 0.1)?;
    for _ in 0..4 {
        x = solve(&f, &x);
        let e = bundle.energy_of(&x);
        if !(e > 0.0) || !e.is_finite() {
            return Err(TimestepError::NonFinite(0.0));
        }
        let s = (1.0 / e).sqrt();
        x.iter_mut().for_each(|z| *z *= s);
    }
    if let Some(k) = kernel {
        x = k.project(bundle, &x);
    }
    let e = bundle.energy_of(&x);
    if !(e > 0.0) {
        return Err(TimestepError::NonPositiveEnergy(e));
    }
    let s = (1.0 / e).sqrt();
    x.iter_mut().for_each(|z| *z *= s);
    Ok(x)
}

/// Step size resolving the data: dt = min(1e-2, 0.5/ν) with ν the growth of a
/// generic state under Ã (a frequency scale of the initial data).
pub fn default_dt(bundle: &OperatorBundle, x0: &[c64]) -> f64 {
    let w = bundle.to_tilde(x0);
    let nw = linalg::norm2(&w);
    if nw == 0.0 {
        return 1e-2;
    }
    let aw = bundle.symmetrized().matvec(&w);
    let nu = linalg::norm2(&aw) / nw;
    if nu > 0.0 && nu.is_finite() {
        (0.5 / nu).min(1e-2)
    } else {
        1e-2
    }
}

/// Horizon covering several e-foldings of the slowest resolved mode.
pub fn default_horizon(resolved_abscissa: f64) -> f64 {
    if resolved_abscissa < 0.0 && resolved_abscissa.is_finite() {
        (5.0 / resolved_abscissa.abs()).clamp(1.0, 200.0)
    } else {
        50.0
    }
}
