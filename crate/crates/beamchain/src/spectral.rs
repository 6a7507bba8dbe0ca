//! Spectrum, resolvent norms along the imaginary axis, the kernel projector,
//! and the classical characteristic equations of uniform beams.
//!
//! All norms are energy norms: computations run on Ã = M^{-1/2} S M^{-1/2},
//! which is unitarily similar (in the energy inner product) to A_h.

use faer::c64;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::discretize::OperatorBundle;
use crate::linalg::{self, re, CMat, Csr};
use crate::model::Closure;

pub const MAX_DENSE_DIM: usize = 5000;
/// kernel threshold relative to ‖Ã‖
pub const KERNEL_TOL: f64 = 1e-10;
pub const KERNEL_WARN: f64 = 1e-6;
/// resolvent sentinel: σ_min(iβ − Ã) below this fraction of ‖Ã‖ counts as singular
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("dense eigen-solver did not converge")]
    ConvergenceFailure,
    #[error("dimension {0} exceeds the dense limit {MAX_DENSE_DIM}")]
    DimensionTooLarge(usize),
    #[error("empty spectrum")]
    EmptySpectrum,
    #[error("unsupported closure pair for the uniform-beam oracle: {0}")]
    UnsupportedClosure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub eigenvalues: Vec<c64>,
    pub abscissa: f64,
    /// ‖Ã w − λ w‖ for unit eigenvectors w of the symmetrized generator
    pub method_residuals: Vec<f64>,
    pub norm_estimate: f64,
    /// eigenvectors in reduced (not symmetrized) coordinates, column k ↔ eigenvalue k
    #[serde(skip)]
    pub vectors: Option<CMat>,
}

impl Spectrum {
    pub fn max_residual(&self) -> f64 {
        self.method_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Eigenvalues sorted by modulus (ascending).
    pub fn by_modulus(&self) -> Vec<c64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        v
    }

    /// Abscissa after removing the `kernel_dim` eigenvalues closest to zero.
    pub fn abscissa_off_kernel(&self, kernel_dim: usize) -> f64 {
        let v = self.by_modulus();
        v[kernel_dim.min(v.len())..].iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Abscissa over the resolved part of the spectrum, |λ| ≤ `frac`·max|λ|,
    /// excluding the kernel.
    pub fn resolved_abscissa(&self, kernel_dim: usize, frac: f64) -> f64 {
        let v = self.by_modulus();
        let top = v.last().map(|z| z.norm()).unwrap_or(0.0);
        v[kernel_dim.min(v.len())..]
            .iter()
            .filter(|z| z.norm() <= frac * top)
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn spectral_abscissa(s: &Spectrum) -> Result<f64, SpectralError> {
    abscissa_of(&s.eigenvalues)
}

pub fn abscissa_of(values: &[c64]) -> Result<f64, SpectralError> {
    if values.is_empty() {
        return Err(SpectralError::EmptySpectrum);
    }
    Ok(values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn dense(a: &Csr) -> CMat {
    a.to_dense()
}

/// Dense eigen-decomposition of the symmetrized generator.
pub fn eigenvalues(bundle: &OperatorBundle) -> Result<Spectrum, SpectralError> {
    let n = bundle.dim();
    if n > MAX_DENSE_DIM {
        return Err(SpectralError::DimensionTooLarge(n));
    }
    let at = bundle.symmetrized();
    let (vals, w): (Vec<c64>, CMat) = if bundle.is_real() {
        let d = Mat::<f64>::from_fn(n, n, |i, j| at.get(i, j).re);
        let e = d.eigen().map_err(|_| SpectralError::ConvergenceFailure)?;
        ((0..n).map(|i| e.S().column_vector()[i]).collect(), e.U().to_owned())
    } else {
        let d = at.to_dense();
        let e = d.eigen().map_err(|_| SpectralError::ConvergenceFailure)?;
        ((0..n).map(|i| e.S().column_vector()[i]).collect(), e.U().to_owned())
    };
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SpectralError::ConvergenceFailure);
    }
    // normalize columns, residuals
    let mut w = w;
    let cols: Vec<(Vec<c64>, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut col: Vec<c64> = (0..n).map(|i| w[(i, k)]).collect();
            let nrm = linalg::norm2(&col);
            col.iter_mut().for_each(|z| *z /= nrm);
            let aw = at.matvec(&col);
            let r = aw.iter().zip(&col).map(|(a, x)| (a - vals[k] * x).norm_sqr()).sum::<f64>().sqrt();
            (col, r)
        })
        .collect();
    let mut residuals = Vec::with_capacity(n);
    for (k, (col, r)) in cols.into_iter().enumerate() {
        for i in 0..n {
            w[(i, k)] = col[i];
        }
        residuals.push(r);
    }
    let sq: Vec<f64> = bundle.m_diag.iter().map(|m| m.sqrt()).collect();
    let vectors = linalg::from_fn(n, n, |i, k| w[(i, k)] / sq[i]);
    Ok(Spectrum {
        abscissa: abscissa_of(&vals)?,
        eigenvalues: vals,
        method_residuals: residuals,
        norm_estimate: at.norm_bound(),
        vectors: Some(vectors),
    })
}

// ---------------------------------------------------------------------------
// kernel

#[derive(Clone, Debug, Serialize)]
pub struct KernelProjection {
    pub dim: usize,
    /// M-orthonormal kernel vectors in reduced coordinates
    #[serde(skip)]
    pub basis: Vec<Vec<c64>>,
    /// the smallest singular values of Ã relative to σ_max (ascending)
    pub relative_singular_values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl KernelProjection {
    /// P x = x − V Vᴴ M x (M-orthogonal projection onto the complement of the kernel).
    pub fn project(&self, bundle: &OperatorBundle, x: &[c64]) -> Vec<c64> {
        let mut out = x.to_vec();
        for v in &self.basis {
            let mx: Vec<c64> = x.iter().zip(&bundle.m_diag).map(|(z, w)| z * *w).collect();
            let coef = linalg::dot(&mx, v); // ⟨x, v⟩_M
            for (o, vi) in out.iter_mut().zip(v) {
                *o -= vi * coef;
            }
        }
        out
    }

    /// Kernel basis in symmetrized coordinates (orthonormal).
    pub fn tilde_basis(&self, bundle: &OperatorBundle) -> Vec<Vec<c64>> {
        self.basis.iter().map(|v| bundle.to_tilde(v)).collect()
    }
}

pub fn kernel_projection(bundle: &OperatorBundle) -> Result<KernelProjection, SpectralError> {
    let n = bundle.dim();
    if n > MAX_DENSE_DIM {
        return Err(SpectralError::DimensionTooLarge(n));
    }
    let at = bundle.symmetrized().to_dense();
    let (_, s, v) = linalg::svd_full(&at);
    let smax = s.first().copied().unwrap_or(0.0);
    let mut basis = vec![];
    let mut rel = vec![];
    let mut warnings = vec![];
    for k in (0..n).rev() {
        let r = if smax > 0.0 { s[k] / smax } else { 0.0 };
        if r > KERNEL_WARN {
            break;
        }
        rel.push(r);
        if r <= KERNEL_TOL {
            let col: Vec<c64> = (0..n).map(|i| v[(i, k)]).collect();
            basis.push(bundle.from_tilde(&col));
        } else {
            warnings.push(format!("borderline singular value {r:e} (relative) left outside the kernel"));
        }
    }
    if rel.is_empty() {
        rel.push(s.last().copied().unwrap_or(0.0) / smax.max(f64::MIN_POSITIVE));
    }
    Ok(KernelProjection { dim: basis.len(), basis, relative_singular_values: rel, warnings })
}

// ---------------------------------------------------------------------------
// resolvent

/// Shared factorization context for resolvent evaluations; optionally restricted
/// to the orthogonal complement of a kernel (bordered systems).
pub struct ResolventContext {
    at: Csr,
    border: Vec<Vec<c64>>,
    norm: f64,
    n: usize,
}

fn bordered(at: &Csr, border: &[Vec<c64>], beta: f64) -> SparseColMat<usize, c64> {
    let n = at.nrows;
    let k = border.len();
    let mut trip: Vec<Triplet<usize, usize, c64>> = Vec::with_capacity(at.nnz() + n + 2 * n * k);
    for i in 0..n {
        trip.push(Triplet::new(i, i, c64::new(0.0, beta)));
        for (j, v) in at.row(i) {
            trip.push(Triplet::new(i, j, -v));
        }
    }
    for (c, q) in border.iter().enumerate() {
        for (i, qi) in q.iter().enumerate() {
            if *qi != re(0.0) {
                trip.push(Triplet::new(i, n + c, *qi));
                trip.push(Triplet::new(n + c, i, qi.conj()));
            }
        }
    }
    SparseColMat::try_new_from_triplets(n + k, n + k, &trip).expect("valid triplets")
}

impl ResolventContext {
    pub fn new(bundle: &OperatorBundle, kernel: Option<&KernelProjection>) -> Self {
        let at = bundle.symmetrized();
        let border = kernel.map(|k| k.tilde_basis(bundle)).unwrap_or_default();
        let norm = at.norm_bound();
        ResolventContext { n: at.nrows, at, border, norm }
    }

    pub fn deflated(&self) -> bool {
        !self.border.is_empty()
    }

    fn project(&self, x: &mut [c64]) {
        for q in &self.border {
            let c = linalg::dot(x, q);
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= qi * c;
            }
        }
    }

    /// ‖(iβ − Ã)⁻¹‖ (restricted to the kernel complement when bordered); +∞ if singular.
    pub fn norm(&self, beta: f64) -> f64 {
        let m = bordered(&self.at, &self.border, beta);
        let lu: Lu<usize, c64> = match m.sp_lu() {
            Ok(lu) => lu,
            Err(_) => return f64::INFINITY,
        };
        let n = self.n;
        let nb = n + self.border.len();
        let p = 3.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ beta.to_bits());
        let mut x: Vec<Vec<c64>> = (0..p)
            .map(|_| {
                let mut v: Vec<c64> = (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
                self.project(&mut v);
                v
            })
            .collect();
        orthonormalize(&mut x);
        let solve = |v: &[c64], adj: bool| -> Vec<c64> {
            let mut b = Mat::<c64>::zeros(nb, 1);
            for i in 0..n {
                b[(i, 0)] = v[i];
            }
            if adj {
                lu.solve_transpose_in_place_with_conj(Conj::Yes, b.as_mut());
            } else {
                lu.solve_in_place_with_conj(Conj::No, b.as_mut());
            }
            (0..n).map(|i| b[(i, 0)]).collect()
        };
        let mut est = 0.0f64;
        for _it in 0..200 {
            let y: Vec<Vec<c64>> = x.iter().map(|v| solve(v, false)).collect();
            if y.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return f64::INFINITY;
            }
            // Rayleigh–Ritz on XᴴRᴴRX = YᴴY
            let g = linalg::from_fn(p, p, |i, j| linalg::dot(&y[j], &y[i]));
            let top = linalg::herm_eigenvalues(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt();
            let mut z: Vec<Vec<c64>> = y.iter().map(|v| solve(v, true)).collect();
            for v in z.iter_mut() {
                self.project(v);
            }
            orthonormalize(&mut z);
            x = z;
            let done = (top - est).abs() <= 1e-12 * top;
            est = top;
            if !est.is_finite() || (1.0 / est) <= SINGULAR_TOL * self.norm {
                return f64::INFINITY;
            }
            if done {
                break;
            }
        }
        est
    }
}

fn orthonormalize(vs: &mut Vec<Vec<c64>>) {
    let mut out: Vec<Vec<c64>> = Vec::with_capacity(vs.len());
    for v in vs.iter() {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = linalg::dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= qi * c;
                }
            }
        }
        let nrm = linalg::norm2(&w);
        if nrm > 0.0 && nrm.is_finite() {
            w.iter_mut().for_each(|z| *z /= nrm);
            out.push(w);
        }
    }
    *vs = out;
}

pub fn resolvent_norm(bundle: &OperatorBundle, beta: f64) -> f64 {
    ResolventContext::new(bundle, None).norm(beta)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolventSweep {
    pub betas: Vec<f64>,
    #[serde(serialize_with = "ser_f64_vec")]
    pub norms: Vec<f64>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub sup_estimate: f64,
    pub beta_star: f64,
    pub has_sentinel: bool,
    pub range: [f64; 2],
    pub requested_samples: usize,
    /// evaluated on the orthogonal complement of the kernel
    pub deflated: bool,
}

impl ResolventSweep {
    pub fn finite(&self) -> bool {
        !self.has_sentinel && self.sup_estimate.is_finite()
    }
}

fn ser_f64_vec<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if x.is_finite() {
            seq.serialize_element(x)?;
        } else {
            seq.serialize_element("inf")?;
        }
    }
    seq.end()
}

/// Mixed linear/logarithmic samples; a symmetric range is sampled as a mirrored half.
pub fn sample_frequencies(beta_min: f64, beta_max: f64, n: usize) -> Vec<f64> {
    let symmetric = beta_min < 0.0 && (beta_min + beta_max).abs() <= 1e-12 * beta_max.abs();
    let half = |a: f64, b: f64, n: usize| -> Vec<f64> {
        let nlin = n / 2;
        let nlog = n - nlin;
        let mut v: Vec<f64> = (0..nlin).map(|k| a + (b - a) * k as f64 / (nlin.max(2) - 1) as f64).collect();
        if a >= 0.0 {
            let lo = a.max((b - a) * 1e-3).max(f64::MIN_POSITIVE);
            for k in 0..nlog {
                v.push(lo * (b / lo).powf(k as f64 / (nlog.max(2) - 1) as f64));
            }
        } else {
            // range straddling zero asymmetrically: log samples on both sides
            let span = b - a;
            let lo = span * 1e-3;
            for k in 0..nlog {
                let t = k as f64 / (nlog.max(2) - 1) as f64;
                let mag = lo * (span / lo).powf(t);
                let bsd = if k % 2 == 0 { mag } else { -mag };
                if bsd >= a && bsd <= b {
                    v.push(bsd);
                }
            }
        }
        v
    };
    let mut v = if symmetric {
        let h = half(0.0, beta_max, n.div_ceil(2));
        let mut all: Vec<f64> = h.iter().map(|b| -b).collect();
        all.extend(h);
        all
    } else {
        half(beta_min, beta_max, n)
    };
    v.retain(|b| *b >= beta_min && *b <= beta_max);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| a == b);
    v
}

pub fn resolvent_sweep(bundle: &OperatorBundle, beta_min: f64, beta_max: f64, n_samples: usize) -> Result<ResolventSweep, SpectralError> {
    resolvent_sweep_with(&ResolventContext::new(bundle, None), beta_min, beta_max, n_samples)
}

pub fn resolvent_sweep_with(ctx: &ResolventContext, beta_min: f64, beta_max: f64, n_samples: usize) -> Result<ResolventSweep, SpectralError> {
    if n_samples < 16 {
        return Err(SpectralError::InvalidArgument(format!("n_samples = {n_samples} < 16")));
    }
    if !(beta_min < beta_max) || !beta_min.is_finite() || !beta_max.is_finite() {
        return Err(SpectralError::InvalidArgument(format!("invalid range [{beta_min}, {beta_max}]")));
    }
    let mut betas = sample_frequencies(beta_min, beta_max, n_samples);
    let mut norms: Vec<f64> = betas.par_iter().map(|&b| ctx.norm(b)).collect();

    // golden-section refinement around the three largest samples
    let mut order: Vec<usize> = (0..betas.len()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let peaks: Vec<usize> = order.into_iter().take(3).collect();
    let refined: Vec<Vec<(f64, f64)>> = peaks
        .par_iter()
        .map(|&k| {
            let lo = if k == 0 { betas[0] } else { betas[k - 1] };
            let hi = if k + 1 == betas.len() { betas[k] } else { betas[k + 1] };
            golden_max(|b| ctx.norm(b), lo, hi, 48)
        })
        .collect();
    for (b, v) in refined.into_iter().flatten() {
        betas.push(b);
        norms.push(v);
    }
    let mut pairs: Vec<(f64, f64)> = betas.into_iter().zip(norms).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    let (betas, norms): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (kmax, sup) = norms.iter().enumerate().fold((0, 0.0f64), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    Ok(ResolventSweep {
        has_sentinel: norms.iter().any(|v| v.is_infinite()),
        beta_star: betas[kmax],
        sup_estimate: sup,
        betas,
        norms,
        range: [beta_min, beta_max],
        requested_samples: n_samples,
        deflated: ctx.deflated(),
    })
}

/// Golden-section search for a maximum on [a, b]; returns every evaluation.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> Vec<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut out = vec![];
    if !(b > a) {
        return out;
    }
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    out.push((c, fc));
    out.push((d, fd));
    for _ in 0..iters {
        if fc.is_infinite() || fd.is_infinite() {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
            out.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
            out.push((d, fd));
        }
        if (b - a) <= 1e-13 * b.abs().max(1.0) {
            break;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// uniform beam oracle

fn characteristic(pair: (Closure, Closure)) -> Result<Option<fn(f64) -> f64>, SpectralError> {
    use Closure::*;
    let key = |a: Closure, b: Closure| match (a, b) {
        (Clamped, Free) | (Free, Clamped) => Some(0),
        (Pinned, Pinned) => Some(1),
        (Clamped, Clamped) => Some(2),
        (Clamped, Pinned) | (Pinned, Clamped) => Some(3),
        _ => None,
    };
    match key(pair.0, pair.1) {
        // cos κ cosh κ + 1 = 0, divided by cosh κ
        Some(0) => Ok(Some(|k: f64| k.cos() + 1.0 / k.cosh())),
        Some(1) => Ok(None),
        // cos κ cosh κ − 1 = 0
        Some(2) => Ok(Some(|k: f64| k.cos() - 1.0 / k.cosh())),
        // tan κ = tanh κ
        Some(3) => Ok(Some(|k: f64| k.sin() - k.cos() * k.tanh())),
        _ => Err(SpectralError::UnsupportedClosure(format!("{}-{}", pair.0.name(), pair.1.name()))),
    }
}

/// First `count` positive roots κ of the closure pair's characteristic equation.
/// Uniform-beam eigenvalues are λ = ±iκ²·sqrt(EI/ρ)/L².
pub fn uniform_beam_oracle(closure: (Closure, Closure), count: usize) -> Result<Vec<f64>, SpectralError> {
    if count > 20 {
        return Err(SpectralError::InvalidArgument(format!("count = {count} > 20")));
    }
    let Some(f) = characteristic(closure)? else {
        return Ok((1..=count).map(|k| k as f64 * std::f64::consts::PI).collect());
    };
    let mut roots = vec![];
    let step = 0.01;
    let mut a = 0.5;
    let mut fa = f(a);
    while roots.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi) = (a, b);
            let mut flo = fa;
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if flo * fm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_roots() {
        let cf = uniform_beam_oracle((Closure::Clamped, Closure::Free), 3).unwrap();
        for (r, e) in cf.iter().zip([1.875104, 4.694091, 7.854757]) {
            assert!((r - e).abs() < 1e-6, "{r}");
        }
        let pp = uniform_beam_oracle((Closure::Pinned, Closure::Pinned), 2).unwrap();
        assert_eq!(pp, vec![std::f64::consts::PI, 2.0 * std::f64::consts::PI]);
        let cc = uniform_beam_oracle((Closure::Clamped, Closure::Clamped), 1).unwrap();
        assert!((cc[0] - 4.730041).abs() < 1e-6);
        let cp = uniform_beam_oracle((Closure::Clamped, Closure::Pinned), 1).unwrap();
        assert!((cp[0] - 3.926602).abs() < 1e-6);
        assert!(matches!(
            uniform_beam_oracle((Closure::Free, Closure::Free), 1),
            Err(SpectralError::UnsupportedClosure(_))
        ));
    }

    #[test]
    fn abscissa_direct_max() {
        let v = [c64::new(-1.0, 2.0), c64::new(-1.0, -2.0), c64::new(-0.3, 0.0)];
        assert_eq!(abscissa_of(&v).unwrap(), -0.3);
        assert_eq!(abscissa_of(&[]), Err(SpectralError::EmptySpectrum));
    }

    #[test]
    fn symmetric_sampling_mirrors() {
        let b = sample_frequencies(-50.0, 50.0, 64);
        let mut neg: Vec<f64> = b.iter().filter(|x| **x < 0.0).map(|x| -x).collect();
        let mut pos: Vec<f64> = b.iter().filter(|x| **x > 0.0).copied().collect();
        neg.sort_by(f64::total_cmp);
        pos.sort_by(f64::total_cmp);
        assert_eq!(neg, pos);
    }
}
