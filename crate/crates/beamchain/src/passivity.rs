//! Algebraic hypothesis checks: impedance passivity of explicit boundary matrices,
//! controller passivity / internal stability, port dissipativity, and the
//! classification of which damped trace selector the closed loop certifies.

use faer::c64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, re, CMat};
use crate::model::{ChainModel, Closure, ControllerSpec, Coupling, EndCondition, EndConditionSpec};
use crate::ports::{self, PortAlgebra, PortLocation};
use crate::report::ser_f64;

pub const TOL_PSD: f64 = 1e-10;
pub const TOL_BISECT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PassivityError {
    #[error("stacked boundary matrix [W_B; W_C] is singular")]
    SingularBoundaryMatrix,
    #[error("boundary matrices must be 2x4, got {0}x{1} and {2}x{3}")]
    Shape(usize, usize, usize, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    /// unit vector, entries as [re, im]
    pub vector: Vec<[f64; 2]>,
    /// v* Q v (negative on failure)
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PassivityVerdict {
    pub pass: bool,
    /// λ_min of the tested Hermitian matrix
    pub margin: f64,
    pub witness: Option<Witness>,
}

/// PSD test of the Hermitian part of `q` with tolerance relative to ‖q‖.
pub fn psd_verdict(q: &CMat) -> PassivityVerdict {
    if q.nrows() == 0 {
        return PassivityVerdict { pass: true, margin: 0.0, witness: None };
    }
    let (vals, vecs) = linalg::herm_eigen(q);
    let margin = vals[0];
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let pass = margin >= -TOL_PSD * scale;
    let witness = (!pass).then(|| Witness {
        vector: (0..q.nrows()).map(|i| [vecs[(i, 0)].re, vecs[(i, 0)].im]).collect(),
        value: margin,
    });
    PassivityVerdict { pass, margin, witness }
}

fn sigma4() -> CMat {
    let mut s = linalg::zeros(4, 4);
    for i in 0..2 {
        s[(i, i + 2)] = re(1.0);
        s[(i + 2, i)] = re(1.0);
    }
    s
}

/// Tests W*ΣW − Σ ⪰ 0 for W = [W_B; W_C].
pub fn check_boundary_matrices(w_b: &CMat, w_c: &CMat) -> Result<PassivityVerdict, PassivityError> {
    if w_b.nrows() != 2 || w_b.ncols() != 4 || w_c.nrows() != 2 || w_c.ncols() != 4 {
        return Err(PassivityError::Shape(w_b.nrows(), w_b.ncols(), w_c.nrows(), w_c.ncols()));
    }
    let w = linalg::vstack(&[w_b, w_c]);
    let s = linalg::singular_values(&w);
    if s[0] == 0.0 || s[3] <= 1e-12 * s[0] {
        return Err(PassivityError::SingularBoundaryMatrix);
    }
    let sig = sigma4();
    let q = linalg::sub(&linalg::matmul(&linalg::matmul(&linalg::adjoint(&w), &sig), &w), &sig);
    Ok(psd_verdict(&q))
}

#[derive(Clone, Debug, Serialize)]
pub struct ControllerVerdict {
    pub passive: bool,
    /// λ_max of the passivity form (≤ 0 when passive)
    pub passivity_lambda_max: f64,
    /// largest κ with Re⟨Ax + Bu, x⟩ − Re⟨Cx + Du, u⟩ ≤ −κ|Cx + Du|² (output form)
    pub kappa: f64,
    /// largest κ with the feed-through form −κ|Du|²
    pub kappa_feedthrough: f64,
    pub kernel_inclusion: bool,
    pub internally_stable: bool,
    /// max Re σ(A_c); absent for static feedback (n = 0)
    pub spectral_abscissa_ac: Option<f64>,
    pub notes: Vec<String>,
}

impl ControllerVerdict {
    pub fn ok(&self) -> bool {
        self.passive && self.kernel_inclusion && self.internally_stable
    }
}

/// Hermitian form of Re⟨Ax + Bu, x⟩ − Re⟨Cx + Du, u⟩ over (x, u).
fn controller_form(c: &ControllerSpec) -> CMat {
    let top = linalg::hstack(&[&c.a, &c.b]);
    let bot = linalg::scale(&linalg::hstack(&[&c.c, &c.d]), -1.0);
    linalg::herm_part(&linalg::vstack(&[&top, &bot]))
}

fn lambda_max(q: &CMat) -> f64 {
    linalg::herm_eigenvalues(q).last().copied().unwrap_or(0.0)
}

fn nsd(q: &CMat) -> bool {
    let vals = linalg::herm_eigenvalues(q);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    vals.last().copied().unwrap_or(0.0) <= TOL_PSD * scale
}

/// Smallest strictly positive eigenvalue of a PSD Hermitian matrix.
fn lambda_min_pos(c: &CMat) -> Option<f64> {
    let vals = linalg::herm_eigenvalues(c);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return None;
    }
    vals.into_iter().find(|&v| v > 1e-12 * top)
}

/// sup{κ ≥ 0 : R + κC ⪯ 0}, with C ⪰ 0. Returns +∞ when C vanishes, 0 when R itself
/// is not negative semidefinite.
pub fn max_kappa(r: &CMat, c: &CMat, hi_hint: Option<f64>) -> f64 {
    if !nsd(r) {
        return 0.0;
    }
    let Some(mu) = lambda_min_pos(c) else {
        return f64::INFINITY;
    };
    let feasible = |k: f64| nsd(&linalg::add(r, &linalg::scale(c, k)));
    let norm_r = linalg::herm_eigenvalues(r).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut hi = hi_hint.unwrap_or(norm_r / mu + 1.0).max(norm_r / mu + 1.0);
    // defensive: widen until infeasible
    let mut guard = 0;
    while feasible(hi) && guard < 60 {
        hi *= 2.0;
        guard += 1;
    }
    if feasible(hi) {
        return f64::INFINITY;
    }
    let mut lo = 0.0;
    if !feasible(lo) {
        return 0.0;
    }
    while hi - lo > TOL_BISECT * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn check_controller(c: &ControllerSpec) -> ControllerVerdict {
    let n = c.n();
    let q = controller_form(c);
    let lmax = lambda_max(&q);
    let passive = nsd(&q);
    let mut notes = vec![];

    // κ-weighted output |Cx + Du|² over (x, u)
    let cd = linalg::hstack(&[&c.c, &c.d]);
    let c_out = linalg::matmul(&linalg::adjoint(&cd), &cd);
    let mut c_ft = linalg::zeros(n + 2, n + 2);
    let dd = linalg::matmul(&linalg::adjoint(&c.d), &c.d);
    for i in 0..2 {
        for j in 0..2 {
            c_ft[(n + i, n + j)] = dd[(i, j)];
        }
    }
    let spec_hi = lambda_min_pos(&dd).map(|mu| 1.0 / mu + 1.0);
    let clip = |k: f64, what: &str, notes: &mut Vec<String>| {
        if k.is_infinite() {
            notes.push(format!("{what}: weight vanishes identically; kappa reported as 0"));
            0.0
        } else {
            k
        }
    };
    let (kappa, kappa_ft) = if passive {
        let k1 = max_kappa(&q, &c_out, spec_hi);
        let k2 = max_kappa(&q, &c_ft, spec_hi);
        (clip(k1, "output form", &mut notes), clip(k2, "feed-through form", &mut notes))
    } else {
        (0.0, 0.0)
    };

    let kernel_inclusion = if n == 0 {
        true
    } else {
        let stack = linalg::vstack(&[&c.d, &c.b]);
        let norm = linalg::op_norm(&stack).max(f64::MIN_POSITIVE);
        let rank = |m: &CMat| linalg::singular_values(m).iter().filter(|&&s| s > 1e-12 * norm).count();
        rank(&c.d) == rank(&stack)
    };
    let abscissa = (n > 0).then(|| linalg::eigenvalues(&c.a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max));
    let internally_stable = abscissa.is_none_or(|a| a < 0.0);
    ControllerVerdict {
        passive,
        passivity_lambda_max: lmax,
        kappa,
        kappa_feedthrough: kappa_ft,
        kernel_inclusion,
        internally_stable,
        spectral_abscissa_ac: abscissa,
        notes,
    }
}

// ---------------------------------------------------------------------------
// per-port checks

#[derive(Clone, Debug, Serialize)]
pub struct PortCheck {
    pub label: String,
    pub description: String,
    /// −(port power + controller rate) on admissible traces is PSD
    pub dissipative: PassivityVerdict,
    /// impedance passivity of explicit W matrices
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_matrices: Option<PassivityVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerVerdict>,
    /// whether the static gain meets the stated structural condition
    /// (left damping: diag(k, 0) with k > 0 or Herm K₀ ≻ 0; junctions: diagonal PSD or Herm K ≻ 0)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_condition: Option<bool>,
}

impl PortCheck {
    pub fn ok(&self) -> bool {
        self.dissipative.pass
            && self.boundary_matrices.as_ref().is_none_or(|v| v.pass)
            && self.controller.as_ref().is_none_or(|c| c.ok())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PortVerdicts {
    pub ports: Vec<PortCheck>,
}

impl PortVerdicts {
    pub fn all_ok(&self) -> bool {
        self.ports.iter().all(|p| p.ok())
    }
}

/// Restricted rate form R = Qᴴ J_rate Q on the admissible basis Q.
fn restricted_rate(p: &PortAlgebra) -> (CMat, CMat) {
    let qb = ports::admissible_basis(p);
    let r = linalg::herm_part(&linalg::matmul(&linalg::matmul(&linalg::adjoint(&qb), &ports::rate_form(p)), &qb));
    (qb, r)
}

fn damping_condition(k0: &CMat) -> bool {
    let diag_form = k0[(0, 0)].im == 0.0
        && k0[(0, 0)].re > 0.0
        && k0[(0, 1)] == re(0.0)
        && k0[(1, 0)] == re(0.0)
        && k0[(1, 1)] == re(0.0);
    diag_form || linalg::herm_eigenvalues(k0)[0] > 0.0
}

fn junction_condition(k: &CMat) -> bool {
    let diag = k[(0, 1)] == re(0.0) && k[(1, 0)] == re(0.0);
    let diag_psd = diag && k[(0, 0)].im == 0.0 && k[(1, 1)].im == 0.0 && k[(0, 0)].re >= 0.0 && k[(1, 1)].re >= 0.0;
    diag_psd || linalg::herm_eigenvalues(k)[0] > 0.0
}

fn describe_end(e: &EndConditionSpec) -> String {
    match &e.condition {
        EndCondition::Conservative(c) => format!("conservative {} closure", c.name()),
        EndCondition::Damped(_) => "static damping K0".into(),
        EndCondition::Controlled(c) => format!("dynamic controller (n = {})", c.n()),
        EndCondition::Explicit { .. } => "explicit W_B/W_C closure".into(),
    }
}

pub fn check_ports(model: &ChainModel) -> PortVerdicts {
    let algebras = ports::chain_ports(model);
    let ports = algebras
        .iter()
        .map(|p| {
            let (_, r) = restricted_rate(p);
            let dissipative = psd_verdict(&linalg::scale(&r, -1.0));
            let controller = ports::controller_of(model, p.location).map(check_controller);
            let (description, boundary_matrices, gain_condition) = match p.location {
                PortLocation::Left | PortLocation::Right => {
                    let e = if p.location == PortLocation::Left { &model.left_end } else { &model.right_end };
                    let bm = match &e.condition {
                        EndCondition::Explicit { w_b, w_c, .. } => check_boundary_matrices(w_b, w_c).ok(),
                        _ => None,
                    };
                    let gc = match &e.condition {
                        EndCondition::Damped(k0) => Some(damping_condition(k0)),
                        _ => None,
                    };
                    (describe_end(e), bm, gc)
                }
                PortLocation::Junction(j) => {
                    let js = &model.junctions[j];
                    let (d, gc) = match &js.coupling {
                        Coupling::Static(k) => (format!("kind {} junction, static gain", js.kind.get()), Some(junction_condition(k))),
                        Coupling::Dynamic(c) => (format!("kind {} junction, controller (n = {})", js.kind.get(), c.n()), None),
                    };
                    (d, None, gc)
                }
            };
            PortCheck { label: p.label.clone(), description, dissipative, boundary_matrices, controller, gain_condition }
        })
        .collect();
    PortVerdicts { ports }
}

// ---------------------------------------------------------------------------
// trace selectors

/// An end trace: (H x)₁ = v or (H x)₂ = m, or a derivative, at ζ = 0 of the first
/// segment or ζ = 1 of the last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Trace {
    #[serde(rename = "v(0)")]
    V0,
    #[serde(rename = "m(0)")]
    M0,
    #[serde(rename = "v'(0)")]
    Dv0,
    #[serde(rename = "m'(0)")]
    Dm0,
    #[serde(rename = "v(1)")]
    V1,
    #[serde(rename = "m(1)")]
    M1,
    #[serde(rename = "v'(1)")]
    Dv1,
    #[serde(rename = "m'(1)")]
    Dm1,
}

impl Trace {
    /// (is left end, trace index within (v, m, v', m'))
    pub fn position(self) -> (bool, usize) {
        match self {
            Trace::V0 => (true, ports::V),
            Trace::M0 => (true, ports::M),
            Trace::Dv0 => (true, ports::DV),
            Trace::Dm0 => (true, ports::DM),
            Trace::V1 => (false, ports::V),
            Trace::M1 => (false, ports::M),
            Trace::Dv1 => (false, ports::DV),
            Trace::Dm1 => (false, ports::DM),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Trace::V0 => "v(0)",
            Trace::M0 => "m(0)",
            Trace::Dv0 => "v'(0)",
            Trace::Dm0 => "m'(0)",
            Trace::V1 => "v(1)",
            Trace::M1 => "m(1)",
            Trace::Dv1 => "v'(1)",
            Trace::Dm1 => "m'(1)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorFamily {
    /// four-component selectors certifying asymptotic stability
    Asymptotic,
    /// five-component selectors certifying uniform exponential stability
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selector {
    pub id: String,
    pub family: SelectorFamily,
    pub components: Vec<Trace>,
}

/// All selectors: the four asymptotic ones and the eight exponential combinations.
pub fn all_selectors() -> Vec<Selector> {
    use Trace::*;
    let mut out = vec![];
    let asym = [[V0, Dv0, M0, Dm1], [V0, Dv0, Dm0, M1], [V0, M0, Dm0, Dv1], [Dv0, M0, Dm0, V1]];
    for (i, c) in asym.iter().enumerate() {
        out.push(Selector { id: format!("A{}", i + 1), family: SelectorFamily::Asymptotic, components: c.to_vec() });
    }
    let mut k = 0;
    for a in [Dv0, Dm0] {
        for b in [V1, Dm1] {
            for c in [Dv1, M1] {
                k += 1;
                out.push(Selector { id: format!("E{k}"), family: SelectorFamily::Exponential, components: vec![V0, M0, a, b, c] });
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectorResult {
    pub selector: Selector,
    #[serde(serialize_with = "ser_f64")]
    pub kappa_left: f64,
    #[serde(serialize_with = "ser_f64")]
    pub kappa_right: f64,
    #[serde(serialize_with = "ser_f64")]
    pub kappa: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationClass {
    pub selector: Option<Selector>,
    /// κ in Re⟨𝒜x, x⟩ ≤ −κ|ℜx|² for the chosen selector (0 if none)
    pub kappa: f64,
    /// λ_min(Herm K₀) for static left damping, controller κ for a controlled end, else 0
    pub kappa_port: f64,
    pub candidates: Vec<SelectorResult>,
    pub notes: Vec<String>,
}

impl DissipationClass {
    pub fn exponential(&self) -> bool {
        self.selector.as_ref().is_some_and(|s| s.family == SelectorFamily::Exponential)
    }
}

fn side_kappa(p: &PortAlgebra, comps: &[usize]) -> f64 {
    if comps.is_empty() {
        return f64::INFINITY;
    }
    let (qb, r) = restricted_rate(p);
    let mut e = linalg::zeros(comps.len(), qb.nrows());
    for (i, &k) in comps.iter().enumerate() {
        e[(i, k)] = re(1.0);
    }
    let eq = linalg::matmul(&e, &qb);
    let c = linalg::herm_part(&linalg::matmul(&linalg::adjoint(&eq), &eq));
    max_kappa(&r, &c, None)
}

/// Which selector the end conditions certify, with the best κ.
/// Ports that fail their checks disqualify every selector.
pub fn classify_dissipation(model: &ChainModel, verdicts: &PortVerdicts) -> DissipationClass {
    let algebras = ports::chain_ports(model);
    let left = &algebras[0];
    let right = algebras.last().unwrap();
    let mut notes = vec![];

    let kappa_port = match &model.left_end.condition {
        EndCondition::Damped(k0) => linalg::herm_eigenvalues(k0)[0].max(0.0),
        EndCondition::Controlled(c) => check_controller(c).kappa,
        _ => 0.0,
    };
    if let EndCondition::Conservative(Closure::ShearHinge) = model.right_end.condition {
        notes.push("shear_hinge: rotation and shear force vanish at the right end (zeta = 1)".into());
    }

    let candidates: Vec<SelectorResult> = all_selectors()
        .into_iter()
        .map(|s| {
            let lc: Vec<usize> = s.components.iter().filter(|t| t.position().0).map(|t| t.position().1).collect();
            let rc: Vec<usize> = s.components.iter().filter(|t| !t.position().0).map(|t| t.position().1).collect();
            let kl = side_kappa(left, &lc);
            let kr = side_kappa(right, &rc);
            let k = kl.min(kr);
            SelectorResult { selector: s, kappa_left: kl, kappa_right: kr, kappa: k, certified: k > 0.0 && k.is_finite() }
        })
        .collect();

    if !verdicts.all_ok() {
        notes.push("a port check failed; no selector is certified".into());
        return DissipationClass { selector: None, kappa: 0.0, kappa_port, candidates, notes };
    }
    let pick = |fam: SelectorFamily| {
        candidates
            .iter()
            .filter(|c| c.certified && c.selector.family == fam)
            .fold(None::<&SelectorResult>, |best, c| match best {
                Some(b) if b.kappa >= c.kappa => Some(b),
                _ => Some(c),
            })
    };
    let best = pick(SelectorFamily::Exponential).or_else(|| pick(SelectorFamily::Asymptotic));
    match best {
        Some(b) => DissipationClass { selector: Some(b.selector.clone()), kappa: b.kappa, kappa_port, candidates, notes },
        None => DissipationClass { selector: None, kappa: 0.0, kappa_port, candidates, notes },
    }
}

/// Convenience: `c64` unit vector helper for tests and witnesses.
pub fn unit(v: &[c64]) -> Vec<c64> {
    let n = linalg::norm2(v);
    v.iter().map(|z| z / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real_rows;
    use crate::model::{build_chain, ChainSpecDocument};

    #[test]
    fn identity_w_passes_with_zero_margin() {
        let i = linalg::identity(4);
        let wb = linalg::from_fn(2, 4, |r, c| i[(r, c)]);
        let wc = linalg::from_fn(2, 4, |r, c| i[(r + 2, c)]);
        let v = check_boundary_matrices(&wb, &wc).unwrap();
        assert!(v.pass);
        assert!(v.margin.abs() < 1e-15);
    }

    #[test]
    fn scaled_w_fails_with_margin_minus_one() {
        let wb = from_real_rows(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
        let wc = from_real_rows(&[&[0.0, 0.0, 2.0, 0.0], &[0.0, 0.0, 0.0, 2.0]]);
        let v = check_boundary_matrices(&wb, &wc).unwrap();
        assert!(!v.pass);
        assert!((v.margin + 1.0).abs() < 1e-12);
        let w = v.witness.unwrap();
        assert!((w.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_w_is_a_permutation() {
        let wb = from_real_rows(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        let wc = from_real_rows(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
        let v = check_boundary_matrices(&wb, &wc).unwrap();
        assert!(v.pass && v.margin.abs() < 1e-14);
    }

    #[test]
    fn singular_w_rejected() {
        let wb = from_real_rows(&[&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]]);
        let wc = from_real_rows(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
        assert_eq!(check_boundary_matrices(&wb, &wc).unwrap_err(), PassivityError::SingularBoundaryMatrix);
    }

    #[test]
    fn static_feedback_kappa() {
        let c = ControllerSpec::static_gain(from_real_rows(&[&[2.0, 0.0], &[0.0, 0.0]]));
        let v = check_controller(&c);
        assert!(v.passive && v.internally_stable && v.kernel_inclusion);
        assert!((v.kappa - 0.5).abs() < 1e-8);
        assert!((v.kappa_feedthrough - 0.5).abs() < 1e-8);
    }

    #[test]
    fn scalar_controller_kappa() {
        let c = ControllerSpec::new(
            from_real_rows(&[&[-1.0]]),
            from_real_rows(&[&[1.0, 0.0]]),
            from_real_rows(&[&[1.0], &[0.0]]),
            from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
        )
        .unwrap();
        let v = check_controller(&c);
        assert!(v.passive && v.kernel_inclusion && v.internally_stable);
        // min over (x, u) of (|x|² + |u|²)/|x + u|² = 1/2
        assert!((v.kappa - 0.5).abs() < 1e-8, "{}", v.kappa);
        // −|x|² − |u|² + κ|u|² ≤ 0 iff κ ≤ 1
        assert!((v.kappa_feedthrough - 1.0).abs() < 1e-8);
        assert_eq!(v.spectral_abscissa_ac, Some(-1.0));
    }

    #[test]
    fn kernel_inclusion_violated() {
        let c = ControllerSpec::new(
            from_real_rows(&[&[-1.0]]),
            from_real_rows(&[&[1.0, 0.0]]),
            from_real_rows(&[&[1.0], &[0.0]]),
            linalg::zeros(2, 2),
        )
        .unwrap();
        assert!(!check_controller(&c).kernel_inclusion);
    }

    #[test]
    fn kappa_is_maximal() {
        let c = ControllerSpec::static_gain(from_real_rows(&[&[3.0, 1.0], &[-1.0, 0.5]]));
        let v = check_controller(&c);
        let q = controller_form(&c);
        let dd = linalg::matmul(&linalg::adjoint(&c.d), &c.d);
        assert!(nsd(&linalg::add(&q, &linalg::scale(&dd, v.kappa))));
        assert!(!nsd(&linalg::add(&q, &linalg::scale(&dd, v.kappa + 2.0 * TOL_BISECT * v.kappa.max(1.0)))));
    }

    fn chain(left: &str, right: &str) -> ChainModel {
        let json = format!(
            r#"{{"segments":[{{"length":1,"rho":[1,1],"ei":[1,1]}}],"left_end":{left},"right_end":{right}}}"#
        );
        let doc: ChainSpecDocument = serde_json::from_str(&json).unwrap();
        build_chain(&doc).unwrap()
    }

    #[test]
    fn classify_pd_damping_pinned() {
        let m = chain(r#"{"K0":[[2,0.5],[-0.5,1]]}"#, r#"{"closure":"pinned"}"#);
        let d = classify_dissipation(&m, &check_ports(&m));
        assert_eq!(d.selector.as_ref().unwrap().family, SelectorFamily::Exponential);
        assert!(d.kappa > 0.0);
        assert!((d.kappa_port - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_identity_damping_pinned() {
        let m = chain(r#"{"K0":[[1,0],[0,1]]}"#, r#"{"closure":"pinned"}"#);
        let d = classify_dissipation(&m, &check_ports(&m));
        assert!(d.exponential());
        // rate −|v|² − |v'|² against |v|² + |m|² + |v'|² with m = v'
        assert!((d.kappa - 0.5).abs() < 1e-8, "{}", d.kappa);
        assert!((d.kappa_port - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_diag_damping_clamped() {
        let k = 2.0;
        let m = chain(&format!(r#"{{"K0":[[{k},0],[0,0]]}}"#), r#"{"closure":"clamped"}"#);
        let d = classify_dissipation(&m, &check_ports(&m));
        assert!(d.exponential());
        assert!((d.kappa - k / (1.0 + k * k)).abs() < 1e-8, "{}", d.kappa);
        let a3 = d.candidates.iter().find(|c| c.selector.id == "A3").unwrap();
        assert!(a3.certified);
    }

    #[test]
    fn classify_no_damping() {
        let m = chain(r#"{"K0":[[0,0],[0,0]]}"#, r#"{"closure":"pinned"}"#);
        let d = classify_dissipation(&m, &check_ports(&m));
        assert!(d.selector.is_none());
        assert_eq!(d.kappa, 0.0);
    }
}
