//! Chain description: segments with sampled coefficient profiles, junctions,
//! end conditions and controllers, plus the normalized (unit-interval) view.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMat};
use faer::c64;

// ---------------------------------------------------------------------------
// document (wire format)

/// A scalar entry of a matrix in a document: either `1.5` or `[re, im]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn to_c64(self) -> c64 {
        match self {
            Scalar::Real(x) => c64::new(x, 0.0),
            Scalar::Complex([a, b]) => c64::new(a, b),
        }
    }
}

pub type MatrixDoc = Vec<Vec<Scalar>>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentDoc {
    pub length: f64,
    pub rho: Vec<f64>,
    pub ei: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ControllerDoc {
    #[serde(rename = "A_c", default, skip_serializing_if = "Option::is_none")]
    pub a_c: Option<MatrixDoc>,
    #[serde(rename = "B_c", default, skip_serializing_if = "Option::is_none")]
    pub b_c: Option<MatrixDoc>,
    #[serde(rename = "C_c", default, skip_serializing_if = "Option::is_none")]
    pub c_c: Option<MatrixDoc>,
    #[serde(rename = "D_c", default, skip_serializing_if = "Option::is_none")]
    pub d_c: Option<MatrixDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JunctionDoc {
    pub kind: i64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerDoc>,
}

/// Exactly one of `closure`, `K0`, `controller`, or the pair `W_B`/`W_C` (with optional `K`).
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct EndDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<String>,
    #[serde(rename = "K0", default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerDoc>,
    #[serde(rename = "W_B", default, skip_serializing_if = "Option::is_none")]
    pub w_b: Option<MatrixDoc>,
    #[serde(rename = "W_C", default, skip_serializing_if = "Option::is_none")]
    pub w_c: Option<MatrixDoc>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<MatrixDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChainSpecDocument {
    pub segments: Vec<SegmentDoc>,
    #[serde(default)]
    pub junctions: Vec<JunctionDoc>,
    pub left_end: EndDoc,
    pub right_end: EndDoc,
}

// ---------------------------------------------------------------------------
// validated model

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("segment {segment}: {profile} sample {index} = {value} is not strictly positive")]
    NonPositiveCoefficient { segment: usize, profile: &'static str, index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{side} end: stacked boundary matrix [W_B; W_C] is singular (sigma_min/sigma_max = {ratio:e})")]
    SingularBoundaryMatrix { side: Side, ratio: f64 },
    #[error("segment {segment}: length {length} is not positive")]
    ZeroLengthSegment { segment: usize, length: f64 },
    /// Enumeration or structural problems that are not dimensional (bad junction kind,
    /// unknown closure name, conflicting end forms, non-finite numbers).
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Conservative end closures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// deflection and bending moment vanish
    Pinned,
    /// bending moment and shear force vanish
    Free,
    /// rotation and shear force vanish
    ShearHinge,
    /// deflection and rotation vanish
    Clamped,
}

impl Closure {
    pub fn parse(s: &str) -> Option<Closure> {
        match s {
            "pinned" => Some(Closure::Pinned),
            "free" => Some(Closure::Free),
            "shear_hinge" => Some(Closure::ShearHinge),
            "clamped" => Some(Closure::Clamped),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Closure::Pinned => "pinned",
            Closure::Free => "free",
            Closure::ShearHinge => "shear_hinge",
            Closure::Clamped => "clamped",
        }
    }

    pub const ALL: [Closure; 4] = [Closure::Pinned, Closure::Free, Closure::ShearHinge, Closure::Clamped];
}

/// Piecewise-linear profile through equispaced samples on [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientProfile {
    samples: Vec<f64>,
}

impl CoefficientProfile {
    /// Unchecked constructor; `build_chain` is the validating path.
    pub fn new(samples: Vec<f64>) -> Self {
        assert!(samples.len() >= 2, "profile needs at least two samples");
        CoefficientProfile { samples }
    }

    pub fn constant(v: f64) -> Self {
        CoefficientProfile { samples: vec![v, v] }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn eval(&self, zeta: f64) -> f64 {
        let n = self.samples.len() - 1;
        let z = zeta.clamp(0.0, 1.0) * n as f64;
        let k = (z.floor() as usize).min(n - 1);
        let t = z - k as f64;
        if t == 0.0 {
            return self.samples[k];
        }
        if t == 1.0 {
            return self.samples[k + 1];
        }
        self.samples[k] * (1.0 - t) + self.samples[k + 1] * t
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lipschitz constant with respect to ζ ∈ [0, 1].
    pub fn lipschitz_unit(&self) -> f64 {
        let n = (self.samples.len() - 1) as f64;
        self.samples.windows(2).map(|w| (w[1] - w[0]).abs() * n).fold(0.0, f64::max)
    }

    pub fn first(&self) -> f64 {
        self.samples[0]
    }

    pub fn last(&self) -> f64 {
        *self.samples.last().unwrap()
    }

    pub fn scaled(&self, c: f64) -> Self {
        CoefficientProfile { samples: self.samples.iter().map(|x| x * c).collect() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamSegment {
    pub length: f64,
    pub rho: CoefficientProfile,
    pub ei: CoefficientProfile,
}

/// Linear controller ẋ_c = A x_c + B u, y = C x_c + D u with u, y ∈ 𝕂².
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerSpec {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
}

impl ControllerSpec {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn static_gain(d: CMat) -> Self {
        ControllerSpec { a: linalg::zeros(0, 0), b: linalg::zeros(0, 2), c: linalg::zeros(2, 0), d }
    }

    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self, ModelError> {
        let n = a.nrows();
        let ok = a.ncols() == n
            && b.nrows() == n
            && b.ncols() == 2
            && c.nrows() == 2
            && c.ncols() == n
            && d.nrows() == 2
            && d.ncols() == 2;
        if !ok {
            return Err(ModelError::DimensionMismatch(format!(
                "controller blocks A {}x{}, B {}x{}, C {}x{}, D {}x{} (expected n x n, n x 2, 2 x n, 2 x 2)",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(ControllerSpec { a, b, c, d })
    }

    pub fn is_real(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d].iter().all(|m| linalg::is_real_mat(m))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coupling {
    /// b + K c = 0
    Static(CMat),
    /// b = −(C x_c + D c), ẋ_c = A x_c + B c
    Dynamic(ControllerSpec),
}

/// Which trace pair is continuous across the junction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JunctionKind(u8);

impl JunctionKind {
    pub fn new(k: u8) -> Option<Self> {
        (1..=4).contains(&k).then_some(JunctionKind(k))
    }
    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JunctionSpec {
    pub kind: JunctionKind,
    pub coupling: Coupling,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EndCondition {
    Conservative(Closure),
    /// static damping: (shear, moment) = K₀ (velocity, angular velocity) up to side orientation
    Damped(CMat),
    Controlled(ControllerSpec),
    /// b = W_B w, c = W_C w on the oriented end-trace vector w, closed by b + K c = 0.
    Explicit { w_b: CMat, w_c: CMat, k: CMat },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EndConditionSpec {
    pub side: Side,
    pub condition: EndCondition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainModel {
    pub segments: Vec<BeamSegment>,
    pub junctions: Vec<JunctionSpec>,
    pub left_end: EndConditionSpec,
    pub right_end: EndConditionSpec,
}

impl ChainModel {
    pub fn m(&self) -> usize {
        self.segments.len()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Left endpoints l^{j−1} of every segment.
    pub fn offsets(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let o = acc;
                acc += s.length;
                o
            })
            .collect()
    }

    /// Segment index and local ζ of a physical abscissa (segment ends belong to the left segment).
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let offs = self.offsets();
        for (j, seg) in self.segments.iter().enumerate() {
            if s <= offs[j] + seg.length || j + 1 == self.segments.len() {
                return (j, ((s - offs[j]) / seg.length).clamp(0.0, 1.0));
            }
        }
        unreachable!()
    }

    pub fn rho_at(&self, s: f64) -> f64 {
        let (j, z) = self.locate(s);
        self.segments[j].rho.eval(z)
    }

    pub fn ei_at(&self, s: f64) -> f64 {
        let (j, z) = self.locate(s);
        self.segments[j].ei.eval(z)
    }

    pub fn is_real(&self) -> bool {
        let coupling_real = |c: &Coupling| match c {
            Coupling::Static(k) => linalg::is_real_mat(k),
            Coupling::Dynamic(ctl) => ctl.is_real(),
        };
        let end_real = |e: &EndConditionSpec| match &e.condition {
            EndCondition::Conservative(_) => true,
            EndCondition::Damped(k) => linalg::is_real_mat(k),
            EndCondition::Controlled(c) => c.is_real(),
            EndCondition::Explicit { w_b, w_c, k } => {
                linalg::is_real_mat(w_b) && linalg::is_real_mat(w_c) && linalg::is_real_mat(k)
            }
        };
        self.junctions.iter().all(|j| coupling_real(&j.coupling)) && end_real(&self.left_end) && end_real(&self.right_end)
    }

    /// Same chain with every ρ divided by c and every EI multiplied by c
    /// (both entries of the Hamiltonian density scaled by c).
    pub fn with_density_scaled(&self, c: f64) -> ChainModel {
        let mut out = self.clone();
        for s in &mut out.segments {
            s.rho = s.rho.scaled(1.0 / c);
            s.ei = s.ei.scaled(c);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// build_chain

fn matrix(doc: &MatrixDoc, rows: Option<usize>, cols: Option<usize>, field: &str) -> Result<CMat, ModelError> {
    let r = doc.len();
    let c = doc.first().map(|row| row.len()).unwrap_or(0);
    if doc.iter().any(|row| row.len() != c) {
        return Err(ModelError::DimensionMismatch(format!("{field}: ragged rows")));
    }
    if rows.is_some_and(|e| e != r) || cols.is_some_and(|e| e != c && r > 0) {
        return Err(ModelError::DimensionMismatch(format!(
            "{field}: got {r}x{c}, expected {}x{}",
            rows.map_or("n".into(), |v| v.to_string()),
            cols.map_or("n".into(), |v| v.to_string())
        )));
    }
    for row in doc {
        for e in row {
            let z = e.to_c64();
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(ModelError::InvalidField { field: field.into(), reason: "non-finite entry".into() });
            }
        }
    }
    Ok(linalg::from_fn(r, c, |i, j| doc[i][j].to_c64()))
}

fn controller(doc: &ControllerDoc, field: &str) -> Result<ControllerSpec, ModelError> {
    let a = match &doc.a_c {
        Some(a) if !a.is_empty() => matrix(a, None, None, &format!("{field}.A_c"))?,
        _ => linalg::zeros(0, 0),
    };
    let n = a.nrows();
    if a.ncols() != n {
        return Err(ModelError::DimensionMismatch(format!("{field}.A_c must be square, got {}x{}", n, a.ncols())));
    }
    let b = match &doc.b_c {
        Some(b) if !b.is_empty() => matrix(b, Some(n), Some(2), &format!("{field}.B_c"))?,
        Some(_) | None if n == 0 => linalg::zeros(0, 2),
        _ => return Err(ModelError::DimensionMismatch(format!("{field}.B_c missing for n = {n}"))),
    };
    let c = match &doc.c_c {
        Some(c) if !c.is_empty() && c.iter().any(|row| !row.is_empty()) => {
            matrix(c, Some(2), Some(n), &format!("{field}.C_c"))?
        }
        Some(_) | None if n == 0 => linalg::zeros(2, 0),
        _ => return Err(ModelError::DimensionMismatch(format!("{field}.C_c missing for n = {n}"))),
    };
    let d = match &doc.d_c {
        Some(d) => matrix(d, Some(2), Some(2), &format!("{field}.D_c"))?,
        None => linalg::zeros(2, 2),
    };
    ControllerSpec::new(a, b, c, d)
}

fn profile(samples: &[f64], segment: usize, name: &'static str) -> Result<CoefficientProfile, ModelError> {
    if samples.len() < 2 {
        return Err(ModelError::InvalidField {
            field: format!("segments[{segment}].{name}"),
            reason: format!("need at least 2 samples, got {}", samples.len()),
        });
    }
    for (i, &v) in samples.iter().enumerate() {
        if !v.is_finite() {
            return Err(ModelError::InvalidField {
                field: format!("segments[{segment}].{name}"),
                reason: format!("sample {i} is not finite"),
            });
        }
        if v <= 0.0 {
            return Err(ModelError::NonPositiveCoefficient { segment, profile: name, index: i, value: v });
        }
    }
    Ok(CoefficientProfile::new(samples.to_vec()))
}

fn end_condition(doc: &EndDoc, side: Side) -> Result<EndConditionSpec, ModelError> {
    let field = format!("{side}_end");
    let forms = [doc.closure.is_some(), doc.k0.is_some(), doc.controller.is_some(), doc.w_b.is_some() || doc.w_c.is_some()];
    let count = forms.iter().filter(|&&f| f).count();
    if count != 1 {
        return Err(ModelError::InvalidField {
            field,
            reason: "exactly one of `closure`, `K0`, `controller`, or `W_B`+`W_C` is required".into(),
        });
    }
    if doc.k.is_some() && !forms[3] {
        return Err(ModelError::InvalidField { field, reason: "`K` is only allowed together with `W_B`/`W_C`".into() });
    }
    let condition = if let Some(name) = &doc.closure {
        let c = Closure::parse(name).ok_or_else(|| ModelError::InvalidField {
            field: format!("{field}.closure"),
            reason: format!("unknown closure `{name}` (expected pinned, free, shear_hinge, clamped)"),
        })?;
        EndCondition::Conservative(c)
    } else if let Some(k0) = &doc.k0 {
        EndCondition::Damped(matrix(k0, Some(2), Some(2), &format!("{field}.K0"))?)
    } else if let Some(c) = &doc.controller {
        EndCondition::Controlled(controller(c, &format!("{field}.controller"))?)
    } else {
        let (Some(wb), Some(wc)) = (&doc.w_b, &doc.w_c) else {
            return Err(ModelError::InvalidField { field, reason: "`W_B` and `W_C` must be given together".into() });
        };
        let w_b = matrix(wb, Some(2), Some(4), &format!("{field}.W_B"))?;
        let w_c = matrix(wc, Some(2), Some(4), &format!("{field}.W_C"))?;
        let k = match &doc.k {
            Some(k) => matrix(k, Some(2), Some(2), &format!("{field}.K"))?,
            None => linalg::zeros(2, 2),
        };
        let s = linalg::singular_values(&linalg::vstack(&[&w_b, &w_c]));
        let ratio = if s[0] == 0.0 { 0.0 } else { s[3] / s[0] };
        if ratio <= 1e-12 {
            return Err(ModelError::SingularBoundaryMatrix { side, ratio });
        }
        EndCondition::Explicit { w_b, w_c, k }
    };
    Ok(EndConditionSpec { side, condition })
}

/// Validate a document into a [`ChainModel`]. Structural checks only: dissipativity
/// of gains and controllers is a hypothesis reported by the passivity checks.
pub fn build_chain(doc: &ChainSpecDocument) -> Result<ChainModel, ModelError> {
    if doc.segments.is_empty() {
        return Err(ModelError::DimensionMismatch("at least one segment is required".into()));
    }
    let mut segments = Vec::with_capacity(doc.segments.len());
    for (j, s) in doc.segments.iter().enumerate() {
        if s.length.is_nan() || s.length.is_infinite() {
            return Err(ModelError::InvalidField { field: format!("segments[{j}].length"), reason: "not finite".into() });
        }
        if s.length <= 0.0 {
            return Err(ModelError::ZeroLengthSegment { segment: j, length: s.length });
        }
        segments.push(BeamSegment { length: s.length, rho: profile(&s.rho, j, "rho")?, ei: profile(&s.ei, j, "ei")? });
    }
    if doc.junctions.len() + 1 != segments.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} segments need {} junctions, got {}",
            segments.len(),
            segments.len() - 1,
            doc.junctions.len()
        )));
    }
    let mut junctions = Vec::with_capacity(doc.junctions.len());
    for (j, jd) in doc.junctions.iter().enumerate() {
        let field = format!("junctions[{j}]");
        let kind = u8::try_from(jd.kind).ok().and_then(JunctionKind::new).ok_or_else(|| ModelError::InvalidField {
            field: format!("{field}.kind"),
            reason: format!("{} is not in 1..=4", jd.kind),
        })?;
        let coupling = match (&jd.k, &jd.controller) {
            (Some(_), Some(_)) => {
                return Err(ModelError::InvalidField { field, reason: "`K` and `controller` are mutually exclusive".into() })
            }
            (Some(k), None) => Coupling::Static(matrix(k, Some(2), Some(2), &format!("{field}.K"))?),
            (None, Some(c)) => Coupling::Dynamic(controller(c, &format!("{field}.controller"))?),
            (None, None) => Coupling::Static(linalg::zeros(2, 2)),
        };
        junctions.push(JunctionSpec { kind, coupling });
    }
    Ok(ChainModel {
        segments,
        junctions,
        left_end: end_condition(&doc.left_end, Side::Left)?,
        right_end: end_condition(&doc.right_end, Side::Right)?,
    })
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, Serialize)]
pub struct SegmentRegularity {
    pub segment: usize,
    pub rho_min: f64,
    pub ei_min: f64,
    /// Lipschitz constants in ζ ∈ [0, 1]
    pub rho_lipschitz: f64,
    pub ei_lipschitz: f64,
    /// the same in physical arc length (divided by the segment length)
    pub rho_lipschitz_physical: f64,
    pub ei_lipschitz_physical: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub pass: bool,
    pub segments: Vec<SegmentRegularity>,
}

pub fn validate_regularity(model: &ChainModel) -> RegularityReport {
    let segments: Vec<SegmentRegularity> = model
        .segments
        .iter()
        .enumerate()
        .map(|(j, s)| SegmentRegularity {
            segment: j,
            rho_min: s.rho.min(),
            ei_min: s.ei.min(),
            rho_lipschitz: s.rho.lipschitz_unit(),
            ei_lipschitz: s.ei.lipschitz_unit(),
            rho_lipschitz_physical: s.rho.lipschitz_unit() / s.length,
            ei_lipschitz_physical: s.ei.lipschitz_unit() / s.length,
        })
        .collect();
    let pass = segments.iter().all(|s| s.rho_min > 0.0 && s.ei_min > 0.0);
    RegularityReport { pass, segments }
}

const MONO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct JunctionMonotonicity {
    pub junction: usize,
    pub rho_left: f64,
    pub rho_right: f64,
    pub ei_left: f64,
    pub ei_right: f64,
    /// scalar form: ρ does not decrease and EI does not increase across the junction
    pub scalar_pass: bool,
    /// λ_min of H(left side) − H(right side) with H = diag(1/ρ, EI)
    pub matrix_margin: f64,
    pub matrix_pass: bool,
    /// human-readable list of violated inequalities
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub pass: bool,
    pub junctions: Vec<JunctionMonotonicity>,
    pub notes: Vec<String>,
}

pub fn check_jump_monotonicity(model: &ChainModel) -> MonotonicityReport {
    let junctions: Vec<JunctionMonotonicity> = (0..model.junctions.len())
        .map(|j| {
            let (l, r) = (&model.segments[j], &model.segments[j + 1]);
            let (rl, rr, el, er) = (l.rho.last(), r.rho.first(), l.ei.last(), r.ei.first());
            let rho_ok = rl - rr <= MONO_TOL * rl.max(rr);
            let ei_ok = er - el <= MONO_TOL * el.max(er);
            let d_inv_rho = 1.0 / rl - 1.0 / rr;
            let d_ei = el - er;
            let margin = d_inv_rho.min(d_ei);
            let inv_ok = d_inv_rho >= -MONO_TOL * (1.0 / rl).max(1.0 / rr);
            let ei_m_ok = d_ei >= -MONO_TOL * el.max(er);
            let mut violations = vec![];
            if !rho_ok {
                violations.push(format!("junction {j}: rho_left <= rho_right violated ({rl} > {rr})"));
            }
            if !ei_ok {
                violations.push(format!("junction {j}: ei_left >= ei_right violated ({el} < {er})"));
            }
            JunctionMonotonicity {
                junction: j,
                rho_left: rl,
                rho_right: rr,
                ei_left: el,
                ei_right: er,
                scalar_pass: rho_ok && ei_ok,
                matrix_margin: margin,
                matrix_pass: inv_ok && ei_m_ok,
                violations,
            }
        })
        .collect();
    let pass = junctions.iter().all(|j| j.scalar_pass && j.matrix_pass);
    MonotonicityReport {
        pass,
        junctions,
        notes: vec![
            "matrix form tested as H_left(1) - H_right(0) >= 0, the orientation equivalent to the scalar jump inequalities".into(),
        ],
    }
}

// ---------------------------------------------------------------------------
// normalization

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSegment {
    pub length: f64,
    /// 1/ℓ², the block scale of the second-order operator on ζ ∈ [0, 1]
    pub scale: f64,
    pub rho: CoefficientProfile,
    pub ei: CoefficientProfile,
}

impl NormalizedSegment {
    /// H(ζ) = diag(1/ρ, EI)
    pub fn h(&self, zeta: f64) -> [f64; 2] {
        [1.0 / self.rho.eval(zeta), self.ei.eval(zeta)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedModel {
    pub segments: Vec<NormalizedSegment>,
    pub offsets: Vec<f64>,
    pub junctions: Vec<JunctionSpec>,
    pub left_end: EndConditionSpec,
    pub right_end: EndConditionSpec,
}

impl NormalizedModel {
    pub fn m(&self) -> usize {
        self.segments.len()
    }

    pub fn physical_point(&self, j: usize, zeta: f64) -> f64 {
        self.offsets[j] + zeta * self.segments[j].length
    }

    pub fn is_real(&self) -> bool {
        self.to_model().is_real()
    }

    /// Inverse of [`normalize`].
    pub fn to_model(&self) -> ChainModel {
        ChainModel {
            segments: self
                .segments
                .iter()
                .map(|s| BeamSegment { length: s.length, rho: s.rho.clone(), ei: s.ei.clone() })
                .collect(),
            junctions: self.junctions.clone(),
            left_end: self.left_end.clone(),
            right_end: self.right_end.clone(),
        }
    }
}

pub fn normalize(model: &ChainModel) -> NormalizedModel {
    NormalizedModel {
        segments: model
            .segments
            .iter()
            .map(|s| NormalizedSegment {
                length: s.length,
                scale: 1.0 / (s.length * s.length),
                rho: s.rho.clone(),
                ei: s.ei.clone(),
            })
            .collect(),
        offsets: model.offsets(),
        junctions: model.junctions.clone(),
        left_end: model.left_end.clone(),
        right_end: model.right_end.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(length: f64, rho: &[f64], ei: &[f64]) -> SegmentDoc {
        SegmentDoc { length, rho: rho.to_vec(), ei: ei.to_vec() }
    }

    fn closure(name: &str) -> EndDoc {
        EndDoc { closure: Some(name.into()), ..Default::default() }
    }

    fn real(rows: &[&[f64]]) -> MatrixDoc {
        rows.iter().map(|r| r.iter().map(|&x| Scalar::Real(x)).collect()).collect()
    }

    fn two_segment(rho: [f64; 2], ei: [f64; 2]) -> ChainSpecDocument {
        ChainSpecDocument {
            segments: vec![seg(0.5, &[rho[0], rho[0]], &[ei[0], ei[0]]), seg(0.5, &[rho[1], rho[1]], &[ei[1], ei[1]])],
            junctions: vec![JunctionDoc { kind: 1, k: Some(real(&[&[0.0, 0.0], &[0.0, 0.0]])), controller: None }],
            left_end: EndDoc { k0: Some(real(&[&[1.0, 0.0], &[0.0, 1.0]])), ..Default::default() },
            right_end: closure("pinned"),
        }
    }

    #[test]
    fn minimal_chain_builds() {
        let doc = ChainSpecDocument {
            segments: vec![seg(1.0, &[1.0, 1.0], &[1.0, 1.0])],
            junctions: vec![],
            left_end: closure("clamped"),
            right_end: closure("free"),
        };
        let m = build_chain(&doc).unwrap();
        assert_eq!(m.m(), 1);
        assert_eq!(m.left_end.condition, EndCondition::Conservative(Closure::Clamped));
    }

    #[test]
    fn two_segment_chain_builds() {
        let m = build_chain(&two_segment([1.0, 2.0], [2.0, 1.0])).unwrap();
        assert_eq!(m.m(), 2);
        assert!(check_jump_monotonicity(&m).pass);
    }

    #[test]
    fn zero_ei_sample_rejected() {
        let mut doc = two_segment([1.0, 2.0], [2.0, 1.0]);
        doc.segments[1].ei = vec![1.0, 0.0];
        assert!(matches!(
            build_chain(&doc),
            Err(ModelError::NonPositiveCoefficient { segment: 1, profile: "ei", index: 1, .. })
        ));
    }

    #[test]
    fn structural_errors() {
        let mut doc = two_segment([1.0, 1.0], [1.0, 1.0]);
        doc.junctions.clear();
        assert!(matches!(build_chain(&doc), Err(ModelError::DimensionMismatch(_))));

        let mut doc = two_segment([1.0, 1.0], [1.0, 1.0]);
        doc.segments[0].length = 0.0;
        assert!(matches!(build_chain(&doc), Err(ModelError::ZeroLengthSegment { segment: 0, .. })));

        let mut doc = two_segment([1.0, 1.0], [1.0, 1.0]);
        doc.right_end = EndDoc {
            w_b: Some(real(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]])),
            w_c: Some(real(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]])),
            ..Default::default()
        };
        assert!(matches!(build_chain(&doc), Err(ModelError::SingularBoundaryMatrix { side: Side::Right, .. })));

        let mut doc = two_segment([1.0, 1.0], [1.0, 1.0]);
        doc.junctions[0].kind = 5;
        assert!(matches!(build_chain(&doc), Err(ModelError::InvalidField { .. })));
    }

    #[test]
    fn complex_entries_parse() {
        let json = r#"{"segments":[{"length":1,"rho":[1,1],"ei":[1,1]}],
            "left_end":{"K0":[[[1,0.5],0],[0,1]]},"right_end":{"closure":"pinned"}}"#;
        let doc: ChainSpecDocument = serde_json::from_str(json).unwrap();
        let m = build_chain(&doc).unwrap();
        assert!(!m.is_real());
        let EndCondition::Damped(k) = &m.left_end.condition else { panic!() };
        assert_eq!(k[(0, 0)], c64::new(1.0, 0.5));
    }

    #[test]
    fn regularity_examples() {
        let p = CoefficientProfile::new(vec![1.0, 1.0, 1.0]);
        assert_eq!((p.min(), p.lipschitz_unit()), (1.0, 0.0));
        assert_eq!(CoefficientProfile::new(vec![1.0, 2.0]).lipschitz_unit(), 1.0);
        assert_eq!(CoefficientProfile::new(vec![1.0, 3.0, 2.0]).lipschitz_unit(), 4.0);
    }

    #[test]
    fn monotonicity_examples() {
        let pass = check_jump_monotonicity(&build_chain(&two_segment([1.0, 2.0], [2.0, 1.0])).unwrap());
        assert!(pass.pass && pass.junctions[0].matrix_margin > 0.0);

        let fail = check_jump_monotonicity(&build_chain(&two_segment([2.0, 1.0], [1.0, 1.0])).unwrap());
        assert!(!fail.pass);
        assert_eq!(fail.junctions[0].junction, 0);
        assert!(fail.junctions[0].violations[0].contains("rho_left <= rho_right"));

        let flat = check_jump_monotonicity(&build_chain(&two_segment([1.5, 1.5], [3.0, 3.0])).unwrap());
        assert!(flat.pass);
        assert_eq!(flat.junctions[0].matrix_margin, 0.0);
    }

    #[test]
    fn normalize_examples() {
        let doc = ChainSpecDocument {
            segments: vec![seg(2.0, &[1.0, 1.0], &[4.0, 4.0]), seg(1.0, &[1.0, 1.0], &[4.0, 4.0])],
            junctions: vec![JunctionDoc { kind: 1, k: None, controller: None }],
            left_end: closure("clamped"),
            right_end: closure("free"),
        };
        let nm = normalize(&build_chain(&doc).unwrap());
        assert_eq!(nm.segments[0].scale, 0.25);
        assert_eq!(nm.segments[1].scale, 1.0);
        for z in [0.0, 0.3, 1.0] {
            assert_eq!(nm.segments[0].h(z), [1.0, 4.0]);
        }
        assert_eq!(nm.to_model(), build_chain(&doc).unwrap());
    }
}
