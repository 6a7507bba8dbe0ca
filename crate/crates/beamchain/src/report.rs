//! The analysis report, its verdict, and JSON serialization helpers.

use faer::c64;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::model::{MonotonicityReport, RegularityReport};
use crate::passivity::{DissipationClass, PortVerdicts};
use crate::timestep::DecayFit;

/// Finite floats as numbers; ±∞ as the strings "inf"/"-inf"; NaN as null.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_none()
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

/// Complex vectors as arrays of [re, im].
pub fn ser_cvec<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}


/// Threshold separating strictly negative rates from marginal ones.
pub const STRICT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ExpStableCertifiedNumerically,
    AsymptoticOnly,
    RigidMode,
    HypothesesViolated,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::ExpStableCertifiedNumerically => "exp-stable-certified-numerically",
            Verdict::AsymptoticOnly => "asymptotic-only",
            Verdict::RigidMode => "rigid-mode",
            Verdict::HypothesesViolated => "hypotheses-violated",
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, Verdict::ExpStableCertifiedNumerically | Verdict::AsymptoticOnly)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub regularity: RegularityReport,
    pub monotonicity: MonotonicityReport,
    pub ports: PortVerdicts,
    pub ports_ok: bool,
    pub dissipation: DissipationClass,
    pub pass: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub range: [f64; 2],
    pub samples: usize,
    #[serde(serialize_with = "ser_f64")]
    pub sup_estimate: f64,
    pub beta_star: f64,
    pub has_sentinel: bool,
    pub finite: bool,
    pub deflated: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSection {
    pub cells_per_segment: usize,
    pub dim: usize,
    pub conservative: bool,
    #[serde(serialize_with = "ser_f64")]
    pub abscissa: f64,
    /// abscissa with the numerical kernel removed
    #[serde(serialize_with = "ser_f64")]
    pub abscissa_off_kernel: f64,
    /// abscissa over the mesh-resolved part of the spectrum (|λ| ≤ 0.1 max|λ|)
    #[serde(serialize_with = "ser_f64")]
    pub resolved_abscissa: f64,
    pub kernel_dim: usize,
    pub kernel_relative_singular_values: Vec<f64>,
    pub max_eigen_residual: f64,
    pub norm_estimate: f64,
    pub consistency_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub kernel_projected: bool,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_relative_increase: f64,
    pub fit: DecayFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisSettings {
    pub cells_per_segment: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub sweep_samples: usize,
    #[serde(rename = "T", serialize_with = "ser_opt_f64")]
    pub t_end: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub dt: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub subcommand: String,
    pub settings: AnalysisSettings,
    pub hypotheses: HypothesisReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamic: Option<DynamicSection>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Verdict re-derived from the serialized sections.
    pub fn derived_verdict(&self) -> Verdict {
        verdict_from_json(&self.to_value())
    }
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) if s == "inf" => Some(f64::INFINITY),
        Value::String(s) if s == "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

/// The verdict as a pure function of a serialized report's sections.
///
/// Order: violated hypotheses win; a nonzero kernel means a rigid mode; an
/// exponential selector plus three agreeing diagnostics (strictly negative
/// abscissa off the kernel, finite resolvent sweep, strictly negative fitted
/// energy rate) certifies exponential stability; anything else is asymptotic only.
pub fn verdict_from_json(r: &Value) -> Verdict {
    let h = &r["hypotheses"];
    let flag = |v: &Value| v.as_bool().unwrap_or(false);
    if !flag(&h["pass"]) || h["dissipation"]["selector"].is_null() {
        return Verdict::HypothesesViolated;
    }
    let sp = &r["spectral"];
    if sp["kernel_dim"].as_u64().unwrap_or(0) >= 1 {
        return Verdict::RigidMode;
    }
    let exponential = h["dissipation"]["selector"]["family"] == "exponential";
    let abscissa_ok = num(&sp["abscissa_off_kernel"]).is_some_and(|a| a < -STRICT_TOL);
    let sweep_ok = flag(&sp["sweep"]["finite"]);
    let eta_ok = num(&r["dynamic"]["fit"]["eta"]).is_some_and(|e| e < -STRICT_TOL);
    if exponential && abscissa_ok && sweep_ok && eta_ok {
        Verdict::ExpStableCertifiedNumerically
    } else {
        Verdict::AsymptoticOnly
    }
}
