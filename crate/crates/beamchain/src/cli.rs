//! Configuration loading, scenario orchestration and artifact emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::discretize::{self, assemble, DiscretizeError, Grid, OperatorBundle};
use crate::model::{self, build_chain, ChainModel, ChainSpecDocument, Closure, EndCondition, ModelError};
use crate::passivity::{check_ports, classify_dissipation};
use crate::report::{
    verdict_from_json, AnalysisSettings, DynamicSection, HypothesisReport, Report, SpectralSection, SweepSummary, Verdict,
};
use crate::spectral::{self, KernelProjection, ResolventContext, ResolventSweep, Spectrum, SpectralError};
use crate::timestep::{self, EnergyTrace, TimestepError};

pub const DEFAULT_BETA_MAX: f64 = 200.0;
pub const DEFAULT_SAMPLES: usize = 256;
pub const DEFAULT_SEED: u64 = 7;
/// fraction of max|λ| regarded as mesh-resolved
pub const RESOLVED_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("schema error in `{field}`: {reason}")]
    SchemaError { field: String, reason: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("discretization error: {0}")]
    Discretize(#[from] DiscretizeError),
    #[error("spectral error: {0}")]
    Spectral(#[from] SpectralError),
    #[error("time-stepping error: {0}")]
    Timestep(#[from] TimestepError),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl RunError {
    /// 1 = model/hypothesis failure, 2 = numerical failure, 3 = I/O, parse or schema.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output { .. } => 3,
            RunError::Model(_) => 1,
            RunError::Discretize(DiscretizeError::UnsupportedClosure(_)) => 1,
            RunError::Discretize(_) | RunError::Spectral(_) | RunError::Timestep(_) => 2,
        }
    }
}

/// Per-scenario analysis defaults; command-line flags override them.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
pub struct AnalysisDefaults {
    pub cells: Option<usize>,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    pub samples: Option<usize>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub document: ChainSpecDocument,
    pub analysis: AnalysisDefaults,
    pub warnings: Vec<String>,
}

const ROOT_KEYS: &[&str] = &["name", "analysis", "segments", "junctions", "left_end", "right_end"];
const ANALYSIS_KEYS: &[&str] = &["cells", "beta_min", "beta_max", "samples", "T", "dt", "seed"];
const SEGMENT_KEYS: &[&str] = &["length", "rho", "ei"];
const JUNCTION_KEYS: &[&str] = &["kind", "K", "controller"];
const END_KEYS: &[&str] = &["closure", "K0", "controller", "W_B", "W_C", "K"];
const CONTROLLER_KEYS: &[&str] = &["A_c", "B_c", "C_c", "D_c"];

fn schema(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::SchemaError { field: field.into(), reason: reason.into() }
}

/// Remove unknown keys, failing (strict) or recording a warning (lenient).
fn prune(obj: &mut Map<String, Value>, known: &[&str], path: &str, lenient: bool, warnings: &mut Vec<String>) -> Result<(), ConfigError> {
    let unknown: Vec<String> = obj.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect();
    for k in unknown {
        let field = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        if !lenient {
            return Err(schema(field, "unknown field"));
        }
        warnings.push(format!("ignoring unknown field `{field}`"));
        obj.remove(&k);
    }
    Ok(())
}

fn object<'a>(v: &'a mut Value, path: &str) -> Result<&'a mut Map<String, Value>, ConfigError> {
    v.as_object_mut().ok_or_else(|| schema(path, "expected an object"))
}

fn walk_controller(v: &mut Value, path: &str, lenient: bool, w: &mut Vec<String>) -> Result<(), ConfigError> {
    prune(object(v, path)?, CONTROLLER_KEYS, path, lenient, w)
}

fn walk_end(v: &mut Value, path: &str, lenient: bool, w: &mut Vec<String>) -> Result<(), ConfigError> {
    let o = object(v, path)?;
    prune(o, END_KEYS, path, lenient, w)?;
    if let Some(c) = o.get("closure") {
        let name = c.as_str().ok_or_else(|| schema(format!("{path}.closure"), "expected a string"))?;
        if Closure::parse(name).is_none() {
            return Err(schema(
                format!("{path}.closure"),
                format!("unknown closure `{name}` (expected pinned, free, shear_hinge or clamped)"),
            ));
        }
    }
    if let Some(c) = o.get_mut("controller") {
        walk_controller(c, &format!("{path}.controller"), lenient, w)?;
    }
    Ok(())
}

/// Structural pass over the raw JSON: unknown fields and enumeration bounds.
fn walk(root: &mut Value, lenient: bool) -> Result<Vec<String>, ConfigError> {
    let mut w = vec![];
    let o = object(root, "")?;
    prune(o, ROOT_KEYS, "", lenient, &mut w)?;
    if let Some(a) = o.get_mut("analysis") {
        prune(object(a, "analysis")?, ANALYSIS_KEYS, "analysis", lenient, &mut w)?;
    }
    if let Some(Value::Array(segs)) = o.get_mut("segments") {
        for (i, s) in segs.iter_mut().enumerate() {
            let p = format!("segments[{i}]");
            prune(object(s, &p)?, SEGMENT_KEYS, &p, lenient, &mut w)?;
        }
    }
    if let Some(Value::Array(js)) = o.get_mut("junctions") {
        for (i, j) in js.iter_mut().enumerate() {
            let p = format!("junctions[{i}]");
            let jo = object(j, &p)?;
            prune(jo, JUNCTION_KEYS, &p, lenient, &mut w)?;
            match jo.get("kind").and_then(Value::as_i64) {
                Some(k) if (1..=4).contains(&k) => {}
                Some(k) => return Err(schema(format!("{p}.kind"), format!("junction kind must be 1, 2, 3 or 4, got {k}"))),
                None => return Err(schema(format!("{p}.kind"), "missing or non-integer junction kind")),
            }
            if let Some(c) = jo.get_mut("controller") {
                walk_controller(c, &format!("{p}.controller"), lenient, &mut w)?;
            }
        }
    }
    for side in ["left_end", "right_end"] {
        if let Some(e) = o.get_mut(side) {
            walk_end(e, side, lenient, &mut w)?;
        }
    }
    Ok(w)
}

/// Parse a scenario/config document from text.
pub fn parse_config(text: &str, lenient: bool) -> Result<Scenario, ConfigError> {
    let mut root: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::ParseError { line: e.line(), column: e.column(), message: e.to_string() })?;
    let warnings = walk(&mut root, lenient)?;
    let o = root.as_object_mut().expect("checked by walk");
    let name = match o.remove("name") {
        None => String::new(),
        Some(Value::String(s)) => s,
        Some(_) => return Err(schema("name", "expected a string")),
    };
    let analysis = match o.remove("analysis") {
        None => AnalysisDefaults::default(),
        Some(a) => serde_json::from_value(a).map_err(|e| schema("analysis", e.to_string()))?,
    };
    let document: ChainSpecDocument = serde_json::from_value(root).map_err(|e| schema("document", e.to_string()))?;
    Ok(Scenario { name, document, analysis, warnings })
}

pub fn load_config(path: &Path, lenient: bool) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
    let mut s = parse_config(&text, lenient)?;
    if s.name.is_empty() {
        s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// command line

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Check,
    Spectrum,
    Sweep,
    Simulate,
    Full,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
            Command::Full => "full",
        }
    }

    fn needs_spectrum(self) -> bool {
        self != Command::Check
    }

    fn needs_sweep(self) -> bool {
        matches!(self, Command::Sweep | Command::Full)
    }

    fn needs_simulation(self) -> bool {
        matches!(self, Command::Simulate | Command::Full)
    }
}

#[derive(Clone, Debug, Default, clap::Args)]
pub struct Flags {
    /// scenario or configuration JSON
    #[arg(long)]
    pub config: PathBuf,
    /// grid cells per segment
    #[arg(long)]
    pub cells: Option<usize>,
    /// simulation horizon (s)
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// time step (s)
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "beta-min")]
    pub beta_min: Option<f64>,
    #[arg(long = "beta-max")]
    pub beta_max: Option<f64>,
    /// number of sweep samples before refinement
    #[arg(long)]
    pub samples: Option<usize>,
    /// seed of the generic initial state
    #[arg(long)]
    pub seed: Option<u64>,
    /// output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// warn about unknown fields instead of rejecting them
    #[arg(long)]
    pub lenient: bool,
    /// also write A_h.mtx and M_h.mtx
    #[arg(long = "dump-matrices")]
    pub dump_matrices: bool,
}

#[derive(Debug, Parser)]
#[command(name = "beamchain", version, about = "Stability analysis of serially connected Euler-Bernoulli beam chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// model and hypothesis checks only
    Check(Flags),
    /// add discretization and the spectrum
    Spectrum(Flags),
    /// add the resolvent sweep along the imaginary axis
    Sweep(Flags),
    /// add time integration and the decay fit
    Simulate(Flags),
    /// everything, with all artifacts
    Full(Flags),
}

impl Sub {
    pub fn split(self) -> (Command, Flags) {
        match self {
            Sub::Check(f) => (Command::Check, f),
            Sub::Spectrum(f) => (Command::Spectrum, f),
            Sub::Sweep(f) => (Command::Sweep, f),
            Sub::Simulate(f) => (Command::Simulate, f),
            Sub::Full(f) => (Command::Full, f),
        }
    }
}

// ---------------------------------------------------------------------------
// pipeline

/// Everything a run produced, including the data behind the CSV artifacts.
pub struct RunOutput {
    pub report: Report,
    pub model: ChainModel,
    pub bundle: Option<OperatorBundle>,
    pub spectrum: Option<Spectrum>,
    pub kernel: Option<KernelProjection>,
    pub sweep: Option<ResolventSweep>,
    pub trace: Option<EnergyTrace>,
}

impl RunOutput {
    /// 0 on success; 1 when hypotheses fail (`check`) or the verdict is not stable (`full`).
    pub fn exit_code(&self, cmd: Command) -> i32 {
        match cmd {
            Command::Check if !self.report.hypotheses.pass => 1,
            Command::Full if !self.report.verdict.is_stable() => 1,
            _ => 0,
        }
    }
}

pub fn check_hypotheses(model: &ChainModel) -> HypothesisReport {
    let regularity = model::validate_regularity(model);
    let monotonicity = model::check_jump_monotonicity(model);
    let ports = check_ports(model);
    let dissipation = classify_dissipation(model, &ports);
    let ports_ok = ports.all_ok();
    let mut notes = vec![];
    let has_controller = matches!(model.left_end.condition, EndCondition::Controlled(_))
        || matches!(model.right_end.condition, EndCondition::Controlled(_))
        || model.junctions.iter().any(|j| matches!(j.coupling, model::Coupling::Dynamic(_)));
    if has_controller {
        notes.push("controller kappa uses the squared output bound -kappa |C_c x + D_c u|^2; kappa_feedthrough reports the |D_c u|^2 reading".into());
    }
    if !monotonicity.pass {
        notes.push("jump monotonicity fails: diagnostics are observational only, no stability or instability claim is made".into());
    }
    HypothesisReport {
        pass: regularity.pass && monotonicity.pass && ports_ok,
        regularity,
        monotonicity,
        ports_ok,
        ports,
        dissipation,
        notes,
    }
}

fn settings(s: &Scenario, f: &Flags) -> AnalysisSettings {
    let a = &s.analysis;
    AnalysisSettings {
        cells_per_segment: f.cells.or(a.cells).unwrap_or(discretize::DEFAULT_CELLS),
        beta_min: f.beta_min.or(a.beta_min).unwrap_or(0.0),
        beta_max: f.beta_max.or(a.beta_max).unwrap_or(DEFAULT_BETA_MAX),
        sweep_samples: f.samples.or(a.samples).unwrap_or(DEFAULT_SAMPLES),
        t_end: f.t_end.or(a.t_end),
        dt: f.dt.or(a.dt),
        seed: f.seed.or(a.seed).unwrap_or(DEFAULT_SEED),
    }
}

fn spectral_section(bundle: &OperatorBundle, spec: &Spectrum, kernel: &KernelProjection) -> SpectralSection {
    SpectralSection {
        cells_per_segment: bundle.grid.cells_per_segment,
        dim: bundle.dim(),
        conservative: bundle.conservative,
        abscissa: spec.abscissa,
        abscissa_off_kernel: spec.abscissa_off_kernel(kernel.dim),
        resolved_abscissa: spec.resolved_abscissa(kernel.dim, RESOLVED_FRACTION),
        kernel_dim: kernel.dim,
        kernel_relative_singular_values: kernel.relative_singular_values.clone(),
        max_eigen_residual: spec.max_residual(),
        norm_estimate: spec.norm_estimate,
        consistency_residual: bundle.consistency_residual,
        sweep: None,
    }
}

/// Run a subcommand on an already loaded scenario (no files are written).
pub fn run(cmd: Command, scenario: &Scenario, flags: &Flags) -> Result<RunOutput, RunError> {
    let model = build_chain(&scenario.document)?;
    let hypotheses = check_hypotheses(&model);
    let mut st = settings(scenario, flags);
    let mut warnings = scenario.warnings.clone();
    let mut out = RunOutput {
        report: Report {
            scenario: scenario.name.clone(),
            subcommand: cmd.name().into(),
            settings: st.clone(),
            hypotheses,
            spectral: None,
            dynamic: None,
            verdict: Verdict::HypothesesViolated,
            warnings: vec![],
        },
        model,
        bundle: None,
        spectrum: None,
        kernel: None,
        sweep: None,
        trace: None,
    };

    if cmd.needs_spectrum() {
        let grid = Grid::new(st.cells_per_segment)?;
        let bundle = assemble(&model::normalize(&out.model), &grid)?;
        let spec = spectral::eigenvalues(&bundle)?;
        let kernel = spectral::kernel_projection(&bundle)?;
        warnings.extend(kernel.warnings.iter().cloned());
        let mut section = spectral_section(&bundle, &spec, &kernel);

        if cmd.needs_sweep() {
            let ctx = ResolventContext::new(&bundle, (kernel.dim > 0).then_some(&kernel));
            let sw = spectral::resolvent_sweep_with(&ctx, st.beta_min, st.beta_max, st.sweep_samples)?;
            section.sweep = Some(SweepSummary {
                range: sw.range,
                samples: sw.betas.len(),
                sup_estimate: sw.sup_estimate,
                beta_star: sw.beta_star,
                has_sentinel: sw.has_sentinel,
                finite: sw.finite(),
                deflated: sw.deflated,
                note: "sampled supremum over the stated range with local refinement; a lower bound of the true supremum".into(),
            });
            out.sweep = Some(sw);
        }

        if cmd.needs_simulation() {
            let projector = (kernel.dim > 0).then_some(&kernel);
            let x0 = timestep::generic_initial_state(&bundle, st.seed, projector)?;
            let t_end = st.t_end.unwrap_or_else(|| timestep::default_horizon(section.resolved_abscissa));
            let dt = st.dt.unwrap_or_else(|| timestep::default_dt(&bundle, &x0));
            let (trace, _) = timestep::simulate(&bundle, &x0, t_end, dt)?;
            let fit = timestep::fit_decay(&trace)?;
            st.t_end = Some(t_end);
            st.dt = Some(trace.dt);
            out.report.dynamic = Some(DynamicSection {
                t_end,
                dt: trace.dt,
                steps: trace.steps,
                seed: st.seed,
                kernel_projected: projector.is_some(),
                initial_energy: trace.energies[0],
                final_energy: *trace.energies.last().unwrap(),
                max_relative_increase: trace.max_relative_increase,
                fit,
            });
            out.trace = Some(trace);
        }
        out.report.spectral = Some(section);
        out.spectrum = Some(spec);
        out.kernel = Some(kernel);
        out.bundle = Some(bundle);
    }
    out.report.settings = st;
    out.report.warnings = warnings;
    out.report.verdict = verdict_from_json(&out.report.to_value());
    Ok(out)
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), RunError> {
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| RunError::Output { path: p.display().to_string(), source: e })
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else if x > 0.0 {
        "inf".into()
    } else if x < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

/// Write report.json and whichever CSV artifacts the run produced.
pub fn write_artifacts(out: &RunOutput, dir: &Path, dump_matrices: bool) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::Output { path: dir.display().to_string(), source: e })?;
    let mut written = vec![];
    let json = serde_json::to_string_pretty(&out.report).expect("report serializes");
    write_file(dir, "report.json", &json)?;
    written.push(dir.join("report.json"));
    if let Some(s) = &out.spectrum {
        let mut b = String::from("re,im,residual\n");
        for (z, r) in s.eigenvalues.iter().zip(&s.method_residuals) {
            let _ = writeln!(b, "{},{},{}", fmt_f64(z.re), fmt_f64(z.im), fmt_f64(*r));
        }
        write_file(dir, "spectrum.csv", &b)?;
        written.push(dir.join("spectrum.csv"));
    }
    if let Some(s) = &out.sweep {
        let mut b = String::from("beta,norm\n");
        for (x, n) in s.betas.iter().zip(&s.norms) {
            let _ = writeln!(b, "{},{}", fmt_f64(*x), fmt_f64(*n));
        }
        write_file(dir, "sweep.csv", &b)?;
        written.push(dir.join("sweep.csv"));
    }
    if let Some(t) = &out.trace {
        let mut b = String::from("t,energy\n");
        for (x, e) in t.times.iter().zip(&t.energies) {
            let _ = writeln!(b, "{},{}", fmt_f64(*x), fmt_f64(*e));
        }
        write_file(dir, "energy.csv", &b)?;
        written.push(dir.join("energy.csv"));
    }
    if dump_matrices {
        if let Some(bundle) = &out.bundle {
            bundle
                .write_matrix_market(dir)
                .map_err(|e| RunError::Output { path: dir.display().to_string(), source: e })?;
            written.push(dir.join("A_h.mtx"));
            written.push(dir.join("M_h.mtx"));
        }
    }
    Ok(written)
}

fn summary(out: &RunOutput) -> String {
    let r = &out.report;
    let mut s = format!("scenario {}: hypotheses {}", r.scenario, if r.hypotheses.pass { "pass" } else { "FAIL" });
    if let Some(sel) = &r.hypotheses.dissipation.selector {
        let _ = write!(s, " (selector {}, kappa {:.4})", sel.id, r.hypotheses.dissipation.kappa);
    }
    if let Some(sp) = &r.spectral {
        let _ = write!(s, "\n  dim {}, abscissa {:.6}, off-kernel {:.6}, kernel dim {}", sp.dim, sp.abscissa, sp.abscissa_off_kernel, sp.kernel_dim);
        if let Some(sw) = &sp.sweep {
            let _ = write!(s, "\n  resolvent sup {} at beta {:.4}", fmt_f64(sw.sup_estimate), sw.beta_star);
        }
    }
    if let Some(d) = &r.dynamic {
        let _ = write!(s, "\n  T {:.3}, dt {:.3e}, eta {:.6}, M {:.4}", d.t_end, d.dt, d.fit.eta, d.fit.m_const);
    }
    let _ = write!(s, "\n  verdict: {}", r.verdict.name());
    s
}

/// Parse arguments, run the pipeline, write artifacts; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    let (cmd, flags) = cli.command.split();
    let result = load_config(&flags.config, flags.lenient)
        .map_err(RunError::from)
        .and_then(|s| run(cmd, &s, &flags));
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    let dir = flags.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = write_artifacts(&out, &dir, flags.dump_matrices) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    println!("{}", summary(&out));
    out.exit_code(cmd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn junction_kind_out_of_range_is_schema_error() {
        let text = r#"{"segments":[{"length":1,"rho":[1],"ei":[1]},{"length":1,"rho":[1],"ei":[1]}],
            "junctions":[{"kind":5}],"left_end":{"closure":"free"},"right_end":{"closure":"free"}}"#;
        match parse_config(text, false) {
            Err(ConfigError::SchemaError { field, .. }) => assert_eq!(field, "junctions[0].kind"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(parse_config("", false), Err(ConfigError::ParseError { line: 1, .. })));
    }

    #[test]
    fn unknown_fields_strict_and_lenient() {
        let text = r#"{"segments":[{"length":1,"rho":[1],"ei":[1],"color":"red"}],
            "left_end":{"closure":"free"},"right_end":{"closure":"free"}}"#;
        match parse_config(text, false) {
            Err(ConfigError::SchemaError { field, .. }) => assert_eq!(field, "segments[0].color"),
            other => panic!("{other:?}"),
        }
        let s = parse_config(text, true).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.document.segments.len(), 1);
    }

    #[test]
    fn bad_closure_name() {
        let text = r#"{"segments":[{"length":1,"rho":[1],"ei":[1]}],
            "left_end":{"closure":"welded"},"right_end":{"closure":"free"}}"#;
        assert!(matches!(parse_config(text, false), Err(ConfigError::SchemaError { .. })));
    }

    #[test]
    fn parse_error_reports_position() {
        match parse_config("{\n  \"segments\": [,]\n}", false) {
            Err(ConfigError::ParseError { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }
}
