#![allow(dead_code)]

use std::path::PathBuf;

use beamchain::c64;
use beamchain::cli::{self, Scenario};
use beamchain::discretize::{assemble, Grid, OperatorBundle};
use beamchain::model::{build_chain, normalize, ChainModel, ChainSpecDocument};
use rand::Rng;

pub const SCENARIOS: &[&str] = &["chen87_m2", "chen87_m2_conservative", "inhomog_m3", "rigid_mode", "monotonicity_violation"];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> Scenario {
    cli::load_config(&scenario_path(name), false).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn doc(json: &str) -> ChainSpecDocument {
    serde_json::from_str(json).unwrap()
}

pub fn model(json: &str) -> ChainModel {
    build_chain(&doc(json)).unwrap()
}

pub fn bundle_of_model(m: &ChainModel, n: usize) -> OperatorBundle {
    assemble(&normalize(m), &Grid::new(n).unwrap()).unwrap()
}

pub fn bundle(json: &str, n: usize) -> OperatorBundle {
    bundle_of_model(&model(json), n)
}

pub fn scenario_bundle(name: &str, n: usize) -> OperatorBundle {
    bundle_of_model(&build_chain(&scenario(name).document).unwrap(), n)
}

/// Random reduced state; real when the bundle is real.
pub fn random_state(b: &OperatorBundle, rng: &mut impl Rng) -> Vec<c64> {
    let real = b.is_real();
    (0..b.dim())
        .map(|_| c64::new(rng.random_range(-1.0..1.0), if real { 0.0 } else { rng.random_range(-1.0..1.0) }))
        .collect()
}

/// A uniform single beam with the given end closures.
pub fn uniform(left: &str, right: &str, length: f64, rho: f64, ei: f64) -> String {
    format!(
        r#"{{"segments":[{{"length":{length},"rho":[{rho},{rho}],"ei":[{ei},{ei}]}}],
            "left_end":{{"closure":"{left}"}},"right_end":{{"closure":"{right}"}}}}"#
    )
}

pub fn two_segment(left: &str, right: &str, kind: u8, k: [f64; 2]) -> String {
    format!(
        r#"{{"segments":[{{"length":0.6,"rho":[1.0,1.3],"ei":[2.0,1.8]}},{{"length":0.4,"rho":[1.4,1.6],"ei":[1.5,1.2]}}],
            "junctions":[{{"kind":{kind},"K":[[{},0],[0,{}]]}}],
            "left_end":{left},"right_end":{right}}}"#,
        k[0], k[1]
    )
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
