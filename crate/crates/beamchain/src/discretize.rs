//! Structure-preserving finite-difference discretization of the chain.
//!
//! Per segment (physical length ℓ, h = ℓ/N) the nodal unknowns are
//! x₁ = ρ ω_t and x₂ = ω_ss, with efforts v = x₁/ρ and m = EI x₂. With the
//! trapezoidal norm P = h·diag(½, 1, …, 1, ½) and the stiffness matrix
//! K_s = h⁻¹ tridiag(−1, 2, −1) (unit corners), summation by parts gives
//!
//! ```text
//!   P ẋ₁ =  K_s m + e₀ m'(0) − e_N m'(ℓ)
//!   P ẋ₂ = −K_s v − e₀ v'(0) + e_N v'(ℓ)
//! ```
//!
//! so the energy rate is exactly the sum of the segment-end powers. Each port
//! (end or junction) supplies its flux traces (v', m') from its conditions
//! where they determine them; the remaining conditions are constraints on the
//! nodal values (and controller states), eliminated by a port-local basis that
//! is orthonormal in the energy inner product.
//!
//! The reduced generator is stored as S = M_r A_r = K + D with K exactly
//! skew-Hermitian (entry by entry) and D Hermitian negative semidefinite,
//! assembled from the ports' factorized dissipation forms.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use faer::c64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, re, CMat, Csr};
use crate::model::{EndCondition, NormalizedModel, Side};
use crate::passivity;
use crate::ports::{self, PortAlgebra, PortDynamics, DM, DV, M, V};

pub const DEFAULT_CELLS: usize = 200;
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("unsupported closure: {0}")]
    UnsupportedClosure(String),
    #[error("assembly dimension: {0}")]
    AssemblyDimension(String),
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Grid {
    pub cells_per_segment: usize,
}

impl Grid {
    pub fn new(cells_per_segment: usize) -> Result<Grid, DiscretizeError> {
        if cells_per_segment < MIN_CELLS {
            return Err(DiscretizeError::AssemblyDimension(format!(
                "cells_per_segment = {cells_per_segment} < {MIN_CELLS}"
            )));
        }
        Ok(Grid { cells_per_segment })
    }

    pub fn nodes(&self) -> usize {
        self.cells_per_segment + 1
    }
}

/// Per-port discrete data.
#[derive(Clone, Debug)]
pub struct PortData {
    pub algebra: PortAlgebra,
    /// full-state indices: value-trace nodes (x₁, x₂ per side) then controller states
    pub svars: Vec<usize>,
    n_sides: usize,
    /// H at the value-trace nodes, aligned with the node part of `svars`
    hvals: Vec<f64>,
    /// flux traces (v', m' per side) determined from s
    flux_map: CMat,
    /// orthonormal basis of flux directions not fixed by the port conditions
    flux_free: CMat,
    /// port-local basis: s = Z r
    z: CMat,
    /// reduced indices of r
    pub rvars: Vec<usize>,
    /// (t, x_c) = T s
    trace_map: CMat,
}

#[derive(Clone, Debug)]
struct SegmentGrid {
    h: f64,
    h1: Vec<f64>,
    h2: Vec<f64>,
    p: Vec<f64>,
    base: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Owner {
    Interior(usize),
    Port(usize, usize),
}

/// Discretized closed-loop generator with its energy Gram matrix and trace maps.
#[derive(Clone, Debug)]
pub struct OperatorBundle {
    pub grid: Grid,
    /// reduced energy weights (M_h is diagonal)
    pub m_diag: Vec<f64>,
    /// exactly skew-Hermitian part of S = M_h A_h
    pub skew: Csr,
    /// Hermitian negative semidefinite part of S
    pub diss: Csr,
    /// A_h = M_h⁻¹ S
    pub a: Csr,
    /// full nodal state = Z · reduced state
    z: Csr,
    full_weights: Vec<f64>,
    segs: Vec<SegmentGrid>,
    lengths: Vec<f64>,
    pub ports: Vec<PortData>,
    n_full: usize,
    n_ctrl: usize,
    is_real: bool,
    hash: u64,
    /// max over ports of ‖Herm(port block) − factorized dissipation‖ (relative)
    pub consistency_residual: f64,
    pub conservative: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PortPower {
    pub label: String,
    /// Re tᴴ J t with the scheme's traces
    pub power: f64,
    pub controller_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerBalanceBreakdown {
    /// Re(xᴴ M_h A_h x), structured evaluation (skew part cancels pairwise)
    pub lhs: f64,
    /// the same by a plain sparse product, for comparison
    pub lhs_direct: f64,
    /// sum of port powers and controller rates from the discrete traces
    pub rhs: f64,
    pub diff: f64,
    pub ports: Vec<PortPower>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PortTraces {
    pub label: String,
    /// (v, m, v', m') per side
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub t: Vec<c64>,
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub b0: Vec<c64>,
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub b: Vec<c64>,
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub c: Vec<c64>,
    /// residual of the port conditions G t + G_c x_c
    pub condition_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceVector {
    pub ports: Vec<PortTraces>,
    /// v(0), m(0), v'(0), m'(0), v(1), m(1), v'(1), m'(1) of the chain ends
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub selector_components: Vec<c64>,
}

/// One-sided raw traces of a segment: values and second-order one-sided derivatives.
#[derive(Clone, Copy, Debug)]
pub struct SegmentEndTraces {
    /// (v, m, v', m') at ζ = 0
    pub left: [c64; 4],
    /// (v, m, v', m') at ζ = 1
    pub right: [c64; 4],
}

#[derive(Clone, Debug)]
pub struct NodalFields {
    pub zeta: Vec<f64>,
    pub v: Vec<c64>,
    pub m: Vec<c64>,
}

const RANK_TOL: f64 = 1e-12;

fn stencil_k(n: usize, i: usize, k: usize, h: f64) -> f64 {
    if i == k {
        if i == 0 || i == n {
            1.0 / h
        } else {
            2.0 / h
        }
    } else if i.abs_diff(k) == 1 {
        -1.0 / h
    } else {
        0.0
    }
}

pub fn assemble(nm: &NormalizedModel, grid: &Grid) -> Result<OperatorBundle, DiscretizeError> {
    let n = grid.cells_per_segment;
    if n < MIN_CELLS {
        return Err(DiscretizeError::AssemblyDimension(format!("cells_per_segment = {n} < {MIN_CELLS}")));
    }
    let nodes = n + 1;
    let model = nm.to_model();
    let m = nm.m();
    for e in [&nm.left_end, &nm.right_end] {
        if let EndCondition::Explicit { w_b, w_c, .. } = &e.condition {
            match passivity::check_boundary_matrices(w_b, w_c) {
                Ok(v) if v.pass => {}
                Ok(v) => {
                    return Err(DiscretizeError::UnsupportedClosure(format!(
                        "{} end: W_B/W_C not impedance passive (margin {:e})",
                        e.side, v.margin
                    )))
                }
                Err(err) => return Err(DiscretizeError::UnsupportedClosure(format!("{} end: {err}", e.side))),
            }
        }
    }

    // -- grid data
    let mut segs = Vec::with_capacity(m);
    for (j, s) in nm.segments.iter().enumerate() {
        let h = s.length / n as f64;
        let zeta: Vec<f64> = (0..nodes).map(|i| i as f64 / n as f64).collect();
        let hh: Vec<[f64; 2]> = zeta.iter().map(|&z| s.h(z)).collect();
        let p = (0..nodes).map(|i| if i == 0 || i == n { 0.5 * h } else { h }).collect();
        segs.push(SegmentGrid {
            h,
            h1: hh.iter().map(|x| x[0]).collect(),
            h2: hh.iter().map(|x| x[1]).collect(),
            p,
            base: 2 * nodes * j,
        });
    }
    let x1 = |j: usize, i: usize| 2 * nodes * j + 2 * i;
    let x2 = |j: usize, i: usize| 2 * nodes * j + 2 * i + 1;

    let algebras = ports::chain_ports(&model);
    let n_ctrl: usize = algebras.iter().map(|p| p.n_ctrl()).sum();
    let n_seg_vars = 2 * nodes * m;
    let n_full = n_seg_vars + n_ctrl;

    let mut full_weights = vec![1.0; n_full];
    for (j, sg) in segs.iter().enumerate() {
        for i in 0..nodes {
            full_weights[x1(j, i)] = sg.p[i] * sg.h1[i];
            full_weights[x2(j, i)] = sg.p[i] * sg.h2[i];
        }
    }

    // -- ports
    let mut ctrl_off = n_seg_vars;
    let mut port_data: Vec<PortData> = Vec::with_capacity(algebras.len());
    for alg in algebras {
        let t = alg.n_traces();
        let nc = alg.n_ctrl();
        let rows = alg.g.nrows();
        let full_rank = linalg::numerical_rank(&linalg::hstack(&[&alg.g, &alg.g_c]), RANK_TOL);
        if full_rank != t / 2 || rows != t / 2 {
            return Err(DiscretizeError::UnsupportedClosure(format!(
                "{}: port conditions have rank {full_rank}, need {}",
                alg.label,
                t / 2
            )));
        }
        let n_sides = alg.sides.len();
        let mut svars = Vec::with_capacity(2 * n_sides + nc);
        let mut hvals = Vec::with_capacity(2 * n_sides);
        for side in &alg.sides {
            let i = if side.end == Side::Left { 0 } else { n };
            svars.push(x1(side.segment, i));
            svars.push(x2(side.segment, i));
            hvals.push(segs[side.segment].h1[i]);
            hvals.push(segs[side.segment].h2[i]);
        }
        for k in 0..nc {
            svars.push(ctrl_off + k);
        }
        ctrl_off += nc;
        let ns = svars.len();
        let nv = 2 * n_sides;

        let value_cols: Vec<usize> = (0..n_sides).flat_map(|k| [4 * k + V, 4 * k + M]).collect();
        let flux_cols: Vec<usize> = (0..n_sides).flat_map(|k| [4 * k + DV, 4 * k + DM]).collect();
        let gv = linalg::select_cols(&alg.g, &value_cols);
        let gf = linalg::select_cols(&alg.g, &flux_cols);
        // conditions over s
        let mut gs = linalg::zeros(rows, ns);
        for r in 0..rows {
            for k in 0..nv {
                gs[(r, k)] = gv[(r, k)] * hvals[k];
            }
            for k in 0..nc {
                gs[(r, nv + k)] = alg.g_c[(r, k)];
            }
        }
        let (u, sv, vv) = linalg::svd_full(&gf);
        let smax = sv.first().copied().unwrap_or(0.0);
        let rank_f = if smax == 0.0 { 0 } else { sv.iter().filter(|&&x| x > RANK_TOL * smax).count() };
        let uperp = linalg::select_cols(&u, &(rank_f..rows).collect::<Vec<_>>());
        let ess = linalg::matmul(&linalg::adjoint(&uperp), &gs);
        let flux_map = linalg::scale(&linalg::matmul(&linalg::pinv(&gf, RANK_TOL), &gs), -1.0);
        let flux_free = linalg::select_cols(&vv, &(rank_f..flux_cols.len()).collect::<Vec<_>>());

        let w: Vec<f64> = svars.iter().map(|&v| full_weights[v]).collect();
        let z = if ess.nrows() == 0 {
            linalg::identity(ns)
        } else {
            let isw = |k: usize| 1.0 / w[k].sqrt();
            let y = linalg::from_fn(ess.nrows(), ns, |r, k| ess[(r, k)] * isw(k));
            let q = linalg::null_space(&y, RANK_TOL);
            linalg::from_fn(ns, q.ncols(), |k, c| q[(k, c)] * isw(k))
        };

        // (t, x_c) = T s
        let mut trace_map = linalg::zeros(t + nc, ns);
        for k in 0..n_sides {
            trace_map[(4 * k + V, 2 * k)] = re(hvals[2 * k]);
            trace_map[(4 * k + M, 2 * k + 1)] = re(hvals[2 * k + 1]);
            for c in 0..ns {
                trace_map[(4 * k + DV, c)] = flux_map[(2 * k, c)];
                trace_map[(4 * k + DM, c)] = flux_map[(2 * k + 1, c)];
            }
        }
        for k in 0..nc {
            trace_map[(t + k, nv + k)] = re(1.0);
        }
        port_data.push(PortData {
            algebra: alg,
            svars,
            n_sides,
            hvals,
            flux_map,
            flux_free,
            z,
            rvars: vec![],
            trace_map,
        });
    }

    // -- reduced numbering: walk the full state, allocating a port block at its first variable
    let mut owner_full: Vec<Option<(usize, usize)>> = vec![None; n_full];
    for (p, pd) in port_data.iter().enumerate() {
        for (k, &v) in pd.svars.iter().enumerate() {
            if owner_full[v].is_some() {
                return Err(DiscretizeError::AssemblyDimension(format!("node {v} shared by two ports")));
            }
            owner_full[v] = Some((p, k));
        }
    }
    let mut owner = vec![Owner::Interior(0); n_full];
    let mut next = 0usize;
    let mut m_diag: Vec<f64> = vec![];
    for v in 0..n_full {
        match owner_full[v] {
            None => {
                owner[v] = Owner::Interior(next);
                m_diag.push(full_weights[v]);
                next += 1;
            }
            Some((p, k)) => {
                owner[v] = Owner::Port(p, k);
                if port_data[p].rvars.is_empty() {
                    let nr = port_data[p].z.ncols();
                    let raw = port_data[p].z.nrows() == nr;
                    for c in 0..nr {
                        port_data[p].rvars.push(next);
                        m_diag.push(if raw { full_weights[port_data[p].svars[c]] } else { 1.0 });
                        next += 1;
                    }
                }
            }
        }
    }
    let dim = next;
    if dim == 0 {
        return Err(DiscretizeError::AssemblyDimension("empty reduced state".into()));
    }

    // -- interior stencil as full-level skew triplets
    let mut kfull: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * nodes * m);
    for (j, sg) in segs.iter().enumerate() {
        for i in 0..nodes {
            for k in i.saturating_sub(1)..=(i + 1).min(n) {
                let w = sg.h1[i] * stencil_k(n, i, k, sg.h) * sg.h2[k];
                kfull.push((x1(j, i), x2(j, k), w));
                kfull.push((x2(j, k), x1(j, i), -w));
            }
        }
    }

    let mut sk: Vec<(usize, usize, c64)> = Vec::with_capacity(kfull.len() + 64);
    let mut sd: Vec<(usize, usize, c64)> = vec![];
    let mut kpp: Vec<CMat> = port_data.iter().map(|pd| linalg::zeros(pd.svars.len(), pd.svars.len())).collect();
    for &(a, b, w) in &kfull {
        match (owner[a], owner[b]) {
            (Owner::Interior(ra), Owner::Interior(rb)) => sk.push((ra, rb, re(w))),
            (Owner::Port(p, ka), Owner::Interior(rb)) => {
                let pd = &port_data[p];
                for (c, &r) in pd.rvars.iter().enumerate() {
                    let val = pd.z[(ka, c)].conj() * w;
                    if val != re(0.0) {
                        sk.push((r, rb, val));
                        sk.push((rb, r, -val.conj()));
                    }
                }
            }
            (Owner::Interior(_), Owner::Port(_, _)) => {} // mirrored above
            (Owner::Port(p, ka), Owner::Port(q, kb)) => {
                if p != q {
                    return Err(DiscretizeError::AssemblyDimension("stencil couples two ports".into()));
                }
                kpp[p][(ka, kb)] += w;
            }
        }
    }

    // -- port blocks
    let mut consistency: f64 = 0.0;
    for (p, pd) in port_data.iter().enumerate() {
        let ns = pd.svars.len();
        let nv = 2 * pd.n_sides;
        let nc = ns - nv;
        let t = pd.algebra.n_traces();
        let mut bp = kpp[p].clone();
        for (k, side) in pd.algebra.sides.iter().enumerate() {
            let s = if side.end == Side::Right { 1.0 } else { -1.0 };
            for c in 0..ns {
                // x₁ row: ∓ m', x₂ row: ± v' (scaled by H into the energy-weighted equation)
                bp[(2 * k, c)] += pd.flux_map[(2 * k + 1, c)] * (-s * pd.hvals[2 * k]);
                bp[(2 * k + 1, c)] += pd.flux_map[(2 * k, c)] * (s * pd.hvals[2 * k + 1]);
            }
        }
        if let PortDynamics::Controller { a, bt } = &pd.algebra.dynamics {
            let tt = linalg::select_rows_range(&pd.trace_map, 0, t);
            let btt = linalg::matmul(bt, &tt);
            for i in 0..nc {
                for c in 0..ns {
                    bp[(nv + i, c)] += btt[(i, c)];
                }
                for j in 0..nc {
                    bp[(nv + i, nv + j)] += a[(i, j)];
                }
            }
        }
        let zh = linalg::adjoint(&pd.z);
        let x = linalg::matmul(&linalg::matmul(&zh, &bp), &pd.z);
        let skew = linalg::skew_part(&x);
        let lz = linalg::matmul(&linalg::matmul(&pd.algebra.diss_l, &pd.trace_map), &pd.z);
        let dp = linalg::herm_part(&linalg::matmul(&linalg::matmul(&linalg::adjoint(&lz), &pd.algebra.diss_q), &lz));
        let res = linalg::fro_norm(&linalg::sub(&linalg::herm_part(&x), &dp)) / (1.0 + linalg::fro_norm(&x));
        consistency = consistency.max(res);
        let nr = pd.rvars.len();
        for i in 0..nr {
            for j in 0..nr {
                if skew[(i, j)] != re(0.0) {
                    sk.push((pd.rvars[i], pd.rvars[j], skew[(i, j)]));
                }
                if dp[(i, j)] != re(0.0) {
                    sd.push((pd.rvars[i], pd.rvars[j], dp[(i, j)]));
                }
            }
        }
    }
    if consistency > 1e-8 {
        return Err(DiscretizeError::AssemblyDimension(format!(
            "port dissipation does not match the assembled block (relative residual {consistency:e})"
        )));
    }

    let skew = Csr::from_triplets(dim, dim, &sk);
    let diss = Csr::from_triplets(dim, dim, &sd);
    let mut at: Vec<(usize, usize, c64)> = Vec::with_capacity(skew.nnz() + diss.nnz());
    for (i, j, v) in skew.triplets().into_iter().chain(diss.triplets()) {
        at.push((i, j, v / m_diag[i]));
    }
    let a = Csr::from_triplets(dim, dim, &at);

    let mut zt: Vec<(usize, usize, c64)> = vec![];
    for v in 0..n_full {
        match owner[v] {
            Owner::Interior(r) => zt.push((v, r, re(1.0))),
            Owner::Port(p, k) => {
                let pd = &port_data[p];
                for (c, &r) in pd.rvars.iter().enumerate() {
                    if pd.z[(k, c)] != re(0.0) {
                        zt.push((v, r, pd.z[(k, c)]));
                    }
                }
            }
        }
    }
    let z = Csr::from_triplets(n_full, dim, &zt);

    let is_real = nm.is_real() && a.is_real();
    let conservative = diss.nnz() == 0;
    let mut hasher = DefaultHasher::new();
    dim.hash(&mut hasher);
    for w in &m_diag {
        w.to_bits().hash(&mut hasher);
    }
    for (i, j, v) in a.triplets() {
        (i, j, v.re.to_bits(), v.im.to_bits()).hash(&mut hasher);
    }
    Ok(OperatorBundle {
        grid: *grid,
        m_diag,
        skew,
        diss,
        a,
        z,
        full_weights,
        segs,
        lengths: nm.segments.iter().map(|s| s.length).collect(),
        ports: port_data,
        n_full,
        n_ctrl,
        is_real,
        hash: hasher.finish(),
        consistency_residual: consistency,
        conservative,
    })
}

impl OperatorBundle {
    pub fn dim(&self) -> usize {
        self.m_diag.len()
    }

    pub fn segments(&self) -> usize {
        self.segs.len()
    }

    pub fn n_ctrl(&self) -> usize {
        self.n_ctrl
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn config_hash(&self) -> u64 {
        self.hash
    }

    fn check(&self, x: &[c64]) -> Result<(), DiscretizeError> {
        if x.len() != self.dim() {
            return Err(DiscretizeError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// S = K + D = M_h A_h
    pub fn s(&self) -> Csr {
        let mut t = self.skew.triplets();
        t.extend(self.diss.triplets());
        Csr::from_triplets(self.dim(), self.dim(), &t)
    }

    /// ½ xᴴ M_h x (controller states carry unit weight).
    pub fn energy_of(&self, x: &[c64]) -> f64 {
        0.5 * x.iter().zip(&self.m_diag).map(|(z, w)| w * z.norm_sqr()).sum::<f64>()
    }

    pub fn m_norm_sq(&self, x: &[c64]) -> f64 {
        2.0 * self.energy_of(x)
    }

    /// Re(xᴴ M_h A_h x) = Re(xᴴ D x) + Re(xᴴ K x), the skew part summed in
    /// mirrored pairs so that it cancels exactly.
    pub fn rate(&self, x: &[c64]) -> f64 {
        let mut skew_sum = 0.0;
        for i in 0..self.dim() {
            for (j, k) in self.skew.row(i) {
                if j < i {
                    continue;
                }
                let p = x[i].conj() * x[j];
                let t1 = k.re * p.re - k.im * p.im;
                let kj = self.skew.get(j, i);
                let t2 = kj.re * p.re + kj.im * p.im; // Re(K_ji conj(p))
                skew_sum += if i == j { t1 } else { t1 + t2 };
            }
        }
        self.diss.quad_re(x) + skew_sum
    }

    /// Re(xᴴ M_h A_h x) by a plain product.
    pub fn rate_direct(&self, x: &[c64]) -> f64 {
        let ax = self.a.matvec(x);
        x.iter().zip(&ax).zip(&self.m_diag).map(|((xi, ai), w)| w * (xi.conj() * ai).re).sum()
    }

    /// Full nodal state (segment unknowns then controller states).
    pub fn expand(&self, x: &[c64]) -> Vec<c64> {
        self.z.matvec(x)
    }

    /// Energy-orthogonal projection of a full nodal state onto the admissible space.
    pub fn restrict(&self, full: &[c64]) -> Vec<c64> {
        assert_eq!(full.len(), self.n_full);
        let wf: Vec<c64> = full.iter().zip(&self.full_weights).map(|(z, w)| z * *w).collect();
        let y = self.z.adjoint_matvec(&wf);
        y.iter().zip(&self.m_diag).map(|(z, w)| z / *w).collect()
    }

    /// Sample (x₁, x₂) = f(segment, ζ) at the nodes and project onto the admissible space.
    pub fn sample_state(&self, f: impl Fn(usize, f64) -> [c64; 2], ctrl: &[c64]) -> Vec<c64> {
        let nodes = self.grid.nodes();
        let n = self.grid.cells_per_segment;
        let mut full = vec![re(0.0); self.n_full];
        for j in 0..self.segs.len() {
            for i in 0..nodes {
                let v = f(j, i as f64 / n as f64);
                full[self.segs[j].base + 2 * i] = v[0];
                full[self.segs[j].base + 2 * i + 1] = v[1];
            }
        }
        let off = 2 * nodes * self.segs.len();
        for (k, c) in ctrl.iter().enumerate().take(self.n_ctrl) {
            full[off + k] = *c;
        }
        self.restrict(&full)
    }

    /// Effort fields v = x₁/ρ and m = EI x₂ at the nodes of every segment.
    pub fn nodal_fields(&self, x: &[c64]) -> Vec<NodalFields> {
        let full = self.expand(x);
        let n = self.grid.cells_per_segment;
        self.segs
            .iter()
            .map(|sg| NodalFields {
                zeta: (0..=n).map(|i| i as f64 / n as f64).collect(),
                v: (0..=n).map(|i| full[sg.base + 2 * i] * sg.h1[i]).collect(),
                m: (0..=n).map(|i| full[sg.base + 2 * i + 1] * sg.h2[i]).collect(),
            })
            .collect()
    }

    pub fn controller_state(&self, x: &[c64]) -> Vec<c64> {
        let full = self.expand(x);
        full[self.n_full - self.n_ctrl..].to_vec()
    }

    /// Values and one-sided second-order derivatives (physical) at both ends of each segment.
    pub fn raw_end_traces(&self, x: &[c64]) -> Vec<SegmentEndTraces> {
        let fields = self.nodal_fields(x);
        let n = self.grid.cells_per_segment;
        fields
            .iter()
            .zip(&self.segs)
            .map(|(f, sg)| {
                let d0 = |g: &[c64]| (g[0] * -3.0 + g[1] * 4.0 - g[2]) / (2.0 * sg.h);
                let d1 = |g: &[c64]| (g[n] * 3.0 - g[n - 1] * 4.0 + g[n - 2]) / (2.0 * sg.h);
                SegmentEndTraces {
                    left: [f.v[0], f.m[0], d0(&f.v), d0(&f.m)],
                    right: [f.v[n], f.m[n], d1(&f.v), d1(&f.m)],
                }
            })
            .collect()
    }

    fn port_s(&self, full: &[c64], pd: &PortData) -> Vec<c64> {
        pd.svars.iter().map(|&v| full[v]).collect()
    }

    /// Scheme traces (t, x_c) of one port.
    fn scheme_traces(&self, full: &[c64], pd: &PortData) -> Vec<c64> {
        linalg::mat_vec(&pd.trace_map, &self.port_s(full, pd))
    }

    /// Segment lengths (physical).
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Ã = M^{1/2} A M^{-1/2} = M^{-1/2} S M^{-1/2}, the generator in energy-orthonormal coordinates.
    pub fn symmetrized(&self) -> Csr {
        let sq: Vec<f64> = self.m_diag.iter().map(|w| w.sqrt()).collect();
        let mut t = vec![];
        for (i, j, v) in self.skew.triplets().into_iter().chain(self.diss.triplets()) {
            t.push((i, j, v / (sq[i] * sq[j])));
        }
        Csr::from_triplets(self.dim(), self.dim(), &t)
    }

    pub fn to_tilde(&self, x: &[c64]) -> Vec<c64> {
        x.iter().zip(&self.m_diag).map(|(z, w)| z * w.sqrt()).collect()
    }

    pub fn from_tilde(&self, w: &[c64]) -> Vec<c64> {
        w.iter().zip(&self.m_diag).map(|(z, m)| z / m.sqrt()).collect()
    }

    /// Write A_h and M_h in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, dir: &Path) -> std::io::Result<()> {
        let write = |name: &str, trip: Vec<(usize, usize, c64)>| -> std::io::Result<()> {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            let field = if self.is_real { "real" } else { "complex" };
            writeln!(f, "%%MatrixMarket matrix coordinate {field} general")?;
            writeln!(f, "{} {} {}", self.dim(), self.dim(), trip.len())?;
            for (i, j, v) in trip {
                if self.is_real {
                    writeln!(f, "{} {} {:.17e}", i + 1, j + 1, v.re)?;
                } else {
                    writeln!(f, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
                }
            }
            Ok(())
        };
        write("A_h.mtx", self.a.triplets())?;
        write("M_h.mtx", self.m_diag.iter().enumerate().map(|(i, w)| (i, i, re(*w))).collect())
    }
}

pub fn energy(bundle: &OperatorBundle, x: &[c64]) -> Result<f64, DiscretizeError> {
    bundle.check(x)?;
    Ok(bundle.energy_of(x))
}

pub fn discrete_power_balance(bundle: &OperatorBundle, x: &[c64]) -> Result<PowerBalanceBreakdown, DiscretizeError> {
    bundle.check(x)?;
    let full = bundle.expand(x);
    let mut ports_out = vec![];
    let mut rhs = 0.0;
    for pd in &bundle.ports {
        let tz = bundle.scheme_traces(&full, pd);
        let t = pd.algebra.n_traces();
        let power = linalg::dot(&linalg::mat_vec(&pd.algebra.power, &tz[..t]), &tz[..t]).re;
        let rate = match &pd.algebra.dynamics {
            PortDynamics::Static => 0.0,
            PortDynamics::Controller { a, bt } => {
                let xc = &tz[t..];
                let ax = linalg::mat_vec(a, xc);
                let bx = linalg::mat_vec(bt, &tz[..t]);
                let d: Vec<c64> = ax.iter().zip(&bx).map(|(p, q)| p + q).collect();
                linalg::dot(&d, xc).re
            }
        };
        rhs += power + rate;
        ports_out.push(PortPower { label: pd.algebra.label.clone(), power, controller_rate: rate });
    }
    let lhs = bundle.rate(x);
    Ok(PowerBalanceBreakdown { lhs, lhs_direct: bundle.rate_direct(x), rhs, diff: lhs - rhs, ports: ports_out })
}

pub fn traces(bundle: &OperatorBundle, x: &[c64]) -> Result<TraceVector, DiscretizeError> {
    bundle.check(x)?;
    let full = bundle.expand(x);
    let raw = bundle.raw_end_traces(x);
    let mut out = vec![];
    let mut ends: [Vec<c64>; 2] = [vec![], vec![]];
    for pd in &bundle.ports {
        let t = pd.algebra.n_traces();
        let mut tz = bundle.scheme_traces(&full, pd);
        // fill flux directions the port conditions leave open from the one-sided stencils
        let nf = pd.flux_free.ncols();
        if nf > 0 {
            let mut delta = vec![re(0.0); 2 * pd.n_sides];
            for (k, side) in pd.algebra.sides.iter().enumerate() {
                let r = if side.end == Side::Left { raw[side.segment].left } else { raw[side.segment].right };
                delta[2 * k] = r[DV] - tz[4 * k + DV];
                delta[2 * k + 1] = r[DM] - tz[4 * k + DM];
            }
            let coef = linalg::mat_vec(&linalg::adjoint(&pd.flux_free), &delta);
            let corr = linalg::mat_vec(&pd.flux_free, &coef);
            for k in 0..pd.n_sides {
                tz[4 * k + DV] += corr[2 * k];
                tz[4 * k + DM] += corr[2 * k + 1];
            }
        }
        let tv = &tz[..t];
        let g_res: Vec<c64> = {
            let a = linalg::mat_vec(&pd.algebra.g, tv);
            let b = linalg::mat_vec(&pd.algebra.g_c, &tz[t..]);
            a.iter().zip(&b).map(|(p, q)| p + q).collect()
        };
        match pd.algebra.location {
            ports::PortLocation::Left => ends[0] = tv.to_vec(),
            ports::PortLocation::Right => ends[1] = tv.to_vec(),
            _ => {}
        }
        out.push(PortTraces {
            label: pd.algebra.label.clone(),
            t: tv.to_vec(),
            b0: linalg::mat_vec(&pd.algebra.b0, tv),
            b: linalg::mat_vec(&pd.algebra.b, tv),
            c: linalg::mat_vec(&pd.algebra.c, tv),
            condition_residual: linalg::norm2(&g_res),
        });
    }
    let mut sel = ends[0].clone();
    sel.extend_from_slice(&ends[1]);
    Ok(TraceVector { ports: out, selector_components: sel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chain, normalize, ChainSpecDocument};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bundle(json: &str, n: usize) -> OperatorBundle {
        let doc: ChainSpecDocument = serde_json::from_str(json).unwrap();
        assemble(&normalize(&build_chain(&doc).unwrap()), &Grid::new(n).unwrap()).unwrap()
    }

    fn random_state(b: &OperatorBundle, rng: &mut ChaCha8Rng) -> Vec<c64> {
        (0..b.dim()).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    const CF: &str = r#"{"segments":[{"length":1,"rho":[1,1],"ei":[1,1]}],
        "left_end":{"closure":"clamped"},"right_end":{"closure":"free"}}"#;

    #[test]
    fn conservative_is_skew() {
        let b = bundle(CF, 8);
        assert!(b.conservative);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = random_state(&b, &mut rng);
            assert!(b.rate(&x).abs() <= 1e-12 * b.m_norm_sq(&x));
            assert!(b.rate_direct(&x).abs() <= 1e-10 * b.m_norm_sq(&x));
        }
    }

    #[test]
    fn grid_minimum() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn energy_of_unit_velocity() {
        let b = bundle(CF.replace("clamped", "free").as_str(), 16);
        let x = b.sample_state(|_, _| [re(1.0), re(0.0)], &[]);
        assert!((energy(&b, &x).unwrap() - 0.5).abs() < 1e-12);
        let x2: Vec<c64> = x.iter().map(|z| z * 2.0).collect();
        assert!((energy(&b, &x2).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(energy(&b, &vec![re(0.0); b.dim()]).unwrap(), 0.0);
        assert!(matches!(energy(&b, &[re(0.0)]), Err(DiscretizeError::DimensionMismatch { .. })));
    }
}
