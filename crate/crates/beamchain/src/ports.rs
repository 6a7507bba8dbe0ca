//! Trace algebra of the end and junction ports.
//!
//! A port sees the one-sided traces of every adjacent segment end, ordered per
//! side as `(v, m, v', m')` with v = ρ ω_t (divided by ρ, i.e. the velocity),
//! m = EI ω_ζζ the bending moment, and primes physical arc-length derivatives.
//! Junctions stack the left (minus) side before the right (plus) side.
//!
//! Every port is described by linear conditions `G t + G_c x_c = 0`, the power
//! form `J` with `Re tᴴ J t` the energy flux into the chain, and a factorized
//! expression of the dissipated power valid on admissible traces.

use faer::c64;

use crate::linalg::{self, re, CMat};
use crate::model::{
    ChainModel, Closure, ControllerSpec, Coupling, EndCondition, EndConditionSpec, JunctionKind, JunctionSpec, Side,
};

pub const V: usize = 0;
pub const M: usize = 1;
pub const DV: usize = 2;
pub const DM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortLocation {
    Left,
    Right,
    /// junction between segment j and j + 1
    Junction(usize),
}

/// One side of a port: which segment end contributes traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PortSide {
    pub segment: usize,
    /// `Side::Right` means ζ = 1 of that segment
    pub end: Side,
}

#[derive(Clone, Debug)]
pub enum PortDynamics {
    /// no controller state
    Static,
    /// ẋ_c = A x_c + B_t t where B_t = B·c_map
    Controller { a: CMat, bt: CMat },
}

#[derive(Clone, Debug)]
pub struct PortAlgebra {
    pub label: String,
    pub location: PortLocation,
    pub sides: Vec<PortSide>,
    /// continuity conditions (zero rows for ends)
    pub b0: CMat,
    /// input and output maps on the trace vector
    pub b: CMat,
    pub c: CMat,
    /// conditions on (t, x_c): g t + g_c x_c = 0
    pub g: CMat,
    pub g_c: CMat,
    /// Hermitian power form; Re tᴴ J t is the energy flux into the chain
    pub power: CMat,
    pub dynamics: PortDynamics,
    /// on admissible (t, x_c): Re(port power + controller rate) = Re zᴴ Q z with z = L (t, x_c)
    pub diss_l: CMat,
    pub diss_q: CMat,
    pub conservative: bool,
}

impl PortAlgebra {
    pub fn n_traces(&self) -> usize {
        4 * self.sides.len()
    }

    pub fn n_ctrl(&self) -> usize {
        self.g_c.ncols()
    }
}

fn row(entries: &[(usize, f64)], n: usize) -> Vec<c64> {
    let mut r = vec![re(0.0); n];
    for &(i, v) in entries {
        r[i] += re(v);
    }
    r
}

fn rows(rs: &[Vec<c64>], n: usize) -> CMat {
    linalg::from_fn(rs.len(), n, |i, j| rs[i][j])
}

/// Power form of one end: the right end of a segment gives −m'v̄ + m v̄',
/// the left end the negative.
pub fn end_power(end: Side) -> CMat {
    let s = match end {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let mut j = linalg::zeros(4, 4);
    j[(V, DM)] = re(-0.5 * s);
    j[(DM, V)] = re(-0.5 * s);
    j[(M, DV)] = re(0.5 * s);
    j[(DV, M)] = re(0.5 * s);
    j
}

/// Oriented end-trace vector w = P t: right end (v, m, −m', v'), left end (v, m, m', −v'),
/// so that the end power equals ½ wᴴ Σ w with Σ = [[0, I], [I, 0]].
pub fn orientation(end: Side) -> CMat {
    let mut p = linalg::zeros(4, 4);
    p[(0, V)] = re(1.0);
    p[(1, M)] = re(1.0);
    match end {
        Side::Right => {
            p[(2, DM)] = re(-1.0);
            p[(3, DV)] = re(1.0);
        }
        Side::Left => {
            p[(2, DM)] = re(1.0);
            p[(3, DV)] = re(-1.0);
        }
    }
    p
}

/// (b, c) of a conservative closure; b = 0 is the closure.
fn closure_maps(closure: Closure, end: Side) -> (CMat, CMat) {
    let s = match end {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let (b, c): (Vec<Vec<c64>>, Vec<Vec<c64>>) = match (closure, end) {
        (Closure::Pinned, _) => (vec![row(&[(V, 1.0)], 4), row(&[(M, 1.0)], 4)], vec![row(&[(DM, -s)], 4), row(&[(DV, s)], 4)]),
        (Closure::Free, _) => (vec![row(&[(M, 1.0)], 4), row(&[(DM, -s)], 4)], vec![row(&[(DV, s)], 4), row(&[(V, 1.0)], 4)]),
        (Closure::ShearHinge, _) => (vec![row(&[(DV, 1.0)], 4), row(&[(DM, -s)], 4)], vec![row(&[(M, s)], 4), row(&[(V, 1.0)], 4)]),
        (Closure::Clamped, _) => (vec![row(&[(V, 1.0)], 4), row(&[(DV, 1.0)], 4)], vec![row(&[(DM, -s)], 4), row(&[(M, s)], 4)]),
    };
    (rows(&b, 4), rows(&c, 4))
}

/// (b, c) of a damped end: c = (v, v'), b = (−m', m) on the right and (m', −m) on the left.
fn damped_maps(end: Side) -> (CMat, CMat) {
    let s = match end {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let b = rows(&[row(&[(DM, -s)], 4), row(&[(M, s)], 4)], 4);
    let c = rows(&[row(&[(V, 1.0)], 4), row(&[(DV, 1.0)], 4)], 4);
    (b, c)
}

/// (b0, b, c) of a junction of the given kind on t = (t⁻, t⁺); [f] = f⁻ − f⁺, bars are averages.
fn junction_maps(kind: JunctionKind) -> (CMat, CMat, CMat) {
    let jump = |q: usize, s: f64| row(&[(q, s), (4 + q, -s)], 8);
    let avg = |q: usize, s: f64| row(&[(q, 0.5 * s), (4 + q, 0.5 * s)], 8);
    let (b0, b, c) = match kind.get() {
        1 => ([jump(V, 1.0), jump(DV, 1.0)], [jump(DM, -1.0), jump(M, 1.0)], [avg(V, 1.0), avg(DV, 1.0)]),
        2 => ([jump(V, 1.0), jump(M, 1.0)], [jump(DM, -1.0), jump(DV, 1.0)], [avg(V, 1.0), avg(M, 1.0)]),
        3 => ([jump(DM, -1.0), jump(DV, 1.0)], [jump(V, 1.0), jump(M, 1.0)], [avg(DM, -1.0), avg(DV, 1.0)]),
        4 => ([jump(DM, -1.0), jump(M, 1.0)], [jump(V, 1.0), jump(DV, 1.0)], [avg(DM, -1.0), avg(M, 1.0)]),
        _ => unreachable!("junction kind validated on construction"),
    };
    (rows(&b0, 8), rows(&b, 8), rows(&c, 8))
}

fn close(
    label: String,
    location: PortLocation,
    sides: Vec<PortSide>,
    b0: CMat,
    b: CMat,
    c: CMat,
    coupling: &Coupling,
    power: CMat,
    conservative: bool,
) -> PortAlgebra {
    let t = b.ncols();
    match coupling {
        Coupling::Static(k) => {
            let g = linalg::vstack(&[&b0, &linalg::add(&b, &linalg::matmul(k, &c))]);
            let nrows = g.nrows();
            let kh = linalg::herm_part(k);
            PortAlgebra {
                label,
                location,
                sides,
                b0,
                g_c: linalg::zeros(nrows, 0),
                diss_l: c.clone(),
                diss_q: linalg::scale(&kh, -1.0),
                b,
                c,
                g,
                power,
                dynamics: PortDynamics::Static,
                conservative,
            }
        }
        Coupling::Dynamic(ctl) => {
            let n = ctl.n();
            let g = linalg::vstack(&[&b0, &linalg::add(&b, &linalg::matmul(&ctl.d, &c))]);
            let g_c = linalg::vstack(&[&linalg::zeros(b0.nrows(), n), &ctl.c]);
            // z = (x_c, c t)
            let mut l = linalg::zeros(n + 2, t + n);
            for i in 0..n {
                l[(i, t + i)] = re(1.0);
            }
            for i in 0..2 {
                for j in 0..t {
                    l[(n + i, j)] = c[(i, j)];
                }
            }
            let top = linalg::hstack(&[&ctl.a, &ctl.b]);
            let bot = linalg::scale(&linalg::hstack(&[&ctl.c, &ctl.d]), -1.0);
            let q = linalg::herm_part(&linalg::vstack(&[&top, &bot]));
            let bt = linalg::matmul(&ctl.b, &c);
            PortAlgebra {
                label,
                location,
                sides,
                b0,
                b,
                c,
                g,
                g_c,
                power,
                dynamics: PortDynamics::Controller { a: ctl.a.clone(), bt },
                diss_l: l,
                diss_q: q,
                conservative: false,
            }
        }
    }
}

pub fn end_port(spec: &EndConditionSpec, segment: usize) -> PortAlgebra {
    let end = spec.side;
    let location = match spec.side {
        Side::Left => PortLocation::Left,
        Side::Right => PortLocation::Right,
    };
    let sides = vec![PortSide { segment, end }];
    let power = end_power(end);
    let b0 = linalg::zeros(0, 4);
    let label = format!("{}_end", spec.side);
    match &spec.condition {
        EndCondition::Conservative(cl) => {
            let (b, c) = closure_maps(*cl, end);
            close(label, location, sides, b0, b, c, &Coupling::Static(linalg::zeros(2, 2)), power, true)
        }
        EndCondition::Damped(k0) => {
            let (b, c) = damped_maps(end);
            let conservative = linalg::fro_norm(&linalg::herm_part(k0)) == 0.0;
            close(label, location, sides, b0, b, c, &Coupling::Static(k0.clone()), power, conservative)
        }
        EndCondition::Controlled(ctl) => {
            let (b, c) = damped_maps(end);
            close(label, location, sides, b0, b, c, &Coupling::Dynamic(ctl.clone()), power, false)
        }
        EndCondition::Explicit { w_b, w_c, k } => {
            let p = orientation(end);
            let b = linalg::matmul(w_b, &p);
            let c = linalg::matmul(w_c, &p);
            let g = linalg::add(&b, &linalg::matmul(k, &c));
            let conservative = linalg::fro_norm(&linalg::herm_part(k)) == 0.0;
            PortAlgebra {
                label,
                location,
                sides,
                b0,
                b,
                c,
                g_c: linalg::zeros(2, 0),
                g,
                diss_l: linalg::identity(4),
                diss_q: power.clone(),
                power,
                dynamics: PortDynamics::Static,
                conservative,
            }
        }
    }
}

pub fn junction_port(spec: &JunctionSpec, j: usize) -> PortAlgebra {
    let (b0, b, c) = junction_maps(spec.kind);
    let mut power = linalg::zeros(8, 8);
    let (pr, pl) = (end_power(Side::Right), end_power(Side::Left));
    for i in 0..4 {
        for k in 0..4 {
            power[(i, k)] = pr[(i, k)];
            power[(4 + i, 4 + k)] = pl[(i, k)];
        }
    }
    let conservative = match &spec.coupling {
        Coupling::Static(k) => linalg::fro_norm(&linalg::herm_part(k)) == 0.0,
        Coupling::Dynamic(_) => false,
    };
    close(
        format!("junction_{j}"),
        PortLocation::Junction(j),
        vec![PortSide { segment: j, end: Side::Right }, PortSide { segment: j + 1, end: Side::Left }],
        b0,
        b,
        c,
        &spec.coupling,
        power,
        conservative,
    )
}

/// All ports of a chain in order: left end, junctions, right end.
pub fn chain_ports(model: &ChainModel) -> Vec<PortAlgebra> {
    let m = model.segments.len();
    let mut out = vec![end_port(&model.left_end, 0)];
    for (j, js) in model.junctions.iter().enumerate() {
        out.push(junction_port(js, j));
    }
    out.push(end_port(&model.right_end, m - 1));
    out
}

/// Controller attached to a port, if any.
pub fn controller_of(model: &ChainModel, loc: PortLocation) -> Option<&ControllerSpec> {
    match loc {
        PortLocation::Left => match &model.left_end.condition {
            EndCondition::Controlled(c) => Some(c),
            _ => None,
        },
        PortLocation::Right => match &model.right_end.condition {
            EndCondition::Controlled(c) => Some(c),
            _ => None,
        },
        PortLocation::Junction(j) => match &model.junctions[j].coupling {
            Coupling::Dynamic(c) => Some(c),
            _ => None,
        },
    }
}

/// Hermitian form of (port power + controller rate) over z = (t, x_c).
pub fn rate_form(p: &PortAlgebra) -> CMat {
    let t = p.n_traces();
    let n = p.n_ctrl();
    let mut r = linalg::zeros(t + n, t + n);
    for i in 0..t {
        for j in 0..t {
            r[(i, j)] = p.power[(i, j)];
        }
    }
    if let PortDynamics::Controller { a, bt } = &p.dynamics {
        // Re x̄ (A x + B_t t)
        for i in 0..n {
            for j in 0..n {
                r[(t + i, t + j)] += (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            }
            for j in 0..t {
                r[(t + i, j)] += bt[(i, j)] * 0.5;
                r[(j, t + i)] += bt[(i, j)].conj() * 0.5;
            }
        }
    }
    r
}

/// Orthonormal basis of admissible (t, x_c) (columns).
pub fn admissible_basis(p: &PortAlgebra) -> CMat {
    let gg = linalg::hstack(&[&p.g, &p.g_c]);
    linalg::null_space(&gg, 1e-12)
}
