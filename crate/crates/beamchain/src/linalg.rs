//! Small dense helpers on top of faer plus a minimal CSR matrix over `c64`.
//!
//! Everything port-sized (≤ 8 + controller dimension) goes through the dense
//! helpers; the assembled generator lives in [`Csr`].

use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat, Side};

pub type CMat = Mat<c64>;

#[inline]
pub fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, c, |i, j| re(rows[i][j]))
}

pub fn from_fn(r: usize, c: usize, f: impl FnMut(usize, usize) -> c64) -> CMat {
    Mat::from_fn(r, c, f)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape");
    if a.nrows() == 0 || b.ncols() == 0 {
        return zeros(a.nrows(), b.ncols());
    }
    if a.ncols() == 0 {
        return zeros(a.nrows(), b.ncols());
    }
    a * b
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn scale(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// (A + Aᴴ)/2
pub fn herm_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// (A − Aᴴ)/2
pub fn skew_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] - a[(j, i)].conj()) * 0.5)
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let r = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(r, c);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                out[(i, off + j)] = b[(i, j)];
            }
        }
        off += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&CMat]) -> CMat {
    let c = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(r, c);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                out[(off + i, j)] = b[(i, j)];
            }
        }
        off += b.nrows();
    }
    out
}

pub fn select_cols(a: &CMat, cols: &[usize]) -> CMat {
    Mat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

pub fn select_rows_range(a: &CMat, start: usize, end: usize) -> CMat {
    Mat::from_fn(end - start, a.ncols(), |i, j| a[(start + i, j)])
}

pub fn fro_norm(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn is_real_mat(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].im == 0.0))
}

/// Full SVD `A = U diag(s) Vᴴ`, tolerant of empty shapes. Real input is
/// decomposed in real arithmetic so that derived bases stay real.
pub fn svd_full(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (r, c) = (a.nrows(), a.ncols());
    if r == 0 || c == 0 {
        return (identity(r), vec![], identity(c));
    }
    let k = r.min(c);
    if is_real_mat(a) {
        let ar = Mat::<f64>::from_fn(r, c, |i, j| a[(i, j)].re);
        let svd = ar.svd().expect("svd failed to converge");
        let s = (0..k).map(|i| svd.S().column_vector()[i]).collect();
        let u = svd.U();
        let v = svd.V();
        return (
            Mat::from_fn(r, r, |i, j| re(u[(i, j)])),
            s,
            Mat::from_fn(c, c, |i, j| re(v[(i, j)])),
        );
    }
    let svd = a.svd().expect("svd failed to converge");
    let s = (0..k).map(|i| svd.S().column_vector()[i].re).collect();
    (svd.U().to_owned(), s, svd.V().to_owned())
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    svd_full(a).1
}

pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn numerical_rank(a: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Orthonormal basis of the right null space (columns).
pub fn null_space(a: &CMat, rel_tol: f64) -> CMat {
    let c = a.ncols();
    if a.nrows() == 0 {
        return identity(c);
    }
    let (_, s, v) = svd_full(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 { 0 } else { s.iter().filter(|&&x| x > rel_tol * smax).count() };
    let cols: Vec<usize> = (rank..c).collect();
    select_cols(&v, &cols)
}

/// Moore–Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(a: &CMat, rel_tol: f64) -> CMat {
    let (r, c) = (a.nrows(), a.ncols());
    if r == 0 || c == 0 {
        return zeros(c, r);
    }
    let (u, s, v) = svd_full(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let mut out = zeros(c, r);
    for (k, &sk) in s.iter().enumerate() {
        if smax == 0.0 || sk <= rel_tol * smax {
            continue;
        }
        for i in 0..c {
            for j in 0..r {
                out[(i, j)] += v[(i, k)] * u[(j, k)].conj() * (1.0 / sk);
            }
        }
    }
    out
}

/// Eigen-decomposition of the Hermitian part of `a`; eigenvalues ascending.
pub fn herm_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (vec![], zeros(0, 0));
    }
    let h = herm_part(a);
    let (vals, vecs): (Vec<f64>, CMat) = if is_real_mat(&h) {
        let hr = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)].re);
        let e = hr.self_adjoint_eigen(Side::Lower).expect("symmetric eigen failed");
        let u = e.U();
        ((0..n).map(|i| e.S().column_vector()[i]).collect(), Mat::from_fn(n, n, |i, j| re(u[(i, j)])))
    } else {
        let e = h.self_adjoint_eigen(Side::Lower).expect("hermitian eigen failed");
        ((0..n).map(|i| e.S().column_vector()[i].re).collect(), e.U().to_owned())
    };
    // faer returns ascending order already; sort defensively and permute vectors
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let sorted: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
    (sorted, select_cols(&vecs, &idx))
}

pub fn herm_eigenvalues(a: &CMat) -> Vec<f64> {
    herm_eigen(a).0
}

/// General (non-Hermitian) eigenvalues of a small dense matrix.
pub fn eigenvalues(a: &CMat) -> Vec<c64> {
    let n = a.nrows();
    if n == 0 {
        return vec![];
    }
    let e = a.eigen().expect("eigen failed to converge");
    (0..n).map(|i| e.S().column_vector()[i]).collect()
}

pub fn col_vec(v: &[c64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn mat_vec(a: &CMat, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), x.len());
    (0..a.nrows())
        .map(|i| (0..a.ncols()).fold(c64::new(0.0, 0.0), |acc, j| acc + a[(i, j)] * x[j]))
        .collect()
}

pub fn dot(x: &[c64], y: &[c64]) -> c64 {
    // ⟨x, y⟩ = Σ x_i conj(y_i)
    x.iter().zip(y).fold(c64::new(0.0, 0.0), |acc, (a, b)| acc + a * b.conj())
}

pub fn norm2(x: &[c64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Compressed sparse row matrix. Entries are kept sorted by column within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<c64>,
}

impl Csr {
    /// Duplicates are summed; exact zeros after summation are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, c64)]) -> Csr {
        let mut t: Vec<(usize, usize, c64)> = trip.to_vec();
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<c64> = Vec::with_capacity(t.len());
        let mut rows = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            assert!(i < nrows && j < ncols, "triplet out of range");
            if let (Some(&li), Some(&lj)) = (rows.last(), indices.last()) {
                if li == i && lj == j {
                    *data.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(i);
            indices.push(j);
            data.push(v);
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_dat = Vec::with_capacity(indices.len());
        for k in 0..indices.len() {
            if data[k] != c64::new(0.0, 0.0) {
                indptr[rows[k] + 1] += 1;
                keep_idx.push(indices[k]);
                keep_dat.push(data[k]);
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr { nrows, ncols, indptr, indices: keep_idx, data: keep_dat }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, c64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(k) => self.data[lo + k],
            Err(_) => c64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).fold(c64::new(0.0, 0.0), |acc, (j, v)| acc + v * x[j]))
            .collect()
    }

    pub fn adjoint_matvec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.nrows);
        let mut out = vec![c64::new(0.0, 0.0); self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[j] += v.conj() * x[i];
            }
        }
        out
    }

    /// Re(xᴴ A x)
    pub fn quad_re(&self, x: &[c64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                s += (x[i].conj() * v * x[j]).re;
            }
        }
        s
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|v| v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Cheap upper bound on ‖A‖₂: sqrt(‖A‖₁‖A‖∞).
    pub fn norm_bound(&self) -> f64 {
        let mut row_max: f64 = 0.0;
        let mut col = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let mut r = 0.0;
            for (j, v) in self.row(i) {
                r += v.norm();
                col[j] += v.norm();
            }
            row_max = row_max.max(r);
        }
        let col_max = col.into_iter().fold(0.0, f64::max);
        (row_max * col_max).sqrt()
    }

    /// `alpha·I + beta·A` as a faer sparse column matrix (square only).
    pub fn shifted_faer(&self, alpha: c64, beta: c64) -> SparseColMat<usize, c64> {
        assert_eq!(self.nrows, self.ncols);
        let mut trip: Vec<Triplet<usize, usize, c64>> = Vec::with_capacity(self.nnz() + self.nrows);
        for i in 0..self.nrows {
            trip.push(Triplet::new(i, i, alpha));
            for (j, v) in self.row(i) {
                trip.push(Triplet::new(i, j, beta * v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip).expect("valid triplets")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_sums_duplicates_and_drops_zeros() {
        let a = Csr::from_triplets(
            2,
            2,
            &[(0, 0, re(1.0)), (0, 0, re(2.0)), (1, 0, re(1.0)), (1, 0, re(-1.0)), (1, 1, re(4.0))],
        );
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), re(3.0));
        assert_eq!(a.get(1, 0), re(0.0));
        assert_eq!(a.matvec(&[re(1.0), re(1.0)]), vec![re(3.0), re(4.0)]);
    }

    #[test]
    fn null_space_and_pinv() {
        let a = from_real_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        let n = null_space(&a, 1e-12);
        assert_eq!(n.ncols(), 1);
        assert!(fro_norm(&matmul(&a, &n)) < 1e-14);
        let p = pinv(&a, 1e-12);
        let app = matmul(&matmul(&a, &p), &a);
        assert!(fro_norm(&sub(&app, &a)) < 1e-14);
    }

    #[test]
    fn herm_eigen_ascending() {
        let a = from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let (v, _) = herm_eigen(&a);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }
}
