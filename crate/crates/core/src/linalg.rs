//! Dense/sparse complex linear algebra used across the crate.
//!
//! Density matrices are dense [`CMat`]s. Ladder operators and everything
//! built from them (Hamiltonians, collective jump operators) are stored as
//! [`SparseOp`] in compressed-row form, since every propagator spends its
//! time in products `A * rho` and `rho * A` with such operators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);
pub const TWO: C64 = C64::new(2.0, 0.0);

/// Square sparse complex matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOp {
    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r},{c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        // drop exact zeros after merging
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOp {
            dim,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SparseOp {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, ONE)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn adjoint(&self) -> SparseOp {
        SparseOp::from_triplets(
            self.dim,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn scale(&self, s: C64) -> SparseOp {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Σ c_k A_k over operators of equal dimension.
    pub fn lincomb<'a>(dim: usize, terms: impl IntoIterator<Item = (C64, &'a SparseOp)>) -> Self {
        let mut trip = Vec::new();
        for (c, op) in terms {
            assert_eq!(op.dim, dim);
            if c == ZERO {
                continue;
            }
            trip.extend(op.triplets().map(|(r, col, v)| (r, col, c * v)));
        }
        SparseOp::from_triplets(dim, trip)
    }

    pub fn add(&self, other: &SparseOp) -> SparseOp {
        SparseOp::lincomb(self.dim, [(ONE, self), (ONE, other)])
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let mut trip = Vec::new();
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let mid = self.cols[k];
                let a = self.vals[k];
                for m in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    trip.push((r, other.cols[m], a * other.vals[m]));
                }
            }
        }
        SparseOp::from_triplets(self.dim, trip)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim);
        self.mul_vec_acc(ONE, v.as_slice(), out.as_mut_slice());
        out
    }

    /// out += scale * A v
    pub fn mul_vec_acc(&self, scale: C64, v: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o += scale * acc;
        }
    }

    /// `A * M` for dense `M`.
    pub fn mul_dense(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, m.ncols());
        self.mul_dense_acc(ONE, m, &mut out);
        out
    }

    /// out += scale * A M
    pub fn mul_dense_acc(&self, scale: C64, m: &CMat, out: &mut CMat) {
        assert_eq!(m.nrows(), self.dim);
        for c in 0..m.ncols() {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            for r in 0..self.dim {
                let mut acc = ZERO;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * src[self.cols[k]];
                }
                dst[r] += scale * acc;
            }
        }
    }

    /// `M * A` for dense `M`.
    pub fn dense_mul(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(m.nrows(), self.dim);
        self.dense_mul_acc(ONE, m, &mut out);
        out
    }

    /// out += scale * M A
    pub fn dense_mul_acc(&self, scale: C64, m: &CMat, out: &mut CMat) {
        assert_eq!(m.ncols(), self.dim);
        let nrows = m.nrows();
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for k in 0..self.dim {
            let col_k = &src[k * nrows..(k + 1) * nrows];
            for idx in self.row_ptr[k]..self.row_ptr[k + 1] {
                let c = self.cols[idx];
                let v = scale * self.vals[idx];
                let col_c = &mut dst[c * nrows..(c + 1) * nrows];
                for (d, s) in col_c.iter_mut().zip(col_k) {
                    *d += v * s;
                }
            }
        }
    }
}

/// m + m†, written in place of a fresh allocation.
pub fn add_adjoint(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |r, c| m[(r, c)] + m[(c, r)].conj())
}

pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5)
}

/// Eigenvalues of a Hermitian matrix in ascending order (the anti-Hermitian
/// part is discarded).
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let h = faer::Mat::<faer::c64>::from_fn(n, n, |r, c| {
        let z = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
        faer::c64::new(z.re, z.im)
    });
    let mut ev = h
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("Hermitian eigensolver failed to converge");
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// ½‖a − b‖₁ for Hermitian a, b.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// max |m − m†| entrywise.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_dense(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMat::from_fn(n, n, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn sparse_products_match_dense() {
        let n = 7;
        let dense = rand_dense(n, 3);
        let trip: Vec<_> = (0..n)
            .flat_map(|r| [(r, (r + 1) % n, C64::new(r as f64, 1.0)), (r, r, C64::new(0.5, -0.2))])
            .collect();
        let sp = SparseOp::from_triplets(n, trip);
        let d = sp.to_dense();
        assert!(max_abs_diff(&sp.mul_dense(&dense), &(&d * &dense)) < 1e-12);
        assert!(max_abs_diff(&sp.dense_mul(&dense), &(&dense * &d)) < 1e-12);
        assert!(max_abs_diff(&sp.adjoint().to_dense(), &d.adjoint()) < 1e-15);
        assert!(max_abs_diff(&sp.matmul(&sp).to_dense(), &(&d * &d)) < 1e-12);
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let sp = SparseOp::from_triplets(2, vec![(0, 1, ONE), (0, 1, ONE), (1, 0, ONE), (1, 0, -ONE)]);
        assert_eq!(sp.nnz(), 1);
        assert_eq!(sp.to_dense()[(0, 1)], C64::new(2.0, 0.0));
    }

    #[test]
    fn hermitian_eigenvalues_match_closed_forms() {
        // 2×2: (a+d)/2 ± sqrt(((a−d)/2)² + |b|²)
        let (a, d, b) = (0.3, -1.1, C64::new(0.4, -0.7));
        let m = CMat::from_row_slice(2, 2, &[C64::new(a, 0.0), b, b.conj(), C64::new(d, 0.0)]);
        let r = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] - ((a + d) / 2.0 - r)).abs() < 1e-14);
        assert!((ev[1] - ((a + d) / 2.0 + r)).abs() < 1e-14);
        // Σλ = Tr and Σλ² = ‖H‖_F² for a block-sparse Hermitian matrix
        let x = rand_dense(40, 9);
        let mut h = hermitian_part(&x);
        for r in 0..20 {
            for c in 20..40 {
                h[(r, c)] = ZERO;
                h[(c, r)] = ZERO;
            }
        }
        let ev = hermitian_eigenvalues(&h);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        assert!((ev.iter().sum::<f64>() - trace(&h).re).abs() < 1e-12);
        let fro: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        assert!((ev.iter().map(|x| x * x).sum::<f64>() - fro).abs() < 1e-11);
    }

    #[test]
    fn trace_distance_of_orthogonal_projectors_is_one() {
        let mut a = CMat::zeros(3, 3);
        let mut b = CMat::zeros(3, 3);
        a[(0, 0)] = ONE;
        b[(2, 2)] = ONE;
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-12);
    }
}
