//! Dense symmetric matrices and their eigen-decomposition.
//!
//! Operator evaluation only ever needs the spectrum of small (n <= 4)
//! Hessians, so a cyclic Jacobi sweep is used throughout. It is
//! unconditionally stable for symmetric input and returns orthonormal
//! eigenvectors as a by-product.

use std::fmt;

use thiserror::Error;

/// Cap on the number of full Jacobi sweeps.
pub const MAX_SWEEPS: usize = 64;

/// Relative off-diagonal Frobenius threshold at which Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("matrix is not symmetric at ({row}, {col}): {upper} != {lower}")]
    Asymmetric { row: usize, col: usize, upper: f64, lower: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must have dimension >= 1")]
    Empty,
    #[error("Jacobi iteration did not converge within {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// A dense real symmetric `n x n` matrix, stored row-major.
///
/// Symmetry is exact: every mutator writes both `(i, j)` and `(j, i)`.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * diag.len() + i] = d;
        }
        m
    }

    /// Builds a matrix from its rows, checking exact symmetry and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LinalgError::DimensionMismatch { expected: dim, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        let m = Self { dim, entries };
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from the upper triangle of `f(i, j)` (`i <= j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Checks that all entries are finite and that storage is symmetric.
    pub fn validate(&self) -> Result<(), LinalgError> {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                let v = self.entries[i * n + j];
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j, value: v });
                }
                if j > i && v != self.entries[j * n + i] {
                    return Err(LinalgError::Asymmetric { row: i, col: j, upper: v, lower: self.entries[j * n + i] });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.dim + j] = value;
        self.entries[j * self.dim + i] = value;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.get(i, j);
                s += 2.0 * v * v;
            }
        }
        s.sqrt()
    }

    /// `e^T M e`.
    pub fn quadratic_form(&self, e: &[f64]) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for (i, ei) in e.iter().enumerate().take(n) {
            let row: f64 = self.entries[i * n..(i + 1) * n].iter().zip(e).map(|(m, x)| m * x).sum();
            s += ei * row;
        }
        s
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.entries[i * n + j] * v[j]).sum()).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "SymMatrix::add dimension mismatch");
        Self { dim: self.dim, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect() }
    }

    /// `tr(A M)` for two symmetric matrices of equal size.
    pub fn trace_product(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "SymMatrix::trace_product dimension mismatch");
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    /// `Q diag(d) Q^T` for `Q` given by its columns.
    pub fn from_spectral(values: &[f64], vectors: &[Vec<f64>]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| (0..n).map(|k| values[k] * vectors[k][i] * vectors[k][j]).sum())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.entries.chunks(self.dim.max(1)).collect();
        f.debug_struct("SymMatrix").field("dim", &self.dim).field("rows", &rows).finish()
    }
}

/// Eigenvalues sorted ascending, with optional orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector belonging to `values[k]`.
    pub vectors: Option<Vec<Vec<f64>>>,
}

/// Eigenvalues of `m`, ascending.
pub fn symmetric_eigenvalues(m: &SymMatrix) -> Result<EigenResult, LinalgError> {
    symmetric_eigen(m, false)
}

/// Cyclic Jacobi eigen-decomposition.
///
/// Stops once the off-diagonal Frobenius norm drops to
/// `JACOBI_TOL * (1 + ||M||_F)`; gives up after `MAX_SWEEPS` sweeps.
pub fn symmetric_eigen(m: &SymMatrix, want_vectors: bool) -> Result<EigenResult, LinalgError> {
    m.validate()?;
    let n = m.dim;
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let mut a = m.clone();
    let mut v = if want_vectors { Some(SymMatrixCols::identity(n)) } else { None };
    let threshold = JACOBI_TOL * (1.0 + m.frobenius_norm());

    let mut converged = a.off_diagonal_norm() <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
                if let Some(v) = v.as_mut() {
                    v.rotate(p, q, c, s);
                }
            }
        }
        sweeps += 1;
        converged = a.off_diagonal_norm() <= threshold;
    }
    if !converged {
        return Err(LinalgError::NoConvergence { sweeps, off_norm: a.off_diagonal_norm() });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the original order among ties
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = v.map(|v| order.iter().map(|&i| v.column(i)).collect());
    Ok(EigenResult { values, vectors })
}

/// `(e_min, e_max)` of `m`.
pub fn eig_extremes(m: &SymMatrix) -> Result<(f64, f64), LinalgError> {
    let values = symmetric_eigenvalues(m)?.values;
    Ok((values[0], values[values.len() - 1]))
}

// A <- J^T A J for the Jacobi rotation J in the (p, q) plane.
fn rotate(a: &mut SymMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.dim;
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let apq = a.get(p, q);
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    a.set(p, p, c * c * app - 2.0 * s * c * apq + s * s * aqq);
    a.set(q, q, s * s * app + 2.0 * s * c * apq + c * c * aqq);
    a.set(p, q, 0.0);
}

// Column-major accumulator for the eigenvector matrix.
struct SymMatrixCols {
    n: usize,
    cols: Vec<f64>,
}

impl SymMatrixCols {
    fn identity(n: usize) -> Self {
        let mut cols = vec![0.0; n * n];
        for i in 0..n {
            cols[i * n + i] = 1.0;
        }
        Self { n, cols }
    }

    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64) {
        let n = self.n;
        for k in 0..n {
            let vp = self.cols[p * n + k];
            let vq = self.cols[q * n + k];
            self.cols[p * n + k] = c * vp - s * vq;
            self.cols[q * n + k] = s * vp + c * vq;
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.cols[j * self.n..(j + 1) * self.n].to_vec()
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
///
/// A pivot at or below `rel_tol * max diag(A)` is reported as
/// [`LinalgError::NotPositiveDefinite`].
pub fn cholesky_solve(a: &SymMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>, LinalgError> {
    let n = a.dim;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s.is_nan() || s <= rel_tol * scale {
                    return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Roots of det(M - x I) for a 2x2 matrix by bisection on the
    // characteristic polynomial, independent of the rotation code.
    fn char_roots_2x2(m: &SymMatrix) -> (f64, f64) {
        let (a, b, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
        let poly = |x: f64| (a - x) * (d - x) - b * b;
        let bound = 1.0 + a.abs() + b.abs() + d.abs();
        let vertex = 0.5 * (a + d);
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (poly(lo) > 0.0) == (poly(mid) > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        (bisect(-bound, vertex), bisect(vertex, bound))
    }

    #[test]
    fn zero_matrix() {
        let r = symmetric_eigenvalues(&SymMatrix::zeros(2)).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
    }

    #[test]
    fn diagonal_sorted() {
        let r = symmetric_eigenvalues(&SymMatrix::from_diag(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(r.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_matches_characteristic_roots() {
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (lo, hi) = char_roots_2x2(&m);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let r = symmetric_eigenvalues(&m).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-12, "{:?}", r.values);
        assert!((r.values[1] - 3.0).abs() < 1e-12, "{:?}", r.values);
    }

    #[test]
    fn extremes_examples() {
        assert_eq!(eig_extremes(&SymMatrix::identity(3)).unwrap(), (1.0, 1.0));
        assert_eq!(eig_extremes(&SymMatrix::from_diag(&[5.0, -2.0])).unwrap(), (-2.0, 5.0));
    }

    #[test]
    fn swap_matrix_extremes_bracketed_by_rayleigh_sampling() {
        use rand::{Rng, SeedableRng};
        let m = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..10_000 {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let q = m.quadratic_form(&[th.cos(), th.sin()]);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        // sampling approaches the extremes from inside
        assert!(lo > -1.0 - 1e-12 && lo < -1.0 + 1e-6);
        assert!(hi < 1.0 + 1e-12 && hi > 1.0 - 1e-6);
        let (emin, emax) = eig_extremes(&m).unwrap();
        assert!((emin + 1.0).abs() < 1e-14 && (emax - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = SymMatrix::zeros(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(symmetric_eigenvalues(&m), Err(LinalgError::NonFinite { .. })));
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).is_err());
    }

    #[test]
    fn cholesky_solves_and_flags_singular() {
        let a = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let x = cholesky_solve(&a, &[2.0, 1.0], 1e-14).unwrap();
        let back = a.mul_vec(&x);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 1.0).abs() < 1e-14);
        let singular = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(cholesky_solve(&singular, &[1.0, 1.0], 1e-12).is_err());
    }

    fn sym_strategy() -> impl Strategy<Value = SymMatrix> {
        (1usize..=6).prop_flat_map(|n| {
            proptest::collection::vec(-10.0f64..10.0, n * n)
                .prop_map(move |raw| SymMatrix::from_fn(n, |i, j| raw[i * n + j]))
        })
    }

    fn unit_vector(raw: &[f64]) -> Option<Vec<f64>> {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| raw.iter().map(|v| v / norm).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn eigenvalue_sum_is_trace(m in sym_strategy()) {
            let r = symmetric_eigen(&m, true).unwrap();
            let tol = 1e-10 * (1.0 + m.frobenius_norm());
            prop_assert!((r.values.iter().sum::<f64>() - m.trace()).abs() <= tol);
            prop_assert!(r.values.windows(2).all(|w| w[0] <= w[1]));
            let vecs = r.vectors.unwrap();
            for i in 0..m.dim() {
                for j in 0..m.dim() {
                    let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() <= 1e-10);
                }
            }
            let rebuilt = SymMatrix::from_spectral(&r.values, &vecs);
            let diff = rebuilt.add(&m.scaled(-1.0)).frobenius_norm();
            prop_assert!(diff <= tol, "reconstruction error {diff}");
        }
    }

    proptest! {
        #[test]
        fn rayleigh_sandwich(m in sym_strategy(), raw in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let (lo, hi) = eig_extremes(&m).unwrap();
            if let Some(e) = unit_vector(&raw[..m.dim()]) {
                let q = m.quadratic_form(&e);
                let slack = 1e-12 * (1.0 + m.frobenius_norm());
                prop_assert!(lo - slack <= q && q <= hi + slack, "{lo} <= {q} <= {hi}");
            }
        }

        #[test]
        fn orthogonal_similarity_preserves_spectrum(
            m in sym_strategy(),
            raw in proptest::collection::vec(-1.0f64..1.0, 36),
        ) {
            let n = m.dim();
            // Random orthogonal Q from a random symmetric matrix's eigenvectors.
            let s = SymMatrix::from_fn(n, |i, j| raw[i * 6 + j]);
            let q = symmetric_eigen(&s, true).unwrap().vectors.unwrap();
            // QMQ^T with Q rows = q[k]
            let rotated = SymMatrix::from_fn(n, |i, j| {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += q[i][a] * m.get(a, b) * q[j][b];
                    }
                }
                acc
            });
            let e1 = symmetric_eigenvalues(&m).unwrap().values;
            let e2 = symmetric_eigenvalues(&rotated).unwrap().values;
            for (a, b) in e1.iter().zip(&e2) {
                prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }
    }
}
