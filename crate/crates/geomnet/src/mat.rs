//! Dense row-major matrices and the factorizations the rest of the crate
//! builds on: a cyclic Jacobi symmetric eigensolver, Cholesky, triangular and
//! general inverses, and spectral matrix functions.
//!
//! Sizes here are small (a few tens of rows at most), so the routines favor
//! determinism and clarity over blocked performance.

use crate::diag;
use crate::error::{GeomError, Result};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Eigenvalues below this are clamped before log / sqrt / inv_sqrt / pow.
pub const EIG_CLAMP: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense matrix of `f64`, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Mat {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn from_diag(d: &[f64]) -> Mat {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Column vector from a slice.
    pub fn col(v: &[f64]) -> Mat {
        Mat::from_fn(v.len(), 1, |i, _| v[i])
    }

    /// 1x1 matrix holding a scalar.
    pub fn scalar(x: f64) -> Mat {
        Mat {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn same_shape(&self, other: &Mat) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The single entry of a 1x1 matrix.
    pub fn as_scalar(&self) -> f64 {
        assert!(self.rows == 1 && self.cols == 1, "not a scalar matrix");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert!(self.same_shape(other), "add: shape mismatch");
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&other.data) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert!(self.same_shape(other), "sub: shape mismatch");
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&other.data) {
            *o -= b;
        }
        out
    }

    pub fn neg(&self) -> Mat {
        self.scale(-1.0)
    }

    pub fn scale(&self, f: f64) -> Mat {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= f;
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert!(
            self.cols == other.rows,
            "matmul: {}x{} by {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let row = k * other.cols;
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.data[row + j];
                }
            }
        }
        out
    }

    pub fn t(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Symmetric part (A + A^T) / 2.
    pub fn sym(&self) -> Mat {
        assert!(self.is_square(), "sym: non-square");
        Mat::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square(), "trace: non-square");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product sum_ij A_ij B_ij.
    pub fn dot(&self, other: &Mat) -> f64 {
        assert!(self.same_shape(other), "dot: shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert!(self.same_shape(other), "max_abs_diff: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// True when every entry above the diagonal is exactly zero.
    pub fn is_lower_triangular(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self[(i, j)] != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Strictly-lower part, zero elsewhere.
    pub fn strict_lower(&self) -> Mat {
        assert!(self.is_square());
        Mat::from_fn(
            self.rows,
            self.cols,
            |i, j| {
                if i > j {
                    self[(i, j)]
                } else {
                    0.0
                }
            },
        )
    }

    /// Diagonal entries.
    pub fn diag(&self) -> Vec<f64> {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).collect()
    }

    /// Lower triangle with the diagonal halved; the masking map used by the
    /// Cholesky backward rule.
    pub fn tril_halved_diag(&self) -> Mat {
        assert!(self.is_square());
        Mat::from_fn(self.rows, self.cols, |i, j| {
            if i > j {
                self[(i, j)]
            } else if i == j {
                0.5 * self[(i, j)]
            } else {
                0.0
            }
        })
    }

    /// Copies `src` into `self` starting at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Mat) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols);
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = src[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        Mat::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations.
    ///
    /// The input is symmetrized first. Eigenvalues come back in descending
    /// order; the columns of `vectors` are the matching eigenvectors.
    pub fn sym_eig(&self) -> Result<SymEig> {
        if !self.is_square() {
            return Err(GeomError::Dimension(format!(
                "sym_eig needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(SymEig {
                values: Vec::new(),
                vectors: Mat::zeros(0, 0),
            });
        }
        let mut a = self.sym();
        let mut v = Mat::identity(n);
        let norm = a.frob_norm().max(f64::MIN_POSITIVE);
        let mut converged = false;
        let mut sweeps = 0;
        let mut prev_off = f64::INFINITY;
        for sweep in 0..JACOBI_MAX_SWEEPS {
            sweeps = sweep + 1;
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            let off = (2.0 * off).sqrt();
            // drive the off-diagonal mass to the rounding floor; stagnation
            // at a still-small residual counts as converged
            if off <= f64::EPSILON * norm || (off >= prev_off && off <= 1e-12 * norm) {
                converged = true;
                break;
            }
            prev_off = off;
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = if theta == 0.0 {
                        1.0
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // A <- G^T A G with G the rotation in the (p, q) plane.
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged {
            return Err(GeomError::Numeric(format!(
                "Jacobi eigensolver did not converge in {sweeps} sweeps (n = {n})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
        let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok(SymEig { values, vectors })
    }

    /// Cholesky factor reading only the lower triangle. `None` if a pivot is
    /// not strictly positive.
    pub fn cholesky_raw(&self) -> Option<Mat> {
        assert!(self.is_square(), "cholesky: non-square");
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // a NaN pivot must also fail
            if !(d > 0.0) {
                return None;
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// Cholesky factor with one regularized retry: if the plain factorization
    /// fails, `1e-10 * trace / n` is added to the diagonal before a second
    /// attempt.
    pub fn cholesky_lower(&self) -> Result<Mat> {
        if let Some(l) = self.cholesky_raw() {
            return Ok(l);
        }
        let n = self.rows.max(1);
        let lambda = 1e-10 * self.trace().abs() / n as f64;
        let mut reg = self.clone();
        for i in 0..self.rows {
            reg[(i, i)] += lambda;
        }
        reg.cholesky_raw().ok_or_else(|| {
            GeomError::Numeric(format!(
                "matrix is not positive definite (Cholesky failed after adding {lambda:e} to the diagonal)"
            ))
        })
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_tri_inverse(&self) -> Result<Mat> {
        assert!(self.is_square());
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            if self[(i, i)] == 0.0 {
                return Err(GeomError::Numeric("singular triangular matrix".to_string()));
            }
        }
        for col in 0..n {
            inv[(col, col)] = 1.0 / self[(col, col)];
            for i in (col + 1)..n {
                let mut s = 0.0;
                for k in col..i {
                    s += self[(i, k)] * inv[(k, col)];
                }
                inv[(i, col)] = -s / self[(i, i)];
            }
        }
        Ok(inv)
    }

    /// General inverse by Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut pivot = col;
            for r in (col + 1)..n {
                if a[(r, col)].abs() > a[(pivot, col)].abs() {
                    pivot = r;
                }
            }
            if a[(pivot, col)].abs() < 1e-300 {
                return Err(GeomError::Numeric("singular matrix".to_string()));
            }
            if pivot != col {
                for j in 0..n {
                    let tmp = a[(col, j)];
                    a[(col, j)] = a[(pivot, j)];
                    a[(pivot, j)] = tmp;
                    let tmp = inv[(col, j)];
                    inv[(col, j)] = inv[(pivot, j)];
                    inv[(pivot, j)] = tmp;
                }
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] -= f * a[(col, j)];
                    inv[(r, j)] -= f * inv[(col, j)];
                }
            }
        }
        Ok(inv)
    }

    /// Spectral matrix function U f(z) U^T of the symmetrized input.
    pub fn matrix_fn(&self, kind: MatrixFnKind) -> Result<Mat> {
        let eig = self.sym_eig()?;
        let vals: Vec<f64> = eig.values.iter().map(|&z| kind.apply(z)).collect();
        let d = Mat::from_diag(&vals);
        Ok(eig.vectors.matmul(&d).matmul(&eig.vectors.t()).sym())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Result of [`Mat::sym_eig`]: eigenvalues descending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

/// Scalar functions lifted to SPD matrices through the eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFnKind {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
    Pow(f64),
}

impl MatrixFnKind {
    fn clamps(self) -> bool {
        !matches!(self, MatrixFnKind::Exp)
    }

    /// f applied to a (possibly clamped) eigenvalue.
    pub fn apply(self, z: f64) -> f64 {
        let z = if self.clamps() && z < EIG_CLAMP {
            diag::note_eig_clamp();
            EIG_CLAMP
        } else {
            z
        };
        match self {
            MatrixFnKind::Log => z.ln(),
            MatrixFnKind::Exp => z.exp(),
            MatrixFnKind::Sqrt => z.sqrt(),
            MatrixFnKind::InvSqrt => 1.0 / z.sqrt(),
            MatrixFnKind::Pow(alpha) => z.powf(alpha),
        }
    }

    /// Derivative of `apply` at z; zero inside the clamped region.
    pub fn derivative(self, z: f64) -> f64 {
        if self.clamps() && z < EIG_CLAMP {
            return 0.0;
        }
        match self {
            MatrixFnKind::Log => 1.0 / z,
            MatrixFnKind::Exp => z.exp(),
            MatrixFnKind::Sqrt => 0.5 / z.sqrt(),
            MatrixFnKind::InvSqrt => -0.5 / (z * z.sqrt()),
            MatrixFnKind::Pow(alpha) => alpha * z.powf(alpha - 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rand_lower_pos, rand_spd, rand_symmetric, SplitMix64};

    fn assert_close(a: &Mat, b: &Mat, tol: f64) {
        let diff = a.max_abs_diff(b);
        assert!(
            diff <= tol,
            "matrices differ by {diff:e} > {tol:e}\n{a:?}\n{b:?}"
        );
    }

    #[test]
    fn eig_identity() {
        let eig = Mat::identity(3).sym_eig().unwrap();
        for v in &eig.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let utu = eig.vectors.t().matmul(&eig.vectors);
        assert_close(&utu, &Mat::identity(3), 1e-12);
    }

    #[test]
    fn eig_diagonal() {
        let eig = Mat::from_diag(&[4.0, 1.0]).sym_eig().unwrap();
        assert!((eig.values[0] - 4.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
        for j in 0..2 {
            let col: Vec<f64> = (0..2).map(|i| eig.vectors[(i, j)].abs()).collect();
            assert!((col.iter().fold(0.0f64, |m, &x| m.max(x)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_two_by_two_hand_case() {
        // Characteristic polynomial of [[2,1],[1,2]]: (2-z)^2 - 1 = 0 -> z = 3, 1,
        // eigenvectors (1,1)/sqrt(2) and (1,-1)/sqrt(2).
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let eig = m.sym_eig().unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
        let s = 1.0 / 2.0f64.sqrt();
        let v0: Vec<f64> = (0..2).map(|i| eig.vectors[(i, 0)]).collect();
        let sign = v0[0].signum();
        assert!((v0[0] - sign * s).abs() < 1e-12 && (v0[1] - sign * s).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstruction_and_orthogonality() {
        let mut rng = SplitMix64::new(7);
        for n in [1usize, 2, 3, 5, 8] {
            for _ in 0..10 {
                let m = rand_symmetric(&mut rng, n, 1.0);
                let eig = m.sym_eig().unwrap();
                let rebuilt = eig
                    .vectors
                    .matmul(&Mat::from_diag(&eig.values))
                    .matmul(&eig.vectors.t());
                let rel = rebuilt.sub(&m).frob_norm() / m.frob_norm().max(1e-12);
                assert!(rel < 1e-8, "reconstruction error {rel:e}");
                let utu = eig.vectors.t().matmul(&eig.vectors);
                assert!(utu.max_abs_diff(&Mat::identity(n)) < 1e-8);
                for w in eig.values.windows(2) {
                    assert!(w[0] >= w[1]);
                }
            }
        }
    }

    #[test]
    fn eig_rejects_non_square() {
        assert!(matches!(
            Mat::zeros(2, 3).sym_eig(),
            Err(GeomError::Dimension(_))
        ));
    }

    #[test]
    fn cholesky_hand_cases() {
        assert_close(
            &Mat::identity(3).cholesky_lower().unwrap(),
            &Mat::identity(3),
            1e-15,
        );
        assert_close(
            &Mat::from_diag(&[4.0, 9.0]).cholesky_lower().unwrap(),
            &Mat::from_diag(&[2.0, 3.0]),
            1e-15,
        );
        // [[4,2],[2,5]] = L L^T with L = [[2,0],[1,2]]; check the product by hand.
        let l = Mat::from_rows(&[&[2.0, 0.0], &[1.0, 2.0]]);
        let m = l.matmul(&l.t());
        assert_close(&m, &Mat::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]), 1e-15);
        assert_close(&m.cholesky_lower().unwrap(), &l, 1e-12);
    }

    #[test]
    fn cholesky_roundtrip_uniqueness() {
        let mut rng = SplitMix64::new(11);
        for n in [1usize, 2, 4, 6] {
            for _ in 0..10 {
                let l = rand_lower_pos(&mut rng, n);
                let m = l.matmul(&l.t());
                let l2 = m.cholesky_lower().unwrap();
                let rel = l2.sub(&l).frob_norm() / l.frob_norm();
                assert!(rel < 1e-9, "cholesky not unique: {rel:e}");
            }
        }
    }

    #[test]
    fn cholesky_reconstruction() {
        let mut rng = SplitMix64::new(13);
        for _ in 0..20 {
            let m = rand_spd(&mut rng, 5, 0.1, 4.0);
            let l = m.cholesky_lower().unwrap();
            let rel = l.matmul(&l.t()).sub(&m).frob_norm() / m.frob_norm();
            assert!(rel < 1e-9);
            for i in 0..5 {
                assert!(l[(i, i)] > 0.0);
            }
        }
    }

    #[test]
    fn cholesky_fails_on_indefinite() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(m.cholesky_lower().is_err());
    }

    #[test]
    fn matrix_fn_hand_cases() {
        let z = Mat::identity(3).matrix_fn(MatrixFnKind::Log).unwrap();
        assert!(z.max_abs() < 1e-12);
        let s = Mat::from_diag(&[4.0, 9.0])
            .matrix_fn(MatrixFnKind::Sqrt)
            .unwrap();
        assert_close(&s, &Mat::from_diag(&[2.0, 3.0]), 1e-12);
    }

    #[test]
    fn matrix_log_matches_eig_composition() {
        // log([[2,1],[1,2]]) = U diag(log 3, log 1) U^T computed independently.
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let s = 1.0 / 2.0f64.sqrt();
        let u = Mat::from_rows(&[&[s, s], &[s, -s]]);
        let expected = u
            .matmul(&Mat::from_diag(&[3.0f64.ln(), 0.0]))
            .matmul(&u.t());
        assert_close(&m.matrix_fn(MatrixFnKind::Log).unwrap(), &expected, 1e-12);
    }

    #[test]
    fn matrix_fn_inversion_properties() {
        let mut rng = SplitMix64::new(17);
        for n in [2usize, 3, 5] {
            for _ in 0..10 {
                let m = rand_spd(&mut rng, n, 0.2, 3.0);
                let log = m.matrix_fn(MatrixFnKind::Log).unwrap();
                let back = log.matrix_fn(MatrixFnKind::Exp).unwrap();
                assert!(back.sub(&m).frob_norm() / m.frob_norm() < 1e-8);
                let sqrt = m.matrix_fn(MatrixFnKind::Sqrt).unwrap();
                assert!(sqrt.matmul(&sqrt).sub(&m).frob_norm() / m.frob_norm() < 1e-8);
                let inv_sqrt = m.matrix_fn(MatrixFnKind::InvSqrt).unwrap();
                let prod = sqrt.matmul(&inv_sqrt);
                assert!(prod.max_abs_diff(&Mat::identity(n)) < 1e-8);
            }
        }
    }

    #[test]
    fn matrix_fn_clamps_instead_of_failing() {
        let m = Mat::from_diag(&[1.0, 0.0]);
        let log = m.matrix_fn(MatrixFnKind::Log).unwrap();
        assert!((log[(1, 1)] - EIG_CLAMP.ln()).abs() < 1e-9);
    }

    #[test]
    fn inverse_matches_identity() {
        let mut rng = SplitMix64::new(23);
        for n in [1usize, 3, 6] {
            let m = rand_spd(&mut rng, n, 0.3, 2.0);
            let inv = m.inverse().unwrap();
            assert!(m.matmul(&inv).max_abs_diff(&Mat::identity(n)) < 1e-10);
        }
    }

    #[test]
    fn lower_tri_inverse_matches_general() {
        let mut rng = SplitMix64::new(29);
        let l = rand_lower_pos(&mut rng, 5);
        let a = l.lower_tri_inverse().unwrap();
        let b = l.inverse().unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
    }
}
