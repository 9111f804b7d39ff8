//! Cholesky space LT+(n): lower-triangular matrices with positive diagonal,
//! under the metric
//!
//! ```text
//! <U, V>_K = sum_{i>j} U_ij V_ij + sum_j U_jj V_jj K_jj^-2
//! ```
//!
//! The strictly-lower part is flat; the diagonal behaves like n copies of the
//! positive half-line with the log metric. Geodesic operations split the same
//! way:
//!
//! ```text
//! exp_K(U) = low(K) + low(U) + D(K) exp(D(U) D(K)^-1)
//! log_K(H) = low(H) - low(K) + D(K) log(D(K)^-1 D(H))
//! T_{K->H}(U) = low(U) + D(H) D(K)^-1 D(U)
//! ```
//!
//! with `low` the strictly-lower part and `D` the diagonal. The logarithm is
//! the componentwise inverse of the exponential (additive strict-lower part,
//! `K_jj exp(U_jj / K_jj)` on the diagonal).

use crate::error::{GeomError, Result};
use crate::mat::Mat;

/// A point of LT+(n): lower-triangular with strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriPos {
    mat: Mat,
}

impl LowerTriPos {
    /// Validates exact zeros above the diagonal and positive diagonal.
    pub fn new(mat: Mat) -> Result<LowerTriPos> {
        if !mat.is_square() {
            return Err(GeomError::Dimension(format!(
                "LT+ element must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        if !mat.is_lower_triangular() {
            return Err(GeomError::Validation(
                "entries above the diagonal must be exactly zero".to_string(),
            ));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // catches NaN diagonals too
        if (0..mat.rows()).any(|i| !(mat[(i, i)] > 0.0)) {
            return Err(GeomError::Validation(
                "diagonal entries must be strictly positive".to_string(),
            ));
        }
        Ok(LowerTriPos { mat })
    }

    pub(crate) fn new_unchecked(mat: Mat) -> LowerTriPos {
        debug_assert!(mat.is_lower_triangular());
        debug_assert!((0..mat.rows()).all(|i| mat[(i, i)] > 0.0));
        LowerTriPos { mat }
    }

    pub fn identity(n: usize) -> LowerTriPos {
        LowerTriPos {
            mat: Mat::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }
}

/// A tangent at a point of LT+(n): lower-triangular, diagonal unconstrained.
#[derive(Debug, Clone)]
pub struct TriTangent {
    base: LowerTriPos,
    vector: Mat,
}

impl TriTangent {
    pub fn new(base: LowerTriPos, vector: Mat) -> Result<TriTangent> {
        if vector.rows() != base.dim() || vector.cols() != base.dim() {
            return Err(GeomError::Dimension(
                "tangent shape does not match the base point".to_string(),
            ));
        }
        if !vector.is_lower_triangular() {
            return Err(GeomError::Validation(
                "tangent must be lower-triangular with exact zeros above".to_string(),
            ));
        }
        Ok(TriTangent { base, vector })
    }

    pub fn zero(base: LowerTriPos) -> TriTangent {
        let n = base.dim();
        TriTangent {
            base,
            vector: Mat::zeros(n, n),
        }
    }

    pub fn base(&self) -> &LowerTriPos {
        &self.base
    }

    pub fn vector(&self) -> &Mat {
        &self.vector
    }

    pub fn scale(&self, f: f64) -> TriTangent {
        TriTangent {
            base: self.base.clone(),
            vector: self.vector.scale(f),
        }
    }
}

fn check_base(k: &LowerTriPos, t: &TriTangent, what: &str) -> Result<()> {
    if t.base().mat() != k.mat() {
        return Err(GeomError::Validation(format!(
            "{what}: tangent is based at a different point"
        )));
    }
    Ok(())
}

/// Metric inner product at `k`.
pub fn tri_inner(k: &LowerTriPos, u: &TriTangent, v: &TriTangent) -> Result<f64> {
    if u.vector().rows() != k.dim() || v.vector().rows() != k.dim() {
        return Err(GeomError::Dimension(
            "tri_inner: dimension mismatch".to_string(),
        ));
    }
    check_base(k, u, "tri_inner")?;
    check_base(k, v, "tri_inner")?;
    let n = k.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..i {
            acc += u.vector()[(i, j)] * v.vector()[(i, j)];
        }
        let kjj = k.mat()[(i, i)];
        acc += u.vector()[(i, i)] * v.vector()[(i, i)] / (kjj * kjj);
    }
    Ok(acc)
}

/// Geodesic exponential at `k`.
pub fn tri_exp(k: &LowerTriPos, u: &TriTangent) -> Result<LowerTriPos> {
    check_base(k, u, "tri_exp")?;
    let n = k.dim();
    let mut out = k.mat().strict_lower().add(&u.vector().strict_lower());
    for i in 0..n {
        let kii = k.mat()[(i, i)];
        out[(i, i)] = kii * (u.vector()[(i, i)] / kii).exp();
    }
    Ok(LowerTriPos::new_unchecked(out))
}

/// Geodesic logarithm: the tangent at `k` pointing to `h`.
pub fn tri_log(k: &LowerTriPos, h: &LowerTriPos) -> Result<TriTangent> {
    if k.dim() != h.dim() {
        return Err(GeomError::Dimension(
            "tri_log: dimension mismatch".to_string(),
        ));
    }
    let n = k.dim();
    let mut out = h.mat().strict_lower().sub(&k.mat().strict_lower());
    for i in 0..n {
        let kii = k.mat()[(i, i)];
        out[(i, i)] = kii * (h.mat()[(i, i)] / kii).ln();
    }
    TriTangent::new(k.clone(), out)
}

/// Parallel transport of `u` (based at `k`) to the tangent space at `h`.
pub fn tri_transport(k: &LowerTriPos, h: &LowerTriPos, u: &TriTangent) -> Result<TriTangent> {
    if k.dim() != h.dim() {
        return Err(GeomError::Dimension(
            "tri_transport: dimension mismatch".to_string(),
        ));
    }
    check_base(k, u, "tri_transport")?;
    let n = k.dim();
    let mut out = u.vector().strict_lower();
    for i in 0..n {
        out[(i, i)] = h.mat()[(i, i)] / k.mat()[(i, i)] * u.vector()[(i, i)];
    }
    TriTangent::new(h.clone(), out)
}

/// Riemannian gradient on LT+ from a Euclidean one: identity on the strict
/// lower part, `K_jj^2 G_jj` on the diagonal; entries above the diagonal are
/// discarded.
pub fn tri_riemannian_gradient(k: &LowerTriPos, euclidean: &Mat) -> Result<TriTangent> {
    if euclidean.rows() != k.dim() || euclidean.cols() != k.dim() {
        return Err(GeomError::Dimension(
            "tri_riemannian_gradient: shape mismatch".to_string(),
        ));
    }
    let n = k.dim();
    let mut out = euclidean.strict_lower();
    for i in 0..n {
        let kii = k.mat()[(i, i)];
        out[(i, i)] = kii * kii * euclidean[(i, i)];
    }
    TriTangent::new(k.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rand_lower_pos, rand_lower_tangent, SplitMix64};

    fn point(m: Mat) -> LowerTriPos {
        LowerTriPos::new(m).unwrap()
    }

    fn rand_point(rng: &mut SplitMix64, n: usize) -> LowerTriPos {
        point(rand_lower_pos(rng, n))
    }

    fn rand_tan(rng: &mut SplitMix64, base: &LowerTriPos) -> TriTangent {
        TriTangent::new(base.clone(), rand_lower_tangent(rng, base.dim(), 0.7)).unwrap()
    }

    #[test]
    fn validation() {
        assert!(LowerTriPos::new(Mat::from_rows(&[&[1.0, 0.1], &[0.0, 1.0]])).is_err());
        assert!(LowerTriPos::new(Mat::from_diag(&[1.0, -1.0])).is_err());
        assert!(LowerTriPos::new(Mat::from_rows(&[&[1.0, 0.0], &[3.0, 2.0]])).is_ok());
    }

    #[test]
    fn inner_hand_cases() {
        let k = LowerTriPos::identity(3);
        let u = TriTangent::new(k.clone(), Mat::identity(3)).unwrap();
        assert!((tri_inner(&k, &u, &u).unwrap() - 3.0).abs() < 1e-15);

        // strict-lower against diagonal-only: orthogonal components
        let lower = TriTangent::new(
            k.clone(),
            Mat::from_rows(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[2.0, 3.0, 0.0]]),
        )
        .unwrap();
        let diag = TriTangent::new(k.clone(), Mat::from_diag(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(tri_inner(&k, &lower, &diag).unwrap(), 0.0);

        // n = 1 scalar case: 4*4 / 2^2 = 4
        let k1 = point(Mat::from_diag(&[2.0]));
        let u1 = TriTangent::new(k1.clone(), Mat::from_diag(&[4.0])).unwrap();
        assert!((tri_inner(&k1, &u1, &u1).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn exp_hand_cases() {
        let mut rng = SplitMix64::new(127);
        let k = rand_point(&mut rng, 4);
        let out = tri_exp(&k, &TriTangent::zero(k.clone())).unwrap();
        assert!(out.mat().max_abs_diff(k.mat()) < 1e-15);

        let id = LowerTriPos::identity(2);
        let u = TriTangent::new(id.clone(), Mat::from_diag(&[0.3, -0.7])).unwrap();
        let out = tri_exp(&id, &u).unwrap();
        assert!((out.mat()[(0, 0)] - 0.3f64.exp()).abs() < 1e-15);
        assert!((out.mat()[(1, 1)] - (-0.7f64).exp()).abs() < 1e-15);

        // strict-lower additivity
        let k = point(Mat::from_rows(&[&[1.0, 0.0], &[3.0, 2.0]]));
        let u = TriTangent::new(k.clone(), Mat::from_rows(&[&[0.0, 0.0], &[5.0, 0.0]])).unwrap();
        let out = tri_exp(&k, &u).unwrap();
        assert!(
            out.mat()
                .max_abs_diff(&Mat::from_rows(&[&[1.0, 0.0], &[8.0, 2.0]]))
                < 1e-15
        );
    }

    #[test]
    fn log_hand_cases_and_roundtrip() {
        let mut rng = SplitMix64::new(131);
        let k = rand_point(&mut rng, 3);
        assert!(tri_log(&k, &k).unwrap().vector().max_abs() < 1e-15);

        let id = LowerTriPos::identity(2);
        let h = point(Mat::from_diag(&[std::f64::consts::E, std::f64::consts::E]));
        let t = tri_log(&id, &h).unwrap();
        assert!(t.vector().max_abs_diff(&Mat::identity(2)) < 1e-14);

        for n in [1usize, 2, 4, 6] {
            for _ in 0..10 {
                let k = rand_point(&mut rng, n);
                let h = rand_point(&mut rng, n);
                let u = tri_log(&k, &h).unwrap();
                let back = tri_exp(&k, &u).unwrap();
                assert!(back.mat().max_abs_diff(h.mat()) < 1e-10);

                let v = rand_tan(&mut rng, &k);
                let fwd = tri_exp(&k, &v).unwrap();
                let rec = tri_log(&k, &fwd).unwrap();
                assert!(rec.vector().max_abs_diff(v.vector()) < 1e-10);
            }
        }
    }

    #[test]
    fn exp_outputs_satisfy_invariants() {
        let mut rng = SplitMix64::new(137);
        for _ in 0..30 {
            let k = rand_point(&mut rng, 5);
            let u = rand_tan(&mut rng, &k).scale(3.0);
            let out = tri_exp(&k, &u).unwrap();
            assert!(out.mat().is_lower_triangular());
            for i in 0..5 {
                assert!(out.mat()[(i, i)] > 0.0);
            }
        }
    }

    #[test]
    fn transport_cases() {
        let mut rng = SplitMix64::new(139);
        let k = rand_point(&mut rng, 3);
        let u = rand_tan(&mut rng, &k);
        let same = tri_transport(&k, &k, &u).unwrap();
        assert!(same.vector().max_abs_diff(u.vector()) < 1e-15);

        let h = rand_point(&mut rng, 3);
        let moved = tri_transport(&k, &h, &u).unwrap();
        assert!(
            moved
                .vector()
                .strict_lower()
                .max_abs_diff(&u.vector().strict_lower())
                < 1e-15
        );
    }

    #[test]
    fn transport_is_isometric() {
        let mut rng = SplitMix64::new(149);
        for _ in 0..20 {
            let k = rand_point(&mut rng, 4);
            let h = rand_point(&mut rng, 4);
            let u = rand_tan(&mut rng, &k);
            let v = rand_tan(&mut rng, &k);
            let before = tri_inner(&k, &u, &v).unwrap();
            let tu = tri_transport(&k, &h, &u).unwrap();
            let tv = tri_transport(&k, &h, &v).unwrap();
            let after = tri_inner(&h, &tu, &tv).unwrap();
            assert!((before - after).abs() < 1e-10);
        }
    }

    #[test]
    fn transport_composes() {
        let mut rng = SplitMix64::new(151);
        for _ in 0..10 {
            let j = rand_point(&mut rng, 3);
            let k = rand_point(&mut rng, 3);
            let h = rand_point(&mut rng, 3);
            let u = rand_tan(&mut rng, &j);
            let via_k = tri_transport(&k, &h, &tri_transport(&j, &k, &u).unwrap()).unwrap();
            let direct = tri_transport(&j, &h, &u).unwrap();
            assert!(via_k.vector().max_abs_diff(direct.vector()) < 1e-10);
        }
    }

    #[test]
    fn riemannian_gradient_conversion() {
        let mut rng = SplitMix64::new(157);
        let k = rand_point(&mut rng, 3);
        let g = crate::rng::rand_matrix(&mut rng, 3, 3);
        let rg = tri_riemannian_gradient(&k, &g).unwrap();
        // pairing with an arbitrary tangent reproduces the Euclidean pairing
        let v = rand_tan(&mut rng, &k);
        let lhs = tri_inner(&k, &rg, &v).unwrap();
        let mut rhs = 0.0;
        for i in 0..3 {
            for j in 0..=i {
                rhs += g[(i, j)] * v.vector()[(i, j)];
            }
        }
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
