//! Riemannian Gaussians as a matrix group.
//!
//! A Riemannian Gaussian is a pair `(P^m, P^c)`: a Fréchet mean on
//! `Sym+_{n_s}` and the covariance of its half-vectorized tangents, a point
//! of `Sym+_{n'}` with `n' = n_s (n_s + 1) / 2`. Writing `L_i` for the
//! Cholesky factor of the covariance and `varphi` for the k'-row replication
//! of the half-vectorized matrix logarithm, the pairs form a group under
//!
//! ```text
//! (P1, C1) * (P2, C2) =
//!     (varphi^-1(varphi(P1) L2 + varphi(P2)), (L1 L2)(L1 L2)^T)
//! ```
//!
//! which is isomorphic to the group of block matrices
//!
//! ```text
//! [ H            0     ]
//! [ varphi(P^m)  I_k'  ]
//! ```
//!
//! with `H` in LT+(n'). Those blocks are themselves lower-triangular with
//! positive diagonal, so a [`GroupElement`] can flow into triangular layers
//! unchanged. [`iso_check`] measures the homomorphism defect numerically.

use crate::cholesky_space::LowerTriPos;
use crate::error::{GeomError, Result};
use crate::gaussian::{log_then_vec, sym_dim, unvec_sym};
use crate::mat::{Mat, MatrixFnKind};
use crate::spd::SpdPoint;

/// A (mean, covariance) pair on the product manifold.
#[derive(Debug, Clone)]
pub struct RiemannianGaussian {
    mean: SpdPoint,
    covariance: SpdPoint,
}

impl RiemannianGaussian {
    /// The covariance dimension must be `n_s (n_s + 1) / 2` for the mean
    /// dimension `n_s`.
    pub fn new(mean: SpdPoint, covariance: SpdPoint) -> Result<RiemannianGaussian> {
        if covariance.dim() != sym_dim(mean.dim()) {
            return Err(GeomError::Dimension(format!(
                "covariance dimension {} does not match sym_dim({}) = {}",
                covariance.dim(),
                mean.dim(),
                sym_dim(mean.dim())
            )));
        }
        Ok(RiemannianGaussian { mean, covariance })
    }

    pub fn mean(&self) -> &SpdPoint {
        &self.mean
    }

    pub fn covariance(&self) -> &SpdPoint {
        &self.covariance
    }

    pub fn mean_dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn cov_dim(&self) -> usize {
        self.covariance.dim()
    }
}

/// Row-replication count k' of the varphi map.
#[derive(Debug, Clone, Copy)]
pub struct StatsEmbedConfig {
    pub k_prime: usize,
}

impl StatsEmbedConfig {
    pub fn new(k_prime: usize) -> StatsEmbedConfig {
        StatsEmbedConfig { k_prime }
    }
}

/// `varphi(p)`: k' identical rows, each the half-vectorized logarithm of `p`.
///
/// With `k' = 0` this is the empty 0 x n' matrix.
pub fn varphi(p: &SpdPoint, cfg: &StatsEmbedConfig) -> Result<Mat> {
    let row = log_then_vec(p)?;
    Ok(Mat::from_fn(cfg.k_prime, row.len(), |_, j| row[j]))
}

/// Inverse of [`varphi`] on its image: un-vectorize the first row and take
/// the matrix exponential. Needs at least one row.
pub fn varphi_inverse(rows: &Mat) -> Result<SpdPoint> {
    if rows.rows() == 0 {
        return Err(GeomError::Dimension(
            "varphi_inverse needs at least one row (k' >= 1)".to_string(),
        ));
    }
    let first: Vec<f64> = (0..rows.cols()).map(|j| rows[(0, j)]).collect();
    let sym = unvec_sym(&first)?;
    Ok(SpdPoint::new_unchecked(sym.matrix_fn(MatrixFnKind::Exp)?))
}

/// Identity element of the group: `(I_{n_s}, I_{n'})`.
pub fn star_identity(n_s: usize) -> RiemannianGaussian {
    RiemannianGaussian {
        mean: SpdPoint::identity(n_s),
        covariance: SpdPoint::identity(sym_dim(n_s)),
    }
}

/// The group product. Requires `k' >= 1` (with `k' = 0` the mean component
/// has no representation).
pub fn star_product(
    x: &RiemannianGaussian,
    y: &RiemannianGaussian,
    cfg: &StatsEmbedConfig,
) -> Result<RiemannianGaussian> {
    if cfg.k_prime == 0 {
        return Err(GeomError::Validation(
            "star_product needs k' >= 1".to_string(),
        ));
    }
    if x.mean_dim() != y.mean_dim() {
        return Err(GeomError::Dimension(
            "star_product: mean dimensions differ".to_string(),
        ));
    }
    let l2 = y.covariance.mat().cholesky_lower()?;
    let phi1 = varphi(&x.mean, &StatsEmbedConfig::new(1))?;
    let phi2 = varphi(&y.mean, &StatsEmbedConfig::new(1))?;
    let mean_rows = phi1.matmul(&l2).add(&phi2);
    let mean = varphi_inverse(&mean_rows)?;

    let l1 = x.covariance.mat().cholesky_lower()?;
    let l12 = l1.matmul(&l2);
    let covariance = SpdPoint::new_unchecked(l12.matmul(&l12.t()).sym());
    RiemannianGaussian::new(mean, covariance)
}

/// Group inverse: `(varphi^-1(-varphi(P) L^-1), (L^-1)(L^-1)^T)`.
pub fn star_inverse(x: &RiemannianGaussian, cfg: &StatsEmbedConfig) -> Result<RiemannianGaussian> {
    if cfg.k_prime == 0 {
        return Err(GeomError::Validation(
            "star_inverse needs k' >= 1".to_string(),
        ));
    }
    let l = x.covariance.mat().cholesky_lower()?;
    let l_inv = l.lower_tri_inverse()?;
    let phi = varphi(&x.mean, &StatsEmbedConfig::new(1))?;
    let mean = varphi_inverse(&phi.matmul(&l_inv).neg())?;
    let covariance = SpdPoint::new_unchecked(l_inv.matmul(&l_inv.t()).sym());
    RiemannianGaussian::new(mean, covariance)
}

/// A block matrix `[[H, 0], [varphi(P^m), I_k']]`; lower-triangular with
/// positive diagonal as a whole.
#[derive(Debug, Clone)]
pub struct GroupElement {
    n_prime: usize,
    k_prime: usize,
    matrix: Mat,
}

impl GroupElement {
    /// Validates the block structure: zero upper-right block, identity
    /// lower-right block, H in LT+, and k' identical varphi rows.
    pub fn new(matrix: Mat, n_prime: usize, k_prime: usize) -> Result<GroupElement> {
        let g = n_prime + k_prime;
        if matrix.rows() != g || matrix.cols() != g {
            return Err(GeomError::Dimension(format!(
                "group element must be {g}x{g}, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let h = matrix.block(0, 0, n_prime, n_prime);
        LowerTriPos::new(h)?;
        for i in 0..n_prime {
            for j in n_prime..g {
                if matrix[(i, j)] != 0.0 {
                    return Err(GeomError::Validation(
                        "upper-right block must be zero".to_string(),
                    ));
                }
            }
        }
        for i in 0..k_prime {
            for j in 0..k_prime {
                let expected = if i == j { 1.0 } else { 0.0 };
                if matrix[(n_prime + i, n_prime + j)] != expected {
                    return Err(GeomError::Validation(
                        "lower-right block must be the identity".to_string(),
                    ));
                }
            }
        }
        for i in 1..k_prime {
            for j in 0..n_prime {
                if (matrix[(n_prime + i, j)] - matrix[(n_prime, j)]).abs() > 1e-12 {
                    return Err(GeomError::Validation(
                        "varphi block rows must be identical".to_string(),
                    ));
                }
            }
        }
        Ok(GroupElement {
            n_prime,
            k_prime,
            matrix,
        })
    }

    pub fn from_blocks(h: &LowerTriPos, phi: &Mat) -> Result<GroupElement> {
        let n_prime = h.dim();
        let k_prime = phi.rows();
        if phi.cols() != n_prime {
            return Err(GeomError::Dimension(
                "varphi block width must match H".to_string(),
            ));
        }
        let g = n_prime + k_prime;
        let mut matrix = Mat::zeros(g, g);
        matrix.set_block(0, 0, h.mat());
        matrix.set_block(n_prime, 0, phi);
        for i in 0..k_prime {
            matrix[(n_prime + i, n_prime + i)] = 1.0;
        }
        GroupElement::new(matrix, n_prime, k_prime)
    }

    pub fn identity(n_prime: usize, k_prime: usize) -> GroupElement {
        GroupElement {
            n_prime,
            k_prime,
            matrix: Mat::identity(n_prime + k_prime),
        }
    }

    pub fn n_prime(&self) -> usize {
        self.n_prime
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn h_block(&self) -> LowerTriPos {
        LowerTriPos::new_unchecked(self.matrix.block(0, 0, self.n_prime, self.n_prime))
    }

    pub fn phi_block(&self) -> Mat {
        self.matrix
            .block(self.n_prime, 0, self.k_prime, self.n_prime)
    }

    /// Matrix product of two group elements; the set is closed under it.
    pub fn multiply(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.n_prime != other.n_prime || self.k_prime != other.k_prime {
            return Err(GeomError::Dimension(
                "group elements of different shape".to_string(),
            ));
        }
        GroupElement::new(
            self.matrix.matmul(&other.matrix),
            self.n_prime,
            self.k_prime,
        )
    }

    /// The whole block matrix is itself in LT+(n' + k').
    pub fn to_lower_tri_pos(&self) -> LowerTriPos {
        LowerTriPos::new_unchecked(self.matrix.clone())
    }
}

/// Embedding matrix of a Riemannian Gaussian: `[[L, 0], [varphi(P^m), I]]`
/// with `L` the Cholesky factor of the covariance. With `k' = 0` this is the
/// bare factor `L`.
pub fn to_group_element(x: &RiemannianGaussian, cfg: &StatsEmbedConfig) -> Result<GroupElement> {
    let l = LowerTriPos::new_unchecked(x.covariance.mat().cholesky_lower()?);
    let phi = varphi(&x.mean, cfg)?;
    GroupElement::from_blocks(&l, &phi)
}

/// Map a group element back to its Riemannian Gaussian: mean from the varphi
/// block (needs `k' >= 1`), covariance `H H^T`.
pub fn group_to_stats(k: &GroupElement) -> Result<RiemannianGaussian> {
    let mean = varphi_inverse(&k.phi_block())?;
    let h = k.h_block();
    let covariance = SpdPoint::new_unchecked(h.mat().matmul(&h.mat().t()).sym());
    RiemannianGaussian::new(mean, covariance)
}

/// Homomorphism defect: the largest Frobenius deviation between mapping the
/// matrix product of `k1` and `k2` and star-multiplying their images.
pub fn iso_check(k1: &GroupElement, k2: &GroupElement, cfg: &StatsEmbedConfig) -> Result<f64> {
    let product = k1.multiply(k2)?;
    let via_matrix = group_to_stats(&product)?;
    let via_star = star_product(&group_to_stats(k1)?, &group_to_stats(k2)?, cfg)?;
    let mean_dev = via_matrix
        .mean()
        .mat()
        .sub(via_star.mean().mat())
        .frob_norm();
    let cov_dev = via_matrix
        .covariance()
        .mat()
        .sub(via_star.covariance().mat())
        .frob_norm();
    Ok(mean_dev.max(cov_dev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rand_spd, SplitMix64};

    fn rand_gaussian(rng: &mut SplitMix64, n_s: usize) -> RiemannianGaussian {
        let mean = SpdPoint::new(rand_spd(rng, n_s, 0.5, 2.0)).unwrap();
        let cov = SpdPoint::new(rand_spd(rng, sym_dim(n_s), 0.5, 2.0)).unwrap();
        RiemannianGaussian::new(mean, cov).unwrap()
    }

    #[test]
    fn dimension_validation() {
        let mean = SpdPoint::identity(3);
        assert!(RiemannianGaussian::new(mean.clone(), SpdPoint::identity(5)).is_err());
        assert!(RiemannianGaussian::new(mean, SpdPoint::identity(6)).is_ok());
    }

    #[test]
    fn varphi_cases() {
        let cfg = StatsEmbedConfig::new(3);
        let phi = varphi(&SpdPoint::identity(2), &cfg).unwrap();
        assert_eq!((phi.rows(), phi.cols()), (3, 3));
        assert!(phi.max_abs() < 1e-12);

        let empty = varphi(&SpdPoint::identity(2), &StatsEmbedConfig::new(0)).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 3));

        let mut rng = SplitMix64::new(163);
        for _ in 0..10 {
            let p = SpdPoint::new(rand_spd(&mut rng, 3, 0.4, 2.5)).unwrap();
            let phi = varphi(&p, &StatsEmbedConfig::new(2)).unwrap();
            let back = varphi_inverse(&phi).unwrap();
            let rel = back.mat().sub(p.mat()).frob_norm() / p.mat().frob_norm();
            assert!(rel < 1e-8, "varphi round trip failed: {rel:e}");
        }
    }

    #[test]
    fn star_identity_element() {
        let mut rng = SplitMix64::new(167);
        let cfg = StatsEmbedConfig::new(2);
        let e = star_identity(3);
        let x = rand_gaussian(&mut rng, 3);
        for prod in [
            star_product(&e, &x, &cfg).unwrap(),
            star_product(&x, &e, &cfg).unwrap(),
        ] {
            assert!(prod.mean().mat().max_abs_diff(x.mean().mat()) < 1e-8);
            assert!(prod.covariance().mat().max_abs_diff(x.covariance().mat()) < 1e-8);
        }
    }

    #[test]
    fn star_is_associative() {
        let mut rng = SplitMix64::new(173);
        let cfg = StatsEmbedConfig::new(1);
        for _ in 0..10 {
            let x = rand_gaussian(&mut rng, 3);
            let y = rand_gaussian(&mut rng, 3);
            let z = rand_gaussian(&mut rng, 3);
            let left = star_product(&star_product(&x, &y, &cfg).unwrap(), &z, &cfg).unwrap();
            let right = star_product(&x, &star_product(&y, &z, &cfg).unwrap(), &cfg).unwrap();
            assert!(left.mean().mat().max_abs_diff(right.mean().mat()) < 1e-8);
            assert!(
                left.covariance()
                    .mat()
                    .max_abs_diff(right.covariance().mat())
                    < 1e-8
            );
        }
    }

    #[test]
    fn star_inverse_cancels() {
        let mut rng = SplitMix64::new(179);
        let cfg = StatsEmbedConfig::new(2);
        for _ in 0..10 {
            let x = rand_gaussian(&mut rng, 3);
            let inv = star_inverse(&x, &cfg).unwrap();
            let prod = star_product(&x, &inv, &cfg).unwrap();
            assert!(prod.mean().mat().max_abs_diff(&Mat::identity(3)) < 1e-8);
            assert!(prod.covariance().mat().max_abs_diff(&Mat::identity(6)) < 1e-8);
        }
    }

    #[test]
    fn star_rejects_k_prime_zero() {
        let mut rng = SplitMix64::new(181);
        let x = rand_gaussian(&mut rng, 2);
        assert!(star_product(&x, &x, &StatsEmbedConfig::new(0)).is_err());
    }

    #[test]
    fn group_element_identity_and_block_roundtrip() {
        let cfg = StatsEmbedConfig::new(2);
        let e = to_group_element(&star_identity(2), &cfg).unwrap();
        assert!(e.matrix().max_abs_diff(&Mat::identity(3 + 2)) < 1e-12);

        let mut rng = SplitMix64::new(191);
        for _ in 0..10 {
            let x = rand_gaussian(&mut rng, 3);
            let k = to_group_element(&x, &cfg).unwrap();
            let back = group_to_stats(&k).unwrap();
            let mean_rel =
                back.mean().mat().sub(x.mean().mat()).frob_norm() / x.mean().mat().frob_norm();
            let cov_rel = back
                .covariance()
                .mat()
                .sub(x.covariance().mat())
                .frob_norm()
                / x.covariance().mat().frob_norm();
            assert!(mean_rel < 1e-8 && cov_rel < 1e-8);
        }
    }

    #[test]
    fn group_element_k_prime_zero_is_bare_cholesky() {
        let mut rng = SplitMix64::new(193);
        let x = rand_gaussian(&mut rng, 2);
        let k = to_group_element(&x, &StatsEmbedConfig::new(0)).unwrap();
        let l = x.covariance().mat().cholesky_lower().unwrap();
        assert!(k.matrix().max_abs_diff(&l) < 1e-12);
        assert_eq!(k.k_prime(), 0);
    }

    #[test]
    fn group_element_is_lower_triangular_positive() {
        let mut rng = SplitMix64::new(197);
        let cfg = StatsEmbedConfig::new(3);
        let x = rand_gaussian(&mut rng, 3);
        let k = to_group_element(&x, &cfg).unwrap();
        let lt = k.to_lower_tri_pos();
        assert!(lt.mat().is_lower_triangular());
        for i in 0..lt.dim() {
            assert!(lt.mat()[(i, i)] > 0.0);
        }
    }

    #[test]
    fn closure_of_varphi_rows_under_multiplication() {
        let mut rng = SplitMix64::new(199);
        let cfg = StatsEmbedConfig::new(3);
        let a = to_group_element(&rand_gaussian(&mut rng, 3), &cfg).unwrap();
        let b = to_group_element(&rand_gaussian(&mut rng, 3), &cfg).unwrap();
        // multiply() re-validates the block structure, including identical rows
        let prod = a.multiply(&b).unwrap();
        assert_eq!(prod.k_prime(), 3);
    }

    #[test]
    fn homomorphism_holds_numerically() {
        let mut rng = SplitMix64::new(211);
        for (n_s, k_prime) in [(3usize, 1usize), (3, 3), (4, 2)] {
            let cfg = StatsEmbedConfig::new(k_prime);
            let e = GroupElement::identity(sym_dim(n_s), k_prime);
            assert!(iso_check(&e, &e, &cfg).unwrap() < 1e-12);
            for _ in 0..10 {
                let k1 = to_group_element(&rand_gaussian(&mut rng, n_s), &cfg).unwrap();
                let k2 = to_group_element(&rand_gaussian(&mut rng, n_s), &cfg).unwrap();
                let dev = iso_check(&k1, &k2, &cfg).unwrap();
                assert!(
                    dev < 1e-8,
                    "homomorphism defect {dev:e} at ({n_s}, {k_prime})"
                );
            }
        }
    }
}
