//! Embedding of an n-variate Gaussian into SPD matrices of determinant one,
//! plus the norm-preserving half-vectorization it pairs with.
//!
//! A Gaussian (Sigma, mu) maps to the (n+k) x (n+k) matrix
//!
//! ```text
//! (det Sigma)^(-1/(n+k)) [ Sigma + k mu mu^T   mu(k) ]
//!                        [ mu(k)^T             I_k   ]
//! ```
//!
//! where `mu(k)` repeats the mean in k columns. The determinant factor is
//! evaluated in the log domain from eigenvalues, so ill-conditioned
//! covariances cannot overflow it. The Schur complement of the identity block
//! is the regularized covariance, so the embedding is SPD with determinant
//! exactly one.
//!
//! With `k = 0` the map degrades to the determinant-normalized covariance
//! alone (mean information dropped), which is the covariance-only ablation.

use crate::error::{GeomError, Result};
use crate::mat::{Mat, MatrixFnKind, EIG_CLAMP};
use crate::spd::SpdPoint;

/// Relative weight of the diagonal regularizer applied before embedding.
pub const EMBED_REG: f64 = 1e-5;

/// An n-variate Gaussian given by mean and covariance.
#[derive(Debug, Clone)]
pub struct GaussianParams {
    mean: Vec<f64>,
    covariance: Mat,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, covariance: Mat) -> Result<GaussianParams> {
        if covariance.rows() != mean.len() || covariance.cols() != mean.len() {
            return Err(GeomError::Dimension(format!(
                "covariance {}x{} does not match mean length {}",
                covariance.rows(),
                covariance.cols(),
                mean.len()
            )));
        }
        if !covariance.is_symmetric(1e-9) {
            return Err(GeomError::Validation(
                "covariance is not symmetric".to_string(),
            ));
        }
        if mean.iter().any(|x| !x.is_finite()) || !covariance.is_finite() {
            return Err(GeomError::Validation(
                "Gaussian parameters contain non-finite values".to_string(),
            ));
        }
        Ok(GaussianParams {
            mean,
            covariance: covariance.sym(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Mat {
        &self.covariance
    }
}

/// Replication count `k` and the covariance regularizer weight.
#[derive(Debug, Clone, Copy)]
pub struct GaussianEmbedConfig {
    pub k: usize,
    pub regularizer: f64,
}

impl GaussianEmbedConfig {
    pub fn new(k: usize) -> GaussianEmbedConfig {
        GaussianEmbedConfig {
            k,
            regularizer: EMBED_REG,
        }
    }
}

impl Default for GaussianEmbedConfig {
    fn default() -> Self {
        GaussianEmbedConfig::new(2)
    }
}

/// Length of the half-vectorization of a symmetric n x n matrix.
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Matrix size whose half-vectorization has the given length, if any.
pub fn sym_dim_inverse(len: usize) -> Option<usize> {
    let mut n = 0;
    while sym_dim(n) < len {
        n += 1;
    }
    (sym_dim(n) == len).then_some(n)
}

/// Embed a Gaussian into `Sym+_{n+k}` with determinant one.
pub fn embed_gaussian(g: &GaussianParams, cfg: &GaussianEmbedConfig) -> Result<SpdPoint> {
    let n = g.dim();
    if n == 0 {
        return Err(GeomError::Dimension("empty Gaussian".to_string()));
    }
    let k = cfg.k;
    // regularize toward SPD; always applied so the map stays smooth
    let mut sigma = g.covariance.clone();
    let lambda = cfg.regularizer * sigma.trace() / n as f64;
    for i in 0..n {
        sigma[(i, i)] += lambda;
    }
    // det factor from eigenvalues in the log domain
    let eig = sigma.sym_eig()?;
    let log_det: f64 = eig.values.iter().map(|&z| z.max(EIG_CLAMP).ln()).sum();
    let factor = (-log_det / (n + k) as f64).exp();

    if k == 0 {
        return Ok(SpdPoint::new_unchecked(sigma.scale(factor)));
    }

    let mu = Mat::col(&g.mean);
    let top_left = sigma.add(&mu.matmul(&mu.t()).scale(k as f64));
    let mut out = Mat::zeros(n + k, n + k);
    out.set_block(0, 0, &top_left);
    for c in 0..k {
        for r in 0..n {
            out[(r, n + c)] = g.mean[r];
            out[(n + c, r)] = g.mean[r];
        }
        out[(n + c, n + c)] = 1.0;
    }
    Ok(SpdPoint::new_unchecked(out.scale(factor)))
}

/// Half-vectorization of a symmetric matrix: lower triangle in row-major
/// order, diagonal weight 1, off-diagonal weight sqrt(2); preserves the
/// Frobenius norm. Inputs asymmetric beyond 1e-9 are rejected.
pub fn vec_sym(a: &Mat) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(GeomError::Dimension(format!(
            "vec_sym needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_symmetric(1e-9) {
        return Err(GeomError::Validation(
            "vec_sym input is asymmetric beyond 1e-9".to_string(),
        ));
    }
    let n = a.rows();
    let mut v = Vec::with_capacity(sym_dim(n));
    for i in 0..n {
        for j in 0..=i {
            if i == j {
                v.push(a[(i, i)]);
            } else {
                v.push(2.0f64.sqrt() * a[(i, j)]);
            }
        }
    }
    Ok(v)
}

/// Inverse of [`vec_sym`].
pub fn unvec_sym(v: &[f64]) -> Result<Mat> {
    let n = sym_dim_inverse(v.len())
        .ok_or_else(|| GeomError::Dimension(format!("{} is not a triangular number", v.len())))?;
    let mut out = Mat::zeros(n, n);
    let mut idx = 0;
    let inv = 1.0 / 2.0f64.sqrt();
    for i in 0..n {
        for j in 0..=i {
            if i == j {
                out[(i, i)] = v[idx];
            } else {
                out[(i, j)] = v[idx] * inv;
                out[(j, i)] = v[idx] * inv;
            }
            idx += 1;
        }
    }
    Ok(out)
}

/// `vec_sym(log(p))`: the half-vectorized principal logarithm.
pub fn log_then_vec(p: &SpdPoint) -> Result<Vec<f64>> {
    vec_sym(&p.mat().matrix_fn(MatrixFnKind::Log)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rand_spd, rand_symmetric, SplitMix64};

    fn det_via_eig(m: &Mat) -> f64 {
        m.sym_eig()
            .unwrap()
            .values
            .iter()
            .fold(0.0, |acc, &z| acc + z.ln())
            .exp()
    }

    #[test]
    fn zero_mean_unit_covariance_embeds_near_identity() {
        for k in [0usize, 1, 2, 5] {
            let g = GaussianParams::new(vec![0.0; 3], Mat::identity(3)).unwrap();
            let p = embed_gaussian(&g, &GaussianEmbedConfig::new(k)).unwrap();
            assert_eq!(p.dim(), 3 + k);
            // off only by the smooth 1e-5 regularizer
            assert!(p.mat().max_abs_diff(&Mat::identity(3 + k)) < 1e-4);
        }
    }

    #[test]
    fn hand_forced_two_by_two() {
        let g = GaussianParams::new(vec![1.0], Mat::from_diag(&[1.0])).unwrap();
        let p = embed_gaussian(&g, &GaussianEmbedConfig::new(1)).unwrap();
        let expected = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]);
        assert!(p.mat().max_abs_diff(&expected) < 1e-4);
        assert!((det_via_eig(p.mat()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn random_embedding_block_structure_and_unit_determinant() {
        let mut rng = SplitMix64::new(101);
        for _ in 0..20 {
            let n = 2;
            let k = 2;
            let sigma = rand_spd(&mut rng, n, 0.3, 2.5);
            let mu: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let g = GaussianParams::new(mu.clone(), sigma.clone()).unwrap();
            let p = embed_gaussian(&g, &GaussianEmbedConfig::new(k)).unwrap();
            assert!((det_via_eig(p.mat()) - 1.0).abs() < 1e-6);

            // leading block equals the normalized Sigma_reg + k mu mu^T
            let mut sigma_reg = sigma.clone();
            let lambda = EMBED_REG * sigma.trace() / n as f64;
            for i in 0..n {
                sigma_reg[(i, i)] += lambda;
            }
            let log_det: f64 = sigma_reg
                .sym_eig()
                .unwrap()
                .values
                .iter()
                .map(|&z| z.ln())
                .sum();
            let factor = (-log_det / (n + k) as f64).exp();
            let mu_mat = Mat::col(&mu);
            let expected = sigma_reg
                .add(&mu_mat.matmul(&mu_mat.t()).scale(k as f64))
                .scale(factor);
            assert!(p.mat().block(0, 0, n, n).max_abs_diff(&expected) < 1e-10);
        }
    }

    #[test]
    fn k_one_matches_classical_border_embedding() {
        let mut rng = SplitMix64::new(103);
        let n = 3;
        let sigma = rand_spd(&mut rng, n, 0.5, 2.0);
        let mu: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let g = GaussianParams::new(mu.clone(), sigma.clone()).unwrap();
        let p = embed_gaussian(&g, &GaussianEmbedConfig::new(1)).unwrap();

        // classical one-row border form, built directly
        let mut sigma_reg = sigma.clone();
        let lambda = EMBED_REG * sigma.trace() / n as f64;
        for i in 0..n {
            sigma_reg[(i, i)] += lambda;
        }
        let mu_mat = Mat::col(&mu);
        let mut direct = Mat::zeros(n + 1, n + 1);
        direct.set_block(0, 0, &sigma_reg.add(&mu_mat.matmul(&mu_mat.t())));
        for r in 0..n {
            direct[(r, n)] = mu[r];
            direct[(n, r)] = mu[r];
        }
        direct[(n, n)] = 1.0;
        let log_det: f64 = sigma_reg
            .sym_eig()
            .unwrap()
            .values
            .iter()
            .map(|&z| z.ln())
            .sum();
        let factor = (-log_det / (n + 1) as f64).exp();
        assert!(p.mat().max_abs_diff(&direct.scale(factor)) < 1e-12);
    }

    #[test]
    fn embedding_is_injective_on_separated_inputs() {
        let mut rng = SplitMix64::new(107);
        let cfg = GaussianEmbedConfig::new(2);
        for _ in 0..20 {
            let sigma = rand_spd(&mut rng, 2, 0.5, 2.0);
            let mu: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
            let g1 = GaussianParams::new(mu.clone(), sigma.clone()).unwrap();
            let mut mu2 = mu.clone();
            mu2[0] += 1e-3 + rng.next_f64();
            let g2 = GaussianParams::new(mu2, sigma.clone()).unwrap();
            let p1 = embed_gaussian(&g1, &cfg).unwrap();
            let p2 = embed_gaussian(&g2, &cfg).unwrap();
            assert!(p1.mat().sub(p2.mat()).frob_norm() >= 1e-6);
        }
    }

    #[test]
    fn embed_rejects_non_finite() {
        assert!(GaussianParams::new(vec![f64::NAN], Mat::identity(1)).is_err());
    }

    #[test]
    fn vec_sym_hand_cases() {
        assert_eq!(vec_sym(&Mat::identity(2)).unwrap(), vec![1.0, 0.0, 1.0]);
        let off = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let v = vec_sym(&off).unwrap();
        assert!((v[1] - 2.0f64.sqrt()).abs() < 1e-15);
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        assert!((norm_sq - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vec_sym_preserves_norm_and_inverts() {
        let mut rng = SplitMix64::new(109);
        for _ in 0..20 {
            let a = rand_symmetric(&mut rng, 3, 1.0);
            let v = vec_sym(&a).unwrap();
            let vnorm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((vnorm - a.frob_norm()).abs() < 1e-12);
            assert!(unvec_sym(&v).unwrap().max_abs_diff(&a) < 1e-12);
        }
    }

    #[test]
    fn vec_sym_rejects_asymmetry() {
        let a = Mat::from_rows(&[&[1.0, 0.5], &[0.4, 1.0]]);
        assert!(matches!(vec_sym(&a), Err(GeomError::Validation(_))));
    }

    #[test]
    fn log_then_vec_cases() {
        let id: Vec<f64> = log_then_vec(&SpdPoint::identity(2)).unwrap();
        assert!(id.iter().all(|x| x.abs() < 1e-12));

        let e = std::f64::consts::E;
        let p = SpdPoint::new(Mat::from_diag(&[e, e])).unwrap();
        let v = log_then_vec(&p).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - 1.0).abs() < 1e-12);

        let mut rng = SplitMix64::new(113);
        let q = SpdPoint::new(rand_spd(&mut rng, 3, 0.4, 2.0)).unwrap();
        let v = log_then_vec(&q).unwrap();
        let vnorm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let log_norm = q.mat().matrix_fn(MatrixFnKind::Log).unwrap().frob_norm();
        assert!((vnorm - log_norm).abs() < 1e-12);
    }
}
