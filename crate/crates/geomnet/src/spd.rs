//! The manifold Sym+_n of symmetric positive-definite matrices.
//!
//! The metric family is
//!
//! ```text
//! <A, B>_P = tr(A P^-1 B P^-1) - (1 / beta) tr(A P^-1) tr(B P^-1)
//! ```
//!
//! with the trace correction optional ([`MetricConfig`]); dropping it gives
//! the plain affine-invariant metric. Both members share geodesics, so the
//! exponential map, logarithm and parallel transport below serve either
//! choice:
//!
//! ```text
//! exp_P(A) = P^1/2 exp(P^-1/2 A P^-1/2) P^1/2
//! log_P(Q) = P^1/2 log(P^-1/2 Q P^-1/2) P^1/2
//! T_{Q->P}(A) = E A E^T,   E = (P Q^-1)^1/2
//! ```
//!
//! `E` is evaluated in the symmetric similarity form
//! `P^1/2 (P^-1/2 Q P^-1/2)^-1/2 P^-1/2`, which uses only symmetric
//! eigendecompositions; `E E = P Q^-1` pins the value down.

use crate::error::{GeomError, Result};
use crate::gaussian;
use crate::mat::{Mat, MatrixFnKind};

/// Convergence threshold on the mean tangent for the Fréchet mean.
pub const FRECHET_TOL: f64 = 1e-6;
/// Iteration cap for the Fréchet mean.
pub const FRECHET_MAX_ITERS: usize = 50;
/// Relative weight of the covariance regularizer.
pub const COVARIANCE_REG: f64 = 1e-5;

const SYMMETRY_TOL: f64 = 1e-9;

/// A point of Sym+_n.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdPoint {
    mat: Mat,
}

impl SpdPoint {
    /// Validates symmetry (within 1e-9) and positive-definiteness.
    pub fn new(mat: Mat) -> Result<SpdPoint> {
        if !mat.is_square() {
            return Err(GeomError::Dimension(format!(
                "SPD point must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        if !mat.is_symmetric(SYMMETRY_TOL) {
            return Err(GeomError::Validation(
                "SPD point is not symmetric within 1e-9".to_string(),
            ));
        }
        let sym = mat.sym();
        if sym.cholesky_raw().is_none() {
            return Err(GeomError::Validation(
                "matrix has a non-positive eigenvalue".to_string(),
            ));
        }
        Ok(SpdPoint { mat: sym })
    }

    /// Wraps a matrix that is symmetric positive-definite by construction.
    pub(crate) fn new_unchecked(mat: Mat) -> SpdPoint {
        debug_assert!(mat.is_symmetric(1e-6), "new_unchecked: not symmetric");
        SpdPoint { mat }
    }

    pub fn identity(n: usize) -> SpdPoint {
        SpdPoint {
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

    /// Spectral square root and inverse square root.
    pub fn sqrt_pair(&self) -> Result<(Mat, Mat)> {
        Ok((
            self.mat.matrix_fn(MatrixFnKind::Sqrt)?,
            self.mat.matrix_fn(MatrixFnKind::InvSqrt)?,
        ))
    }
}

/// A tangent vector at a base point: a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymTangent {
    base: SpdPoint,
    vector: Mat,
}

impl SymTangent {
    pub fn new(base: SpdPoint, vector: Mat) -> Result<SymTangent> {
        if vector.rows() != base.dim() || vector.cols() != base.dim() {
            return Err(GeomError::Dimension(format!(
                "tangent shape {}x{} does not match base dimension {}",
                vector.rows(),
                vector.cols(),
                base.dim()
            )));
        }
        if !vector.is_symmetric(SYMMETRY_TOL) {
            return Err(GeomError::Validation(
                "tangent vector is not symmetric within 1e-9".to_string(),
            ));
        }
        Ok(SymTangent {
            base,
            vector: vector.sym(),
        })
    }

    pub fn zero(base: SpdPoint) -> SymTangent {
        let n = base.dim();
        SymTangent {
            base,
            vector: Mat::zeros(n, n),
        }
    }

    pub fn base(&self) -> &SpdPoint {
        &self.base
    }

    pub fn vector(&self) -> &Mat {
        &self.vector
    }

    pub fn scale(&self, f: f64) -> SymTangent {
        SymTangent {
            base: self.base.clone(),
            vector: self.vector.scale(f),
        }
    }
}

/// Choice of metric: plain affine-invariant, or with the trace correction
/// `-(1/beta) tr(A P^-1) tr(B P^-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// The beta in the correction term; ignored without the trace term.
    pub beta_denominator: usize,
    pub use_trace_term: bool,
}

impl MetricConfig {
    /// Plain affine-invariant metric.
    pub fn airm() -> MetricConfig {
        MetricConfig {
            beta_denominator: 1,
            use_trace_term: false,
        }
    }

    /// Trace-corrected metric with denominator `beta` (must be >= the matrix
    /// dimension wherever the metric is evaluated, which keeps the form
    /// positive-definite on the embedded space).
    pub fn trace_corrected(beta: usize) -> Result<MetricConfig> {
        if beta == 0 {
            return Err(GeomError::Validation(
                "trace-corrected metric needs a positive denominator".to_string(),
            ));
        }
        Ok(MetricConfig {
            beta_denominator: beta,
            use_trace_term: true,
        })
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::airm()
    }
}

fn check_same_base(p: &SpdPoint, t: &SymTangent, what: &str) -> Result<()> {
    if t.base().mat() != p.mat() {
        return Err(GeomError::Validation(format!(
            "{what}: tangent is based at a different point"
        )));
    }
    Ok(())
}

/// Metric inner product of two tangents at `p`.
pub fn inner(p: &SpdPoint, a: &SymTangent, b: &SymTangent, cfg: &MetricConfig) -> Result<f64> {
    if a.vector().rows() != p.dim() || b.vector().rows() != p.dim() {
        return Err(GeomError::Dimension(
            "inner: tangent dimensions do not match the base point".to_string(),
        ));
    }
    check_same_base(p, a, "inner")?;
    check_same_base(p, b, "inner")?;
    if cfg.use_trace_term && cfg.beta_denominator < p.dim() {
        return Err(GeomError::Validation(format!(
            "trace-corrected metric denominator {} is below the dimension {}",
            cfg.beta_denominator,
            p.dim()
        )));
    }
    let p_inv = p.mat().inverse()?;
    let ap = a.vector().matmul(&p_inv);
    let bp = b.vector().matmul(&p_inv);
    let mut value = ap.matmul(&bp).trace();
    if cfg.use_trace_term {
        value -= ap.trace() * bp.trace() / cfg.beta_denominator as f64;
    }
    Ok(value)
}

/// Geodesic exponential at `p`.
pub fn exp_map(p: &SpdPoint, a: &SymTangent) -> Result<SpdPoint> {
    check_same_base(p, a, "exp_map")?;
    let (sqrt, inv_sqrt) = p.sqrt_pair()?;
    let inner = inv_sqrt.matmul(a.vector()).matmul(&inv_sqrt);
    let exp = inner.matrix_fn(MatrixFnKind::Exp)?;
    Ok(SpdPoint::new_unchecked(
        sqrt.matmul(&exp).matmul(&sqrt).sym(),
    ))
}

/// Geodesic logarithm: the tangent at `p` pointing to `q`.
pub fn log_map(p: &SpdPoint, q: &SpdPoint) -> Result<SymTangent> {
    if p.dim() != q.dim() {
        return Err(GeomError::Dimension(format!(
            "log_map: dimensions {} and {} differ",
            p.dim(),
            q.dim()
        )));
    }
    let (sqrt, inv_sqrt) = p.sqrt_pair()?;
    let middle = inv_sqrt.matmul(q.mat()).matmul(&inv_sqrt);
    let log = middle.matrix_fn(MatrixFnKind::Log)?;
    SymTangent::new(p.clone(), sqrt.matmul(&log).matmul(&sqrt).sym())
}

/// Geodesic distance induced by the configured metric.
pub fn distance(p: &SpdPoint, q: &SpdPoint, cfg: &MetricConfig) -> Result<f64> {
    let t = log_map(p, q)?;
    let sq = inner(p, &t, &t, cfg)?;
    Ok(sq.max(0.0).sqrt())
}

/// Parallel transport of `a` (based at `q`) along the geodesic to `p`.
///
/// Returns `E a E^T` with `E = (p q^-1)^1/2`.
pub fn parallel_transport(q: &SpdPoint, p: &SpdPoint, a: &SymTangent) -> Result<SymTangent> {
    if q.dim() != p.dim() {
        return Err(GeomError::Dimension(
            "parallel_transport: dimension mismatch".to_string(),
        ));
    }
    check_same_base(q, a, "parallel_transport")?;
    let e = transport_factor(q, p)?;
    SymTangent::new(p.clone(), e.matmul(a.vector()).matmul(&e.t()).sym())
}

/// The similarity factor `E = (p q^-1)^1/2`, computed as
/// `p^1/2 (p^-1/2 q p^-1/2)^-1/2 p^-1/2`.
pub fn transport_factor(q: &SpdPoint, p: &SpdPoint) -> Result<Mat> {
    let (sqrt, inv_sqrt) = p.sqrt_pair()?;
    let middle = inv_sqrt.matmul(q.mat()).matmul(&inv_sqrt);
    let inv_root = middle.matrix_fn(MatrixFnKind::InvSqrt)?;
    Ok(sqrt.matmul(&inv_root).matmul(&inv_sqrt))
}

/// Result of the Fréchet mean iteration.
#[derive(Debug, Clone)]
pub struct FrechetMean {
    pub mean: SpdPoint,
    pub converged: bool,
    pub iterations: usize,
}

/// Fréchet (Karcher) mean by the fixed-point iteration
/// `m <- exp_m(mean_i log_m(P_i))`, started from the arithmetic mean.
///
/// Stops when the Frobenius norm of the mean tangent drops below 1e-6, or
/// after 50 iterations (reported through `converged`). The iteration follows
/// the shared geodesics of the metric family, so `cfg` does not alter it.
pub fn frechet_mean(points: &[SpdPoint], _cfg: &MetricConfig) -> Result<FrechetMean> {
    if points.is_empty() {
        return Err(GeomError::Degenerate(
            "Fréchet mean of an empty set".to_string(),
        ));
    }
    let n = points[0].dim();
    if points.iter().any(|p| p.dim() != n) {
        return Err(GeomError::Dimension(
            "Fréchet mean: points have mixed dimensions".to_string(),
        ));
    }
    let l = points.len() as f64;
    let mut acc = Mat::zeros(n, n);
    for p in points {
        acc = acc.add(p.mat());
    }
    let mut mean = SpdPoint::new_unchecked(acc.scale(1.0 / l));
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..FRECHET_MAX_ITERS {
        let mut tangent_sum = Mat::zeros(n, n);
        for p in points {
            tangent_sum = tangent_sum.add(log_map(&mean, p)?.vector());
        }
        let avg = tangent_sum.scale(1.0 / l);
        if avg.frob_norm() < FRECHET_TOL {
            converged = true;
            break;
        }
        let step = SymTangent::new(mean.clone(), avg)?;
        mean = exp_map(&mean, &step)?;
        iterations += 1;
    }
    if !converged {
        // one final check so a cap-hitting run can still report convergence
        let mut tangent_sum = Mat::zeros(n, n);
        for p in points {
            tangent_sum = tangent_sum.add(log_map(&mean, p)?.vector());
        }
        converged = tangent_sum.scale(1.0 / l).frob_norm() < FRECHET_TOL;
    }
    Ok(FrechetMean {
        mean,
        converged,
        iterations,
    })
}

/// Covariance of the half-vectorized log-map tangents after parallel
/// transport from `mean` to `target`, regularized to stay SPD:
///
/// ```text
/// C = 1/(L-1) sum_i f_v(T(log_mean(P_i))) f_v(...)^T + lambda I
/// lambda = 1e-5 * (1 + tr(C) / dim)
/// ```
///
/// With `target == mean` the transport is the identity, which is exactly the
/// no-transport variant of the statistic.
pub fn transported_covariance(
    points: &[SpdPoint],
    mean: &SpdPoint,
    target: &SpdPoint,
) -> Result<SpdPoint> {
    if points.len() < 2 {
        return Err(GeomError::Degenerate(format!(
            "covariance needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = mean.dim();
    if target.dim() != n || points.iter().any(|p| p.dim() != n) {
        return Err(GeomError::Dimension(
            "transported_covariance: dimension mismatch".to_string(),
        ));
    }
    let transport_is_identity = target.mat() == mean.mat();
    let e = if transport_is_identity {
        None
    } else {
        Some(transport_factor(mean, target)?)
    };
    let dim = n * (n + 1) / 2;
    let mut cov = Mat::zeros(dim, dim);
    for p in points {
        let tangent = log_map(mean, p)?;
        let moved = match &e {
            Some(e) => e.matmul(tangent.vector()).matmul(&e.t()).sym(),
            None => tangent.vector().clone(),
        };
        let v = Mat::col(&gaussian::vec_sym(&moved)?);
        cov = cov.add(&v.matmul(&v.t()));
    }
    cov = cov.scale(1.0 / (points.len() - 1) as f64);
    let lambda = COVARIANCE_REG * (1.0 + cov.trace() / dim as f64);
    for i in 0..dim {
        cov[(i, i)] += lambda;
    }
    Ok(SpdPoint::new_unchecked(cov))
}

/// The regularizer used by [`transported_covariance`], exposed so oracles can
/// subtract it.
pub fn covariance_regularizer(raw_trace: f64, dim: usize) -> f64 {
    COVARIANCE_REG * (1.0 + raw_trace / dim as f64)
}

/// Riemannian gradient on Sym+ from a Euclidean one: `P sym(G) P`.
pub fn riemannian_gradient(p: &SpdPoint, euclidean: &Mat) -> Result<SymTangent> {
    if euclidean.rows() != p.dim() || euclidean.cols() != p.dim() {
        return Err(GeomError::Dimension(
            "riemannian_gradient: shape mismatch".to_string(),
        ));
    }
    let g = euclidean.sym();
    SymTangent::new(p.clone(), p.mat().matmul(&g).matmul(p.mat()).sym())
}
