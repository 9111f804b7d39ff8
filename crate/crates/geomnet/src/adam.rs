//! Adam over a heterogeneous parameter set: Euclidean tensors, SPD points,
//! and Cholesky-space points.
//!
//! The manifold update at step t is
//!
//! ```text
//! m_t = b1 tau_{t-1} + (1 - b1) g_t
//! v_t = b2 v_{t-1} + (1 - b2) |g_t|^2_{x_t}
//! x_{t+1} = exp_{x_t}(-alpha m_hat / (sqrt(v_hat) + eps))
//! tau_t = T_{x_t -> x_{t+1}}(m_t)
//! ```
//!
//! with bias corrections `m_hat = m_t / (1 - b1^t)`, `v_hat = v_t / (1 - b2^t)`
//! and `|.|_{x}` the Riemannian norm of the parameter's manifold, so the
//! adaptivity term is a scalar per constrained parameter. Gradients arriving
//! here are Riemannian gradients (tangent vectors); converting from Euclidean
//! ones is the caller's job ([`crate::spd::riemannian_gradient`],
//! [`crate::cholesky_space::tri_riemannian_gradient`]).
//!
//! Euclidean parameters use classical per-entry Adam, which the same update
//! degenerates to (exp is addition, transport is the identity) except that
//! `v_t` is kept per entry to match standard practice.

use std::collections::BTreeMap;

use crate::cholesky_space::{self, LowerTriPos, TriTangent};
use crate::diag;
use crate::error::{GeomError, Result};
use crate::mat::Mat;
use crate::spd::{self, MetricConfig, SpdPoint, SymTangent};

/// Constants of the update rule.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.epsilon > 0.0) {
            return Err(GeomError::Config(
                "Adam alpha and epsilon must be positive".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(GeomError::Config(
                "Adam betas must lie in [0, 1)".to_string(),
            ));
        }
        Ok(())
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            epsilon: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

/// Where a parameter lives.
#[derive(Debug, Clone)]
pub enum ParamValue {
    Euclidean(Mat),
    Spd(SpdPoint),
    LowerTri(LowerTriPos),
}

impl ParamValue {
    fn shape(&self) -> (usize, usize) {
        match self {
            ParamValue::Euclidean(m) => (m.rows(), m.cols()),
            ParamValue::Spd(p) => (p.dim(), p.dim()),
            ParamValue::LowerTri(l) => (l.dim(), l.dim()),
        }
    }
}

#[derive(Debug, Clone)]
enum SecondMoment {
    Scalar(f64),
    PerEntry(Mat),
}

/// One optimizable parameter with its Adam state.
#[derive(Debug, Clone)]
pub struct ManifoldParam {
    value: ParamValue,
    /// Momentum, parallel-transported to the tangent space at `value`.
    momentum: Mat,
    second: SecondMoment,
    t: u64,
    /// Per-parameter multiplier on the configured alpha.
    pub lr_scale: f64,
}

impl ManifoldParam {
    pub fn euclidean(m: Mat) -> ManifoldParam {
        let momentum = Mat::zeros(m.rows(), m.cols());
        let second = SecondMoment::PerEntry(Mat::zeros(m.rows(), m.cols()));
        ManifoldParam {
            value: ParamValue::Euclidean(m),
            momentum,
            second,
            t: 0,
            lr_scale: 1.0,
        }
    }

    pub fn spd(p: SpdPoint) -> ManifoldParam {
        let n = p.dim();
        ManifoldParam {
            value: ParamValue::Spd(p),
            momentum: Mat::zeros(n, n),
            second: SecondMoment::Scalar(0.0),
            t: 0,
            lr_scale: 1.0,
        }
    }

    pub fn lower_tri(l: LowerTriPos) -> ManifoldParam {
        let n = l.dim();
        ManifoldParam {
            value: ParamValue::LowerTri(l),
            momentum: Mat::zeros(n, n),
            second: SecondMoment::Scalar(0.0),
            t: 0,
            lr_scale: 1.0,
        }
    }

    pub fn with_lr_scale(mut self, scale: f64) -> ManifoldParam {
        self.lr_scale = scale;
        self
    }

    pub fn value(&self) -> &ParamValue {
        &self.value
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Momentum tangent at the current value.
    pub fn momentum(&self) -> &Mat {
        &self.momentum
    }

    pub fn as_euclidean(&self) -> Option<&Mat> {
        match &self.value {
            ParamValue::Euclidean(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_spd(&self) -> Option<&SpdPoint> {
        match &self.value {
            ParamValue::Spd(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_lower_tri(&self) -> Option<&LowerTriPos> {
        match &self.value {
            ParamValue::LowerTri(l) => Some(l),
            _ => None,
        }
    }
}

/// One Adam update with an explicit rate. `grad` is the Riemannian gradient
/// at the current value: symmetric for SPD, lower-triangular for LT+, dense
/// for Euclidean. Non-finite gradients skip the step with a warning counter.
pub fn step_with_rate(
    param: &mut ManifoldParam,
    grad: &Mat,
    rate: f64,
    cfg: &AdamConfig,
    metric: &MetricConfig,
) -> Result<()> {
    let (rows, cols) = param.value.shape();
    if grad.rows() != rows || grad.cols() != cols {
        return Err(GeomError::Dimension(format!(
            "gradient shape {}x{} does not match parameter {}x{}",
            grad.rows(),
            grad.cols(),
            rows,
            cols
        )));
    }
    if !grad.is_finite() {
        diag::note_skipped_step();
        return Ok(());
    }
    param.t += 1;
    let t = param.t;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);

    match &mut param.value {
        ParamValue::Euclidean(x) => {
            param.momentum = param
                .momentum
                .scale(cfg.beta1)
                .add(&grad.scale(1.0 - cfg.beta1));
            let SecondMoment::PerEntry(v) = &mut param.second else {
                unreachable!("euclidean parameters keep per-entry second moments");
            };
            let mut new_v = v.scale(cfg.beta2);
            for i in 0..rows {
                for j in 0..cols {
                    new_v[(i, j)] += (1.0 - cfg.beta2) * grad[(i, j)] * grad[(i, j)];
                }
            }
            *v = new_v;
            let mut out = x.clone();
            for i in 0..rows {
                for j in 0..cols {
                    let m_hat = param.momentum[(i, j)] / bc1;
                    let v_hat = v[(i, j)] / bc2;
                    out[(i, j)] -= rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                }
            }
            *x = out;
        }
        ParamValue::Spd(x) => {
            let g = SymTangent::new(x.clone(), grad.sym())?;
            let m_t = param
                .momentum
                .scale(cfg.beta1)
                .add(&g.vector().scale(1.0 - cfg.beta1));
            let SecondMoment::Scalar(v) = &mut param.second else {
                unreachable!("manifold parameters keep scalar second moments");
            };
            let g_norm_sq = spd::inner(x, &g, &g, metric)?.max(0.0);
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g_norm_sq;
            let v_hat = *v / bc2;
            let step_vec = m_t.scale(-rate / (bc1 * (v_hat.sqrt() + cfg.epsilon)));
            let step_tan = SymTangent::new(x.clone(), step_vec)?;
            let new_x = spd::exp_map(x, &step_tan)?;
            let transported =
                spd::parallel_transport(x, &new_x, &SymTangent::new(x.clone(), m_t)?)?;
            param.momentum = transported.vector().clone();
            *x = new_x;
        }
        ParamValue::LowerTri(x) => {
            let g = TriTangent::new(x.clone(), grad.clone())?;
            let m_t = param
                .momentum
                .scale(cfg.beta1)
                .add(&g.vector().scale(1.0 - cfg.beta1));
            let SecondMoment::Scalar(v) = &mut param.second else {
                unreachable!("manifold parameters keep scalar second moments");
            };
            let g_norm_sq = cholesky_space::tri_inner(x, &g, &g)?.max(0.0);
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g_norm_sq;
            let v_hat = *v / bc2;
            let step_vec = m_t.scale(-rate / (bc1 * (v_hat.sqrt() + cfg.epsilon)));
            let step_tan = TriTangent::new(x.clone(), step_vec)?;
            let new_x = cholesky_space::tri_exp(x, &step_tan)?;
            let transported =
                cholesky_space::tri_transport(x, &new_x, &TriTangent::new(x.clone(), m_t)?)?;
            param.momentum = transported.vector().clone();
            *x = new_x;
        }
    }
    Ok(())
}

/// One Adam update at the rate `cfg.alpha * param.lr_scale`.
pub fn step(
    param: &mut ManifoldParam,
    grad: &Mat,
    cfg: &AdamConfig,
    metric: &MetricConfig,
) -> Result<()> {
    let rate = cfg.alpha * param.lr_scale;
    step_with_rate(param, grad, rate, cfg, metric)
}

/// Updates every parameter in name order. Each parameter must have exactly
/// one gradient; a missing one is an error naming the parameter.
pub fn step_all(
    params: &mut BTreeMap<String, ManifoldParam>,
    grads: &BTreeMap<String, Mat>,
    cfg: &AdamConfig,
    metric: &MetricConfig,
) -> Result<()> {
    for name in params.keys() {
        if !grads.contains_key(name) {
            return Err(GeomError::Config(format!(
                "missing gradient for parameter '{name}'"
            )));
        }
    }
    for (name, param) in params.iter_mut() {
        step(param, &grads[name], cfg, metric)?;
    }
    Ok(())
}
