//! Tape-level construction of the network: every layer is recorded on a
//! [`Tape`] so one backward pass yields gradients for all parameters.
//!
//! Two sources of data-dependent control flow are frozen into a
//! [`ForwardPlan`] so the recorded computation is a smooth function of the
//! parameters: K-means assignments (treated as constants for gradients) and
//! the number of Fréchet-mean fixed-point iterations. Re-running a builder
//! under a plan reproduces the same computation at perturbed parameters,
//! which is what the finite-difference checks differentiate.

use crate::data::SkeletonSequence;
use crate::error::{GeomError, Result};
use crate::gaussian::EMBED_REG;
use crate::mat::{Mat, MatrixFnKind};
use crate::net::kmeans;
use crate::net::topology::{ConvCase, SkeletonTopology};
use crate::net::{GeomNetConfig, GeomNetParams};
use crate::spd::{COVARIANCE_REG, FRECHET_MAX_ITERS, FRECHET_TOL};
use crate::tape::{Tape, Var};

/// Frozen per-stream control flow.
#[derive(Debug, Clone)]
pub struct StreamPlan {
    pub assignments: Vec<usize>,
    pub effective_l: usize,
    pub mean_iterations: usize,
    /// True when the covariance was computed at the mean itself (the
    /// no-transport path).
    pub used_mean_target: bool,
}

/// Frozen control flow for one forward pass (arms stream, legs stream).
#[derive(Debug, Clone)]
pub struct ForwardPlan {
    pub streams: [StreamPlan; 2],
}

/// Leaf variables of the parameters, in canonical order.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub conv: Vec<Var>,
    pub w_pt: [Option<Var>; 2],
    pub w_lw: [Option<Var>; 2],
    pub w_fc: Var,
    pub b_fc: Var,
}

impl ParamVars {
    /// Number of leaf matrices registered for the given configuration.
    pub fn leaf_count(cfg: &GeomNetConfig) -> usize {
        let mut count = 9 + 2;
        if !cfg.no_pt {
            count += 2;
        }
        if !cfg.no_ltml {
            count += 2;
        }
        count
    }

    /// Reassemble from a flat slice of leaves in canonical order:
    /// nine conv matrices, the transport targets (unless no_pt), the
    /// triangular weights (unless no_ltml), then FC weights and bias.
    pub fn from_slice(vars: &[Var], cfg: &GeomNetConfig) -> ParamVars {
        assert_eq!(
            vars.len(),
            ParamVars::leaf_count(cfg),
            "leaf count mismatch"
        );
        let mut it = vars.iter().copied();
        let conv: Vec<Var> = (0..9).map(|_| it.next().unwrap()).collect();
        let w_pt = if cfg.no_pt {
            [None, None]
        } else {
            [Some(it.next().unwrap()), Some(it.next().unwrap())]
        };
        let w_lw = if cfg.no_ltml {
            [None, None]
        } else {
            [Some(it.next().unwrap()), Some(it.next().unwrap())]
        };
        let w_fc = it.next().unwrap();
        let b_fc = it.next().unwrap();
        ParamVars {
            conv,
            w_pt,
            w_lw,
            w_fc,
            b_fc,
        }
    }
}

/// Flatten the parameters into leaf matrices in the canonical order of
/// [`ParamVars::from_slice`].
pub fn leaf_mats(params: &GeomNetParams, cfg: &GeomNetConfig) -> Vec<Mat> {
    let mut mats: Vec<Mat> = params.conv.to_vec();
    if !cfg.no_pt {
        mats.push(params.w_pt[0].mat().clone());
        mats.push(params.w_pt[1].mat().clone());
    }
    if !cfg.no_ltml {
        mats.push(params.w_lw[0].mat().clone());
        mats.push(params.w_lw[1].mat().clone());
    }
    mats.push(params.w_fc.clone());
    mats.push(params.b_fc.clone());
    mats
}

/// Register the parameters as tape leaves.
pub fn register_params(tape: &mut Tape, params: &GeomNetParams, cfg: &GeomNetConfig) -> ParamVars {
    let vars: Vec<Var> = leaf_mats(params, cfg)
        .into_iter()
        .map(|m| tape.leaf(m))
        .collect();
    ParamVars::from_slice(&vars, cfg)
}

/// Constant per-(u, v) sums of input neighborhoods for one stream: column
/// `j_idx * frames + t` of `sums[u][v]` accumulates the inputs of all
/// neighbors of stream joint `j_idx` in case `v` at frame `t + u - 1`
/// (zero outside the sequence, which realizes the temporal zero padding).
pub fn conv_input_sums(
    seq: &SkeletonSequence,
    topo: &SkeletonTopology,
    stream: usize,
) -> Result<Vec<Mat>> {
    let joints = topo.stream_joints(stream);
    let frames = seq.num_frames();
    let cols = joints.len() * frames;
    let mut sums: Vec<Mat> = (0..9).map(|_| Mat::zeros(3, cols)).collect();
    for (j_idx, &joint) in joints.iter().enumerate() {
        if topo.is_excluded(joint) {
            return Err(GeomError::Validation(format!(
                "stream joint {joint} is excluded"
            )));
        }
        let mut neighborhood: Vec<(usize, ConvCase)> = vec![(joint, ConvCase::SelfJoint)];
        for &n in topo.neighbors(joint) {
            neighborhood.push((n, topo.conv_case(joint, n)?));
        }
        for t in 0..frames {
            let col = j_idx * frames + t;
            for u in 0..3usize {
                let t_in = t as isize + u as isize - 1;
                if t_in < 0 || t_in >= frames as isize {
                    continue;
                }
                for &(n, case) in &neighborhood {
                    let x = seq.joint(t_in as usize, n);
                    let m = &mut sums[u * 3 + case as usize];
                    for c in 0..3 {
                        m[(c, col)] += x[c];
                    }
                }
            }
        }
    }
    Ok(sums)
}

/// Convolution features of one stream: `sum_{u,v} W_{u,v} S_{u,v}`, a
/// `d x (joints * frames)` node.
pub fn conv_features(tape: &mut Tape, conv: &[Var], sums: &[Mat]) -> Var {
    let mut acc: Option<Var> = None;
    for (w, s) in conv.iter().zip(sums) {
        let s_const = tape.constant(s.clone());
        let term = tape.matmul(*w, s_const);
        acc = Some(match acc {
            Some(a) => tape.add(a, term),
            None => term,
        });
    }
    acc.expect("nine convolution terms")
}

/// Gaussian of one cluster (columns of the feature node) embedded as an SPD
/// matrix of determinant one and dimension `d + k`.
pub fn gaussian_embed_cluster(
    tape: &mut Tape,
    features: Var,
    members: &[usize],
    k: usize,
) -> Result<Var> {
    let d = tape.value(features).rows();
    let m = members.len();
    let cluster = tape.gather_cols(features, members);
    let ones_col = tape.constant(Mat::from_fn(m, 1, |_, _| 1.0));
    let sum = tape.matmul(cluster, ones_col);
    let mu = tape.scale(sum, 1.0 / m as f64);
    let ones_row = tape.constant(Mat::from_fn(1, m, |_, _| 1.0));
    let mu_rep = tape.matmul(mu, ones_row);
    let centered = tape.sub(cluster, mu_rep);
    let centered_t = tape.transpose(centered);
    let outer = tape.matmul(centered, centered_t);
    let sigma = tape.scale(outer, 1.0 / (m.max(2) - 1) as f64);

    // smooth SPD regularization, then the unit-determinant embedding
    let tr = tape.trace(sigma);
    let lam = tape.scale(tr, EMBED_REG / d as f64);
    let eye = tape.constant(Mat::identity(d));
    let reg = tape.scale_by(eye, lam);
    let sigma_r = tape.add(sigma, reg);

    let log_sigma = tape.mat_fn(sigma_r, MatrixFnKind::Log)?;
    let log_det = tape.trace(log_sigma);
    let neg = tape.scale(log_det, -1.0 / (d + k) as f64);
    let factor = tape.scalar_exp(neg);

    if k == 0 {
        return Ok(tape.scale_by(sigma_r, factor));
    }
    let g = d + k;
    let mu_t = tape.transpose(mu);
    let mu_outer = tape.matmul(mu, mu_t);
    let scaled_outer = tape.scale(mu_outer, k as f64);
    let top_left = tape.add(sigma_r, scaled_outer);
    let mut block = tape.place(top_left, g, g, 0, 0);
    let ones_k = tape.constant(Mat::from_fn(1, k, |_, _| 1.0));
    let mu_cols = tape.matmul(mu, ones_k);
    let placed_right = tape.place(mu_cols, g, g, 0, d);
    block = tape.add(block, placed_right);
    let mu_rows = tape.transpose(mu_cols);
    let placed_bottom = tape.place(mu_rows, g, g, d, 0);
    block = tape.add(block, placed_bottom);
    let mut eye_k = Mat::zeros(g, g);
    for i in 0..k {
        eye_k[(d + i, d + i)] = 1.0;
    }
    let eye_k = tape.constant(eye_k);
    block = tape.add(block, eye_k);
    Ok(tape.scale_by(block, factor))
}

/// Fréchet mean of SPD nodes by the unrolled fixed-point iteration. With
/// `forced` the given number of updates is replayed; otherwise the loop stops
/// at the library tolerance (or the cap) and reports how many updates ran.
pub fn frechet_mean_unrolled(
    tape: &mut Tape,
    points: &[Var],
    forced: Option<usize>,
) -> Result<(Var, usize)> {
    assert!(!points.is_empty());
    let l = points.len();
    let mut acc = points[0];
    for p in &points[1..] {
        acc = tape.add(acc, *p);
    }
    let mut mean = tape.scale(acc, 1.0 / l as f64);
    let mut updates = 0usize;
    loop {
        if let Some(f) = forced {
            if updates == f {
                break;
            }
        }
        let sqrt = tape.mat_fn(mean, MatrixFnKind::Sqrt)?;
        let inv_sqrt = tape.mat_fn(mean, MatrixFnKind::InvSqrt)?;
        let mut tangent_sum: Option<Var> = None;
        for p in points {
            let a = tape.matmul(inv_sqrt, *p);
            let middle = tape.matmul(a, inv_sqrt);
            let log = tape.mat_fn(middle, MatrixFnKind::Log)?;
            let b = tape.matmul(sqrt, log);
            let t = tape.matmul(b, sqrt);
            tangent_sum = Some(match tangent_sum {
                Some(s) => tape.add(s, t),
                None => t,
            });
        }
        let avg = tape.scale(tangent_sum.unwrap(), 1.0 / l as f64);
        if forced.is_none() {
            let norm = tape.value(avg).frob_norm();
            if norm < FRECHET_TOL || updates == FRECHET_MAX_ITERS {
                break;
            }
        }
        let a = tape.matmul(inv_sqrt, avg);
        let middle = tape.matmul(a, inv_sqrt);
        let exp = tape.mat_fn(middle, MatrixFnKind::Exp)?;
        let b = tape.matmul(sqrt, exp);
        mean = tape.matmul(b, sqrt);
        updates += 1;
    }
    Ok((mean, updates))
}

/// Transported covariance of the log-map tangents at `mean`, half-vectorized;
/// `target = None` computes the covariance in the mean's own tangent space.
pub fn transported_covariance_node(
    tape: &mut Tape,
    points: &[Var],
    mean: Var,
    target: Option<Var>,
) -> Result<Var> {
    let l = points.len();
    let n = tape.value(mean).rows();
    let dim = n * (n + 1) / 2;
    let transport = match target {
        Some(t) => {
            let t_sqrt = tape.mat_fn(t, MatrixFnKind::Sqrt)?;
            let t_inv_sqrt = tape.mat_fn(t, MatrixFnKind::InvSqrt)?;
            let a = tape.matmul(t_inv_sqrt, mean);
            let middle = tape.matmul(a, t_inv_sqrt);
            let inv_root = tape.mat_fn(middle, MatrixFnKind::InvSqrt)?;
            let b = tape.matmul(t_sqrt, inv_root);
            Some(tape.matmul(b, t_inv_sqrt))
        }
        None => None,
    };
    let sqrt = tape.mat_fn(mean, MatrixFnKind::Sqrt)?;
    let inv_sqrt = tape.mat_fn(mean, MatrixFnKind::InvSqrt)?;
    let mut sum: Option<Var> = None;
    for p in points {
        let a = tape.matmul(inv_sqrt, *p);
        let middle = tape.matmul(a, inv_sqrt);
        let log = tape.mat_fn(middle, MatrixFnKind::Log)?;
        let b = tape.matmul(sqrt, log);
        let tangent = tape.matmul(b, sqrt);
        let moved = match transport {
            Some(e) => {
                let et = tape.transpose(e);
                let ea = tape.matmul(e, tangent);
                tape.matmul(ea, et)
            }
            None => tangent,
        };
        let v = tape.vec_sym(moved);
        let vt = tape.transpose(v);
        let outer = tape.matmul(v, vt);
        sum = Some(match sum {
            Some(s) => tape.add(s, outer),
            None => outer,
        });
    }
    let raw = tape.scale(sum.unwrap(), 1.0 / (l.max(2) - 1) as f64);
    let tr = tape.trace(raw);
    let scaled = tape.scale(tr, COVARIANCE_REG / dim as f64);
    let floor = tape.constant(Mat::scalar(COVARIANCE_REG));
    let lam = tape.add(scaled, floor);
    let eye = tape.constant(Mat::identity(dim));
    let reg = tape.scale_by(eye, lam);
    Ok(tape.add(raw, reg))
}

/// One full stream: convolution features, clustering, per-cluster Gaussian
/// embeddings, SPD statistics, the group embedding, the triangular layer and
/// the log-Euclidean projection. Returns the half-vectorized projection and
/// the frozen plan.
#[allow(clippy::too_many_arguments)]
pub fn build_stream(
    tape: &mut Tape,
    seq: &SkeletonSequence,
    topo: &SkeletonTopology,
    stream: usize,
    pv: &ParamVars,
    cfg: &GeomNetConfig,
    plan: Option<&StreamPlan>,
) -> Result<(Var, StreamPlan)> {
    let sums = conv_input_sums(seq, topo, stream)?;
    let features = conv_features(tape, &pv.conv, &sums);

    let (assignments, effective_l) = match plan {
        Some(p) => (p.assignments.clone(), p.effective_l),
        None => {
            let value = tape.value(features);
            let points: Vec<Vec<f64>> = (0..value.cols())
                .map(|c| (0..value.rows()).map(|r| value[(r, c)]).collect())
                .collect();
            let clustering =
                kmeans::cluster(&points, cfg.clusters, cfg.kmeans_seed, cfg.kmeans_max_iters);
            (clustering.assignments, clustering.effective_l)
        }
    };

    let mut embedded = Vec::with_capacity(effective_l);
    for cluster_id in 0..effective_l {
        let members: Vec<usize> = assignments
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| (a == cluster_id).then_some(i))
            .collect();
        if members.is_empty() {
            return Err(GeomError::Degenerate(format!(
                "cluster {cluster_id} of stream {stream} is empty"
            )));
        }
        embedded.push(gaussian_embed_cluster(tape, features, &members, cfg.k)?);
    }

    let forced = plan.map(|p| p.mean_iterations);
    let (mean_node, mean_iterations) = frechet_mean_unrolled(tape, &embedded, forced)?;
    let mean_node = if cfg.stop_mean_gradient {
        let frozen = tape.value(mean_node).clone();
        tape.constant(frozen)
    } else {
        mean_node
    };

    let target = pv.w_pt[stream];
    let used_mean_target = target.is_none();
    let cov = transported_covariance_node(tape, &embedded, mean_node, target)?;

    // group embedding [[L, 0], [varphi(mean), I]]
    let chol = tape.cholesky(cov)?;
    let n_prime = tape.value(chol).rows();
    let g = n_prime + cfg.k_prime;
    let mut group = tape.place(chol, g, g, 0, 0);
    if cfg.k_prime > 0 {
        let log_mean = tape.mat_fn(mean_node, MatrixFnKind::Log)?;
        let log_vec = tape.vec_sym(log_mean);
        let row = tape.transpose(log_vec);
        let ones = tape.constant(Mat::from_fn(cfg.k_prime, 1, |_, _| 1.0));
        let phi = tape.matmul(ones, row);
        let placed_phi = tape.place(phi, g, g, n_prime, 0);
        group = tape.add(group, placed_phi);
        let mut eye = Mat::zeros(g, g);
        for i in 0..cfg.k_prime {
            eye[(n_prime + i, n_prime + i)] = 1.0;
        }
        let eye = tape.constant(eye);
        group = tape.add(group, eye);
    }

    // triangular weight layer (identity under the no-LTML ablation)
    let d_node = match pv.w_lw[stream] {
        Some(w) => tape.matmul(group, w),
        None => group,
    };

    // log-Euclidean projection
    let dt = tape.transpose(d_node);
    let ddt = tape.matmul(d_node, dt);
    let log_ddt = tape.mat_fn(ddt, MatrixFnKind::Log)?;
    let e_vec = tape.vec_sym(log_ddt);

    Ok((
        e_vec,
        StreamPlan {
            assignments,
            effective_l,
            mean_iterations,
            used_mean_target,
        },
    ))
}

/// Class logits of one sequence.
pub fn build_logits(
    tape: &mut Tape,
    seq: &SkeletonSequence,
    topo: &SkeletonTopology,
    pv: &ParamVars,
    cfg: &GeomNetConfig,
    plan: Option<&ForwardPlan>,
) -> Result<(Var, ForwardPlan)> {
    let (e1, plan1) = build_stream(tape, seq, topo, 0, pv, cfg, plan.map(|p| &p.streams[0]))?;
    let (e2, plan2) = build_stream(tape, seq, topo, 1, pv, cfg, plan.map(|p| &p.streams[1]))?;
    let feat = tape.vstack(e1, e2);
    let wx = tape.matmul(pv.w_fc, feat);
    let logits = tape.add(wx, pv.b_fc);
    Ok((
        logits,
        ForwardPlan {
            streams: [plan1, plan2],
        },
    ))
}

/// Cross-entropy loss of one labeled sequence:
/// `logsumexp(logits) - logits[label]`.
pub fn build_loss(
    tape: &mut Tape,
    seq: &SkeletonSequence,
    label: usize,
    topo: &SkeletonTopology,
    pv: &ParamVars,
    cfg: &GeomNetConfig,
    plan: Option<&ForwardPlan>,
) -> Result<(Var, ForwardPlan)> {
    if label >= cfg.classes {
        return Err(GeomError::Validation(format!(
            "label {label} is out of range for {} classes",
            cfg.classes
        )));
    }
    let (logits, plan) = build_logits(tape, seq, topo, pv, cfg, plan)?;
    let lse = tape.log_sum_exp(logits);
    let picked = tape.entry(logits, label, 0);
    Ok((tape.sub(lse, picked), plan))
}
