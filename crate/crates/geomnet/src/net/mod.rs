//! The classifier: a temporal graph convolution over skeleton joints, K-means
//! pooling into per-cluster Gaussians embedded as SPD matrices, SPD
//! statistics with a learned transport target, the group embedding of the
//! resulting Riemannian Gaussian, a learned triangular layer, a log-Euclidean
//! projection, and a softmax head — differentiable end to end through the
//! recording tape.

pub mod kmeans;
pub mod layers;
pub mod topology;

use std::collections::BTreeMap;

use crate::cholesky_space::LowerTriPos;
use crate::data::SkeletonSequence;
use crate::error::{GeomError, Result};
use crate::gaussian::sym_dim;
use crate::mat::{Mat, MatrixFnKind};
use crate::rgaussian::GroupElement;
use crate::rng::SplitMix64;
use crate::spd::SpdPoint;
use crate::tape::{self, Tape};

pub use layers::{ForwardPlan, StreamPlan};
pub use topology::{SkeletonTopology, TopologySpec};

/// Network hyperparameters and ablation switches.
#[derive(Debug, Clone)]
pub struct GeomNetConfig {
    /// Output dimension of the convolution.
    pub d: usize,
    /// Cluster count per stream.
    pub clusters: usize,
    /// Gaussian embedding replication count.
    pub k: usize,
    /// Group embedding replication count.
    pub k_prime: usize,
    pub classes: usize,
    pub kmeans_seed: u64,
    pub kmeans_max_iters: usize,
    /// Compute the tangent covariance at the mean itself instead of the
    /// learned transport target.
    pub no_pt: bool,
    /// Freeze the triangular weights at the identity.
    pub no_ltml: bool,
    /// Detach the Fréchet mean from the gradient graph.
    pub stop_mean_gradient: bool,
}

impl GeomNetConfig {
    pub fn new(d: usize, clusters: usize, k: usize, k_prime: usize, classes: usize) -> Self {
        GeomNetConfig {
            d,
            clusters,
            k,
            k_prime,
            classes,
            kmeans_seed: 0,
            kmeans_max_iters: 100,
            no_pt: false,
            no_ltml: false,
            stop_mean_gradient: false,
        }
    }

    /// Desk-scale defaults: d = 6, 8 clusters, (k, k') = (2, 1).
    pub fn desk(classes: usize) -> Self {
        GeomNetConfig::new(6, 8, 2, 1, classes)
    }

    /// Full-scale preset for the 8-class interaction benchmark:
    /// d = 9, 180 clusters, (k, k') = (2, 3).
    pub fn paper_sbu() -> Self {
        GeomNetConfig::new(9, 180, 2, 3, 8)
    }

    /// Full-scale preset for the larger benchmarks: (k, k') = (2, 1).
    pub fn paper_ntu(classes: usize) -> Self {
        GeomNetConfig::new(9, 180, 2, 1, classes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(GeomError::Config("d must be at least 1".to_string()));
        }
        if self.clusters < 2 {
            return Err(GeomError::Config("clusters must be at least 2".to_string()));
        }
        if self.classes < 2 {
            return Err(GeomError::Config("classes must be at least 2".to_string()));
        }
        Ok(())
    }

    /// Dimension of the embedded per-cluster Gaussians.
    pub fn gauss_dim(&self) -> usize {
        self.d + self.k
    }

    /// Dimension of the tangent covariance.
    pub fn stats_dim(&self) -> usize {
        sym_dim(self.gauss_dim())
    }

    /// Dimension of the group embedding.
    pub fn group_dim(&self) -> usize {
        self.stats_dim() + self.k_prime
    }

    /// Input width of the fully-connected head.
    pub fn logit_input_dim(&self) -> usize {
        2 * sym_dim(self.group_dim())
    }
}

/// All trainable parameters.
#[derive(Debug, Clone)]
pub struct GeomNetParams {
    /// Nine convolution weights, indexed `u * 3 + v`, each `d x 3`.
    pub conv: Vec<Mat>,
    /// Transport targets of the two streams.
    pub w_pt: [SpdPoint; 2],
    /// Triangular weights of the two streams.
    pub w_lw: [LowerTriPos; 2],
    pub w_fc: Mat,
    pub b_fc: Mat,
}

impl GeomNetParams {
    /// Seeded initialization: conv weights uniform in
    /// +-sqrt(6 / (3 + d)), identity transport targets and triangular
    /// weights, Glorot-uniform FC weights, zero bias.
    pub fn init(cfg: &GeomNetConfig, seed: u64) -> GeomNetParams {
        let mut rng = SplitMix64::new(seed);
        let bound = (6.0 / (3 + cfg.d) as f64).sqrt();
        let conv = (0..9)
            .map(|_| Mat::from_fn(cfg.d, 3, |_, _| rng.range(-bound, bound)))
            .collect();
        let fc_in = cfg.logit_input_dim();
        let fc_bound = (6.0 / (fc_in + cfg.classes) as f64).sqrt();
        let w_fc = Mat::from_fn(cfg.classes, fc_in, |_, _| rng.range(-fc_bound, fc_bound));
        GeomNetParams {
            conv,
            w_pt: [
                SpdPoint::identity(cfg.gauss_dim()),
                SpdPoint::identity(cfg.gauss_dim()),
            ],
            w_lw: [
                LowerTriPos::identity(cfg.group_dim()),
                LowerTriPos::identity(cfg.group_dim()),
            ],
            w_fc,
            b_fc: Mat::zeros(cfg.classes, 1),
        }
    }

    pub fn validate_shapes(&self, cfg: &GeomNetConfig) -> Result<()> {
        if self.conv.len() != 9 || self.conv.iter().any(|w| w.rows() != cfg.d || w.cols() != 3) {
            return Err(GeomError::Dimension(
                "convolution weights do not match d x 3".to_string(),
            ));
        }
        if self.w_pt.iter().any(|p| p.dim() != cfg.gauss_dim()) {
            return Err(GeomError::Dimension(format!(
                "transport targets must be {0}x{0}",
                cfg.gauss_dim()
            )));
        }
        if self.w_lw.iter().any(|l| l.dim() != cfg.group_dim()) {
            return Err(GeomError::Dimension(format!(
                "triangular weights must be {0}x{0}",
                cfg.group_dim()
            )));
        }
        if self.w_fc.rows() != cfg.classes
            || self.w_fc.cols() != cfg.logit_input_dim()
            || self.b_fc.rows() != cfg.classes
            || self.b_fc.cols() != 1
        {
            return Err(GeomError::Dimension(
                "classifier head shapes do not match the configuration".to_string(),
            ));
        }
        Ok(())
    }

    /// Canonical parameter names, matching the keys of [`named_grads`].
    pub fn names() -> Vec<String> {
        let mut names = Vec::new();
        for u in 0..3 {
            for v in 0..3 {
                names.push(format!("conv_{}_{}", u + 1, v + 1));
            }
        }
        names.extend([
            "w_pt_1".to_string(),
            "w_pt_2".to_string(),
            "w_lw_1".to_string(),
            "w_lw_2".to_string(),
            "w_fc".to_string(),
            "b_fc".to_string(),
        ]);
        names
    }
}

impl GeomNetParams {
    /// Write the parameters as named text sections with round-trip-exact
    /// floats: `name rows cols` then one line per row.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::from("geomnet-params v1\n");
        let mats = self.named_matrices();
        for (name, m) in mats {
            writeln!(out, "{name} {} {}", m.rows(), m.cols()).expect("string write");
            for i in 0..m.rows() {
                let row: Vec<String> = (0..m.cols()).map(|j| format!("{}", m[(i, j)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    fn named_matrices(&self) -> Vec<(String, &Mat)> {
        let mut v: Vec<(String, &Mat)> = Vec::new();
        for u in 0..3 {
            for w in 0..3 {
                v.push((format!("conv_{}_{}", u + 1, w + 1), &self.conv[u * 3 + w]));
            }
        }
        v.push(("w_pt_1".to_string(), self.w_pt[0].mat()));
        v.push(("w_pt_2".to_string(), self.w_pt[1].mat()));
        v.push(("w_lw_1".to_string(), self.w_lw[0].mat()));
        v.push(("w_lw_2".to_string(), self.w_lw[1].mat()));
        v.push(("w_fc".to_string(), &self.w_fc));
        v.push(("b_fc".to_string(), &self.b_fc));
        v
    }

    /// Inverse of [`GeomNetParams::save`]; shapes and manifold membership are
    /// validated against the configuration.
    pub fn load(path: &std::path::Path, cfg: &GeomNetConfig) -> Result<GeomNetParams> {
        let text = std::fs::read_to_string(path)?;
        let path_str = path.display().to_string();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "geomnet-params v1" => {}
            _ => {
                return Err(GeomError::Parse {
                    path: path_str,
                    line: 1,
                    message: "expected header 'geomnet-params v1'".to_string(),
                })
            }
        }
        let mut mats: BTreeMap<String, Mat> = BTreeMap::new();
        while let Some((lineno, header)) = lines.next() {
            if header.trim().is_empty() {
                continue;
            }
            let mut parts = header.split_whitespace();
            let name = parts.next().unwrap().to_string();
            let parse_dim = |s: Option<&str>| -> Result<usize> {
                s.and_then(|x| x.parse().ok())
                    .ok_or_else(|| GeomError::Parse {
                        path: path_str.clone(),
                        line: lineno + 1,
                        message: format!("bad section header '{header}'"),
                    })
            };
            let rows = parse_dim(parts.next())?;
            let cols = parse_dim(parts.next())?;
            let mut m = Mat::zeros(rows, cols);
            for i in 0..rows {
                let (rowno, row) = lines.next().ok_or_else(|| GeomError::Parse {
                    path: path_str.clone(),
                    line: lineno + 1,
                    message: format!("section {name} is truncated"),
                })?;
                let values: Vec<&str> = row.split_whitespace().collect();
                if values.len() != cols {
                    return Err(GeomError::Parse {
                        path: path_str.clone(),
                        line: rowno + 1,
                        message: format!("expected {cols} values, found {}", values.len()),
                    });
                }
                for (j, v) in values.iter().enumerate() {
                    m[(i, j)] = v.parse().map_err(|_| GeomError::Parse {
                        path: path_str.clone(),
                        line: rowno + 1,
                        message: format!("bad value '{v}'"),
                    })?;
                }
            }
            mats.insert(name, m);
        }
        let mut take = |name: &str| -> Result<Mat> {
            mats.remove(name)
                .ok_or_else(|| GeomError::Validation(format!("parameter file is missing '{name}'")))
        };
        let mut conv = Vec::with_capacity(9);
        for u in 0..3 {
            for w in 0..3 {
                conv.push(take(&format!("conv_{}_{}", u + 1, w + 1))?);
            }
        }
        let params = GeomNetParams {
            conv,
            w_pt: [
                SpdPoint::new(take("w_pt_1")?)?,
                SpdPoint::new(take("w_pt_2")?)?,
            ],
            w_lw: [
                LowerTriPos::new(take("w_lw_1")?)?,
                LowerTriPos::new(take("w_lw_2")?)?,
            ],
            w_fc: take("w_fc")?,
            b_fc: take("b_fc")?,
        };
        params.validate_shapes(cfg)?;
        Ok(params)
    }
}

/// Euclidean gradients for every parameter; transport-target and triangular
/// entries are `None` under the corresponding ablations.
#[derive(Debug, Clone)]
pub struct GeomNetGrads {
    pub conv: Vec<Mat>,
    pub w_pt: [Option<Mat>; 2],
    pub w_lw: [Option<Mat>; 2],
    pub w_fc: Mat,
    pub b_fc: Mat,
}

impl GeomNetGrads {
    fn zeros(params: &GeomNetParams, cfg: &GeomNetConfig) -> GeomNetGrads {
        let z = |m: &Mat| Mat::zeros(m.rows(), m.cols());
        GeomNetGrads {
            conv: params.conv.iter().map(z).collect(),
            w_pt: if cfg.no_pt {
                [None, None]
            } else {
                [
                    Some(Mat::zeros(cfg.gauss_dim(), cfg.gauss_dim())),
                    Some(Mat::zeros(cfg.gauss_dim(), cfg.gauss_dim())),
                ]
            },
            w_lw: if cfg.no_ltml {
                [None, None]
            } else {
                [
                    Some(Mat::zeros(cfg.group_dim(), cfg.group_dim())),
                    Some(Mat::zeros(cfg.group_dim(), cfg.group_dim())),
                ]
            },
            w_fc: z(&params.w_fc),
            b_fc: z(&params.b_fc),
        }
    }

    fn add_scaled(&mut self, other: &GeomNetGrads, f: f64) {
        for (a, b) in self.conv.iter_mut().zip(&other.conv) {
            *a = a.add(&b.scale(f));
        }
        for (a, b) in self.w_pt.iter_mut().zip(&other.w_pt) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                *a = a.add(&b.scale(f));
            }
        }
        for (a, b) in self.w_lw.iter_mut().zip(&other.w_lw) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                *a = a.add(&b.scale(f));
            }
        }
        self.w_fc = self.w_fc.add(&other.w_fc.scale(f));
        self.b_fc = self.b_fc.add(&other.b_fc.scale(f));
    }
}

fn softmax(logits: &Mat) -> Vec<f64> {
    let max = logits
        .data()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Class probabilities of one sequence (softmax with max subtraction), plus
/// the frozen plan of the pass.
pub fn forward(
    seq: &SkeletonSequence,
    topo: &SkeletonTopology,
    params: &GeomNetParams,
    cfg: &GeomNetConfig,
) -> Result<(Vec<f64>, ForwardPlan)> {
    params.validate_shapes(cfg)?;
    let mut tape = Tape::new();
    let pv = layers::register_params(&mut tape, params, cfg);
    let (logits, plan) = layers::build_logits(&mut tape, seq, topo, &pv, cfg, None)?;
    Ok((softmax(tape.value(logits)), plan))
}

/// Cross-entropy loss of one labeled sequence. Passing a plan replays its
/// control flow (used by finite-difference checks); otherwise the plan is
/// computed and returned.
pub fn sequence_loss(
    seq: &SkeletonSequence,
    label: usize,
    topo: &SkeletonTopology,
    params: &GeomNetParams,
    cfg: &GeomNetConfig,
    plan: Option<&ForwardPlan>,
) -> Result<(f64, ForwardPlan)> {
    let mut tape = Tape::new();
    let pv = layers::register_params(&mut tape, params, cfg);
    let (loss, plan) = layers::build_loss(&mut tape, seq, label, topo, &pv, cfg, plan)?;
    Ok((tape.value(loss).as_scalar(), plan))
}

/// Loss, prediction and Euclidean gradients of one labeled sequence.
#[derive(Debug, Clone)]
pub struct SequencePass {
    pub loss: f64,
    pub predicted: usize,
    pub grads: GeomNetGrads,
    pub plan: ForwardPlan,
}

pub fn sequence_loss_and_grads(
    seq: &SkeletonSequence,
    label: usize,
    topo: &SkeletonTopology,
    params: &GeomNetParams,
    cfg: &GeomNetConfig,
) -> Result<SequencePass> {
    let mut tape = Tape::new();
    let pv = layers::register_params(&mut tape, params, cfg);
    let (logits, plan) = layers::build_logits(&mut tape, seq, topo, &pv, cfg, None)?;
    if label >= cfg.classes {
        return Err(GeomError::Validation(format!(
            "label {label} is out of range for {} classes",
            cfg.classes
        )));
    }
    let logit_values = tape.value(logits).clone();
    let predicted = argmax(&logit_values);
    let lse = tape.log_sum_exp(logits);
    let picked = tape.entry(logits, label, 0);
    let loss = tape.sub(lse, picked);
    let grads = tape.backward(loss)?;
    let take = |v: tape::Var, rows: usize, cols: usize| grads.get_or_zeros(v, rows, cols);
    let conv = pv
        .conv
        .iter()
        .map(|&v| take(v, cfg.d, 3))
        .collect::<Vec<_>>();
    let g = cfg.group_dim();
    let n = cfg.gauss_dim();
    let out = GeomNetGrads {
        conv,
        w_pt: [
            pv.w_pt[0].map(|v| take(v, n, n)),
            pv.w_pt[1].map(|v| take(v, n, n)),
        ],
        w_lw: [
            pv.w_lw[0].map(|v| take(v, g, g)),
            pv.w_lw[1].map(|v| take(v, g, g)),
        ],
        w_fc: take(pv.w_fc, cfg.classes, cfg.logit_input_dim()),
        b_fc: take(pv.b_fc, cfg.classes, 1),
    };
    Ok(SequencePass {
        loss: tape.value(loss).as_scalar(),
        predicted,
        grads: out,
        plan,
    })
}

fn argmax(logits: &Mat) -> usize {
    let mut best = 0;
    for i in 1..logits.rows() {
        if logits[(i, 0)] > logits[(best, 0)] {
            best = i;
        }
    }
    best
}

/// Mean loss, mean gradients, and per-sequence predictions over a batch.
#[derive(Debug, Clone)]
pub struct BatchPass {
    pub loss: f64,
    pub grads: GeomNetGrads,
    pub predictions: Vec<usize>,
}

/// Per-sequence passes may run on `threads` worker threads; the reduction is
/// ordered by batch index, so the result does not depend on the thread count.
pub fn batch_loss_and_grads(
    batch: &[(&SkeletonSequence, usize)],
    topo: &SkeletonTopology,
    params: &GeomNetParams,
    cfg: &GeomNetConfig,
    threads: usize,
) -> Result<BatchPass> {
    if batch.is_empty() {
        return Err(GeomError::Degenerate("empty batch".to_string()));
    }
    params.validate_shapes(cfg)?;
    let threads = threads.max(1).min(batch.len());
    let mut per_seq: Vec<Option<Result<SequencePass>>> = (0..batch.len()).map(|_| None).collect();
    if threads == 1 {
        for (slot, (seq, label)) in per_seq.iter_mut().zip(batch) {
            *slot = Some(sequence_loss_and_grads(seq, *label, topo, params, cfg));
        }
    } else {
        let chunk = batch.len().div_ceil(threads);
        let results: Vec<(usize, Result<SequencePass>)> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (worker, items) in batch.chunks(chunk).enumerate() {
                let start = worker * chunk;
                handles.push(scope.spawn(move || {
                    items
                        .iter()
                        .enumerate()
                        .map(|(off, (seq, label))| {
                            (
                                start + off,
                                sequence_loss_and_grads(seq, *label, topo, params, cfg),
                            )
                        })
                        .collect::<Vec<_>>()
                }));
            }
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        for (idx, res) in results {
            per_seq[idx] = Some(res);
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total_loss = 0.0;
    let mut total = GeomNetGrads::zeros(params, cfg);
    let mut predictions = Vec::with_capacity(batch.len());
    for slot in per_seq {
        let pass = slot.expect("all slots filled")?;
        total_loss += pass.loss * scale;
        total.add_scaled(&pass.grads, scale);
        predictions.push(pass.predicted);
    }
    Ok(BatchPass {
        loss: total_loss,
        grads: total,
        predictions,
    })
}

/// Outcome of a composed-loss gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max relative error over all directional probes.
    pub max_rel_err: f64,
    /// Gradient Frobenius norm per parameter block (diagnostic: every block
    /// with a non-negligible norm had a gradient-aligned probe).
    pub block_norms: BTreeMap<String, f64>,
    pub directions_checked: usize,
}

/// Checks the analytic gradient of the composed loss against central finite
/// differences along directional probes (h = 1e-5): for each parameter block
/// a gradient-aligned direction and a random direction, both projected onto
/// the block's tangent space (symmetric for the transport targets,
/// lower-triangular for the triangular weights), plus two random global
/// directions. K-means assignments and the Fréchet iteration counts are
/// frozen to the plan of the unperturbed pass, so the differentiated function
/// is smooth.
///
/// Directional probes are used because per-entry differences of the full
/// composition sit below the f64 evaluation-noise floor for small entries;
/// the directional derivative keeps a healthy denominator.
pub fn check_loss_gradient(
    seq: &SkeletonSequence,
    label: usize,
    topo: &SkeletonTopology,
    params: &GeomNetParams,
    cfg: &GeomNetConfig,
    probe_seed: u64,
) -> Result<GradCheckReport> {
    let (_, plan) = sequence_loss(seq, label, topo, params, cfg, None)?;
    let inputs = layers::leaf_mats(params, cfg);
    let build = |t: &mut Tape, vars: &[tape::Var]| {
        let pv = layers::ParamVars::from_slice(vars, cfg);
        let (loss, _) = layers::build_loss(t, seq, label, topo, &pv, cfg, Some(&plan))?;
        Ok(loss)
    };

    // analytic gradients at the base point, for the aligned directions
    let mut tape0 = Tape::new();
    let vars0: Vec<tape::Var> = inputs.iter().map(|m| tape0.leaf(m.clone())).collect();
    let pv0 = layers::ParamVars::from_slice(&vars0, cfg);
    let (loss0, _) = layers::build_loss(&mut tape0, seq, label, topo, &pv0, cfg, Some(&plan))?;
    let grads0 = tape0.backward(loss0)?;
    let g: Vec<Mat> = vars0
        .iter()
        .zip(&inputs)
        .map(|(&v, m)| grads0.get_or_zeros(v, m.rows(), m.cols()))
        .collect();

    // block layout over the canonical leaf order
    let mut blocks: Vec<(String, std::ops::Range<usize>, BlockKind)> =
        vec![("conv".to_string(), 0..9, BlockKind::Dense)];
    let mut at = 9;
    if !cfg.no_pt {
        blocks.push(("w_pt_1".to_string(), at..at + 1, BlockKind::Symmetric));
        blocks.push(("w_pt_2".to_string(), at + 1..at + 2, BlockKind::Symmetric));
        at += 2;
    }
    if !cfg.no_ltml {
        blocks.push(("w_lw_1".to_string(), at..at + 1, BlockKind::LowerTriangular));
        blocks.push((
            "w_lw_2".to_string(),
            at + 1..at + 2,
            BlockKind::LowerTriangular,
        ));
        at += 2;
    }
    blocks.push(("w_fc".to_string(), at..at + 1, BlockKind::Dense));
    blocks.push(("b_fc".to_string(), at + 1..at + 2, BlockKind::Dense));

    let project = |kind: BlockKind, m: &Mat| -> Mat {
        match kind {
            BlockKind::Dense => m.clone(),
            BlockKind::Symmetric => m.sym(),
            BlockKind::LowerTriangular => {
                let mut out = m.strict_lower();
                for i in 0..m.rows() {
                    out[(i, i)] = m[(i, i)];
                }
                out
            }
        }
    };

    let zero_dir = || -> Vec<Mat> {
        inputs
            .iter()
            .map(|m| Mat::zeros(m.rows(), m.cols()))
            .collect()
    };
    let mut rng = SplitMix64::new(probe_seed);
    let mut directions: Vec<Vec<Mat>> = Vec::new();
    let mut block_norms = BTreeMap::new();
    for (name, range, kind) in &blocks {
        let norm: f64 = range
            .clone()
            .map(|i| {
                let p = project(*kind, &g[i]);
                p.dot(&p)
            })
            .sum::<f64>()
            .sqrt();
        block_norms.insert(name.clone(), norm);
        // gradient-aligned tangent direction (meaningless when the block has
        // no influence on the loss)
        if norm > 1e-9 {
            let mut dir = zero_dir();
            for i in range.clone() {
                dir[i] = project(*kind, &g[i]).scale(1.0 / norm);
            }
            directions.push(dir);
        }
    }
    // random global tangent directions, tilted toward the gradient so the
    // directional derivative (the error denominator) stays bounded away from
    // zero
    let mut g_norm_sq = 0.0;
    for (_, range, kind) in &blocks {
        for i in range.clone() {
            let p = project(*kind, &g[i]);
            g_norm_sq += p.dot(&p);
        }
    }
    let g_norm = g_norm_sq.sqrt().max(1e-300);
    for _ in 0..2 {
        let mut dir = zero_dir();
        for (_, range, kind) in &blocks {
            for i in range.clone() {
                let raw = Mat::from_fn(inputs[i].rows(), inputs[i].cols(), |_, _| rng.normal());
                dir[i] = project(*kind, &raw);
            }
        }
        let r_norm: f64 = dir.iter().map(|m| m.dot(m)).sum::<f64>().sqrt();
        let mut norm_sq = 0.0;
        for (i, m) in dir.iter_mut().enumerate() {
            let tilt = blocks
                .iter()
                .find(|(_, range, _)| range.contains(&i))
                .map(|(_, _, kind)| project(*kind, &g[i]))
                .unwrap_or_else(|| g[i].clone());
            *m = m.scale(1.0 / r_norm).add(&tilt.scale(1.0 / g_norm));
            norm_sq += m.dot(m);
        }
        let norm = norm_sq.sqrt();
        for m in dir.iter_mut() {
            *m = m.scale(1.0 / norm);
        }
        directions.push(dir);
    }

    let directions_checked = directions.len();
    let max_rel_err = tape::check_grad_directional(build, &inputs, &directions)?;
    Ok(GradCheckReport {
        max_rel_err,
        block_norms,
        directions_checked,
    })
}

#[derive(Debug, Clone, Copy)]
enum BlockKind {
    Dense,
    Symmetric,
    LowerTriangular,
}

// ---------------------------------------------------------------------------
// value-level layer operations
// ---------------------------------------------------------------------------

/// `D = B W`: the product of a group embedding with a triangular weight,
/// itself lower-triangular with positive diagonal.
pub fn trilmap(b: &GroupElement, w: &LowerTriPos) -> Result<LowerTriPos> {
    if b.matrix().rows() != w.dim() {
        return Err(GeomError::Dimension(format!(
            "trilmap: {}x{} by {}x{}",
            b.matrix().rows(),
            b.matrix().cols(),
            w.dim(),
            w.dim()
        )));
    }
    LowerTriPos::new(b.matrix().matmul(w.mat()))
}

/// `E = log(D D^T)`: the log-Euclidean projection of a triangular matrix.
pub fn tril_to_euclid(d: &LowerTriPos) -> Result<Mat> {
    d.mat().matmul(&d.mat().t()).matrix_fn(MatrixFnKind::Log)
}

/// Softmax class probabilities from the two stream projections.
pub fn class_probabilities(e1: &Mat, e2: &Mat, w_fc: &Mat, b_fc: &Mat) -> Result<Vec<f64>> {
    let v1 = crate::gaussian::vec_sym(e1)?;
    let v2 = crate::gaussian::vec_sym(e2)?;
    let mut feat = v1;
    feat.extend(v2);
    if w_fc.cols() != feat.len() {
        return Err(GeomError::Dimension(format!(
            "classifier expects {} features, got {}",
            w_fc.cols(),
            feat.len()
        )));
    }
    let logits = w_fc.matmul(&Mat::col(&feat)).add(b_fc);
    Ok(softmax(&logits))
}

/// Named Euclidean gradients in the canonical parameter order; ablated
/// parameters are omitted.
pub fn named_grads(grads: &GeomNetGrads) -> BTreeMap<String, Mat> {
    let mut map = BTreeMap::new();
    for u in 0..3 {
        for v in 0..3 {
            map.insert(
                format!("conv_{}_{}", u + 1, v + 1),
                grads.conv[u * 3 + v].clone(),
            );
        }
    }
    for (i, g) in grads.w_pt.iter().enumerate() {
        if let Some(g) = g {
            map.insert(format!("w_pt_{}", i + 1), g.clone());
        }
    }
    for (i, g) in grads.w_lw.iter().enumerate() {
        if let Some(g) = g {
            map.insert(format!("w_lw_{}", i + 1), g.clone());
        }
    }
    map.insert("w_fc".to_string(), grads.w_fc.clone());
    map.insert("b_fc".to_string(), grads.b_fc.clone());
    map
}
