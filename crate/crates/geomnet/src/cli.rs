//! Command-line entry points: training, evaluation, and the geometry
//! self-check suite.
//!
//! Configuration is a flat `key = value` text file; every run echoes the
//! effective configuration into the output directory, writes per-epoch
//! metrics as line-delimited records, and saves parameters in the text format
//! of [`GeomNetParams::save`]. All randomness flows from the single `seed`
//! key. The `GEOMNET_THREADS` environment variable caps the per-batch worker
//! threads (default 1).
//!
//! Exit codes: 0 success, 1 configuration error, 2 numeric failure,
//! 3 self-check failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adam::{self, AdamConfig, ManifoldParam};
use crate::cholesky_space::tri_riemannian_gradient;
use crate::data::{
    self, builtin_topology, generate_synthetic, load_sbu, normalize, DatasetSplit,
    SkeletonSequence, SyntheticSpec,
};
use crate::diag;
use crate::error::{GeomError, Result};
use crate::mat::Mat;
use crate::net::{self, GeomNetConfig, GeomNetParams, SkeletonTopology, TopologySpec};
use crate::rng::SplitMix64;
use crate::selfcheck::{self, FamilyReport};
use crate::spd::{riemannian_gradient, MetricConfig};

/// Where the sequences come from.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    Synthetic {
        classes: usize,
        frames: usize,
        sigma: f64,
        train_count: usize,
        test_count: usize,
    },
    Sbu {
        path: PathBuf,
        /// Held-out fold for the train/test split of a single run.
        test_fold: usize,
    },
}

#[derive(Debug, Clone)]
pub enum TopologyChoice {
    Builtin(String),
    File(PathBuf),
}

/// Full description of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub topology: TopologyChoice,
    pub net: GeomNetConfig,
    pub adam: AdamConfig,
    pub metric: MetricConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Step size of the Euclidean parameter group (the manifold group uses
    /// the Adam alpha).
    pub net_learning_rate: f64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Desk-scale synthetic run: 2 classes, 60 train / 20 test, sigma 0.02,
    /// d = 6, 8 clusters, (k, k') = (2, 1).
    pub fn desk_synthetic() -> RunConfig {
        RunConfig {
            dataset: DatasetSource::Synthetic {
                classes: 2,
                frames: 20,
                sigma: 0.02,
                train_count: 60,
                test_count: 20,
            },
            topology: TopologyChoice::Builtin("synthetic".to_string()),
            net: GeomNetConfig::desk(2),
            adam: AdamConfig::default(),
            metric: MetricConfig::airm(),
            epochs: 200,
            batch_size: 10,
            seed: 7,
            net_learning_rate: 1e-2,
            out_dir: PathBuf::from("geomnet-out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(GeomError::Config("batch_size must be positive".to_string()));
        }
        if self.net_learning_rate <= 0.0 {
            return Err(GeomError::Config(
                "learning_rate must be positive".to_string(),
            ));
        }
        match &self.dataset {
            DatasetSource::Synthetic {
                classes,
                train_count,
                ..
            } => {
                if *classes != self.net.classes {
                    return Err(GeomError::Config(format!(
                        "synthetic classes {} do not match network classes {}",
                        classes, self.net.classes
                    )));
                }
                if *train_count == 0 {
                    return Err(GeomError::Config(
                        "train_count must be positive".to_string(),
                    ));
                }
            }
            DatasetSource::Sbu { path, test_fold } => {
                if !path.is_dir() {
                    return Err(GeomError::Config(format!(
                        "sbu_path {} is not a directory",
                        path.display()
                    )));
                }
                if *test_fold >= 5 {
                    return Err(GeomError::Config("sbu_fold must be 0..=4".to_string()));
                }
            }
        }
        Ok(())
    }

    fn echo(&self) -> String {
        let mut s = String::new();
        match &self.dataset {
            DatasetSource::Synthetic {
                classes,
                frames,
                sigma,
                train_count,
                test_count,
            } => {
                let _ = writeln!(s, "dataset = synthetic");
                let _ = writeln!(s, "classes = {classes}");
                let _ = writeln!(s, "frames = {frames}");
                let _ = writeln!(s, "sigma = {sigma}");
                let _ = writeln!(s, "train_count = {train_count}");
                let _ = writeln!(s, "test_count = {test_count}");
            }
            DatasetSource::Sbu { path, test_fold } => {
                let _ = writeln!(s, "dataset = sbu");
                let _ = writeln!(s, "sbu_path = {}", path.display());
                let _ = writeln!(s, "sbu_fold = {test_fold}");
            }
        }
        match &self.topology {
            TopologyChoice::Builtin(name) => {
                let _ = writeln!(s, "topology = {name}");
            }
            TopologyChoice::File(path) => {
                let _ = writeln!(s, "topology = {}", path.display());
            }
        }
        let _ = writeln!(s, "d = {}", self.net.d);
        let _ = writeln!(s, "clusters = {}", self.net.clusters);
        let _ = writeln!(s, "k = {}", self.net.k);
        let _ = writeln!(s, "kprime = {}", self.net.k_prime);
        let _ = writeln!(s, "no_pt = {}", self.net.no_pt);
        let _ = writeln!(s, "no_ltml = {}", self.net.no_ltml);
        let _ = writeln!(s, "stop_mean_gradient = {}", self.net.stop_mean_gradient);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "learning_rate = {}", self.net_learning_rate);
        let _ = writeln!(s, "adam_alpha = {}", self.adam.alpha);
        let _ = writeln!(s, "adam_epsilon = {}", self.adam.epsilon);
        let _ = writeln!(s, "adam_beta1 = {}", self.adam.beta1);
        let _ = writeln!(s, "adam_beta2 = {}", self.adam.beta2);
        let _ = writeln!(
            s,
            "metric = {}",
            if self.metric.use_trace_term {
                "trace"
            } else {
                "airm"
            }
        );
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        s
    }
}

/// Parse a flat `key = value` configuration file.
pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = RunConfig::desk_synthetic();
    let mut classes = 2usize;
    let mut frames = 20usize;
    let mut sigma = 0.02f64;
    let mut train_count = 60usize;
    let mut test_count = 20usize;
    let mut dataset_kind = "synthetic".to_string();
    let mut sbu_path = PathBuf::new();
    let mut sbu_fold = 0usize;
    let path_str = path.display().to_string();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| GeomError::Parse {
            path: path_str.clone(),
            line,
            message: "expected 'key = value'".to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| GeomError::Parse {
            path: path_str.clone(),
            line,
            message: format!("bad {what}: '{value}'"),
        };
        match key {
            "dataset" => dataset_kind = value.to_string(),
            "sbu_path" => sbu_path = PathBuf::from(value),
            "sbu_fold" => sbu_fold = value.parse().map_err(|_| bad("sbu_fold"))?,
            "classes" => classes = value.parse().map_err(|_| bad("classes"))?,
            "frames" => frames = value.parse().map_err(|_| bad("frames"))?,
            "sigma" => sigma = value.parse().map_err(|_| bad("sigma"))?,
            "train_count" => train_count = value.parse().map_err(|_| bad("train_count"))?,
            "test_count" => test_count = value.parse().map_err(|_| bad("test_count"))?,
            "topology" => {
                cfg.topology = match value {
                    "synthetic" | "toy" | "sbu" => TopologyChoice::Builtin(value.to_string()),
                    other => TopologyChoice::File(PathBuf::from(other)),
                }
            }
            "d" => cfg.net.d = value.parse().map_err(|_| bad("d"))?,
            "clusters" => cfg.net.clusters = value.parse().map_err(|_| bad("clusters"))?,
            "k" => cfg.net.k = value.parse().map_err(|_| bad("k"))?,
            "kprime" => cfg.net.k_prime = value.parse().map_err(|_| bad("kprime"))?,
            "no_pt" => cfg.net.no_pt = value.parse().map_err(|_| bad("no_pt"))?,
            "no_ltml" => cfg.net.no_ltml = value.parse().map_err(|_| bad("no_ltml"))?,
            "stop_mean_gradient" => {
                cfg.net.stop_mean_gradient = value.parse().map_err(|_| bad("stop_mean_gradient"))?
            }
            "kmeans_seed" => cfg.net.kmeans_seed = value.parse().map_err(|_| bad("kmeans_seed"))?,
            "epochs" => cfg.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
            "learning_rate" => {
                cfg.net_learning_rate = value.parse().map_err(|_| bad("learning_rate"))?
            }
            "adam_alpha" => cfg.adam.alpha = value.parse().map_err(|_| bad("adam_alpha"))?,
            "adam_epsilon" => cfg.adam.epsilon = value.parse().map_err(|_| bad("adam_epsilon"))?,
            "adam_beta1" => cfg.adam.beta1 = value.parse().map_err(|_| bad("adam_beta1"))?,
            "adam_beta2" => cfg.adam.beta2 = value.parse().map_err(|_| bad("adam_beta2"))?,
            "metric" => {
                cfg.metric = match value {
                    "airm" => MetricConfig::airm(),
                    "trace" => MetricConfig {
                        beta_denominator: 0, // resolved per use site to the matrix dimension
                        use_trace_term: true,
                    },
                    _ => return Err(bad("metric (airm or trace)")),
                }
            }
            "out" => cfg.out_dir = PathBuf::from(value),
            other => {
                return Err(GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    cfg.dataset = match dataset_kind.as_str() {
        "synthetic" => DatasetSource::Synthetic {
            classes,
            frames,
            sigma,
            train_count,
            test_count,
        },
        "sbu" => DatasetSource::Sbu {
            path: sbu_path,
            test_fold: sbu_fold,
        },
        other => {
            return Err(GeomError::Config(format!(
                "unknown dataset '{other}' (expected synthetic or sbu)"
            )))
        }
    };
    cfg.net.classes = classes;
    if let DatasetSource::Sbu { .. } = cfg.dataset {
        cfg.net.classes = 8;
    }
    Ok(cfg)
}

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub no_pt: bool,
    pub no_ltml: bool,
    pub k: Option<usize>,
    pub k_prime: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(epochs) = self.epochs {
            cfg.epochs = epochs;
        }
        if self.no_pt {
            cfg.net.no_pt = true;
        }
        if self.no_ltml {
            cfg.net.no_ltml = true;
        }
        if let Some(k) = self.k {
            cfg.net.k = k;
        }
        if let Some(kp) = self.k_prime {
            cfg.net.k_prime = kp;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
    }
}

fn topology_of(cfg: &RunConfig) -> Result<SkeletonTopology> {
    let spec: TopologySpec = match &cfg.topology {
        TopologyChoice::Builtin(name) => builtin_topology(name)?,
        TopologyChoice::File(path) => data::parse_topology_file(path)?,
    };
    SkeletonTopology::from_spec(spec)
}

struct PreparedData {
    train: Vec<(SkeletonSequence, usize)>,
    test: Vec<(SkeletonSequence, usize)>,
}

fn prepare_data(cfg: &RunConfig, topo: &SkeletonTopology) -> Result<PreparedData> {
    let normalize_split = |split: DatasetSplit| -> Vec<(SkeletonSequence, usize, usize)> {
        split
            .items
            .into_iter()
            .map(|item| (normalize(&item.sequence, topo), item.label, item.fold))
            .collect()
    };
    match &cfg.dataset {
        DatasetSource::Synthetic {
            classes,
            frames,
            sigma,
            train_count,
            test_count,
        } => {
            let spec = SyntheticSpec {
                classes: *classes,
                frames: *frames,
                sigma: *sigma,
                topology: topo.spec().clone(),
            };
            let split = generate_synthetic(&spec, train_count + test_count, cfg.seed)?;
            let items = normalize_split(split);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, (seq, label, _)) in items.into_iter().enumerate() {
                if i < *train_count {
                    train.push((seq, label));
                } else {
                    test.push((seq, label));
                }
            }
            Ok(PreparedData { train, test })
        }
        DatasetSource::Sbu { path, test_fold } => {
            let split = load_sbu(path, topo)?;
            let items = normalize_split(split);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (seq, label, fold) in items {
                if fold == *test_fold {
                    test.push((seq, label));
                } else {
                    train.push((seq, label));
                }
            }
            Ok(PreparedData { train, test })
        }
    }
}

fn threads_from_env() -> usize {
    std::env::var("GEOMNET_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

fn param_set(params: &GeomNetParams, cfg: &RunConfig) -> BTreeMap<String, ManifoldParam> {
    let euclid_scale = cfg.net_learning_rate / cfg.adam.alpha;
    let mut set = BTreeMap::new();
    for u in 0..3 {
        for v in 0..3 {
            set.insert(
                format!("conv_{}_{}", u + 1, v + 1),
                ManifoldParam::euclidean(params.conv[u * 3 + v].clone())
                    .with_lr_scale(euclid_scale),
            );
        }
    }
    if !cfg.net.no_pt {
        for i in 0..2 {
            set.insert(
                format!("w_pt_{}", i + 1),
                ManifoldParam::spd(params.w_pt[i].clone()),
            );
        }
    }
    if !cfg.net.no_ltml {
        for i in 0..2 {
            set.insert(
                format!("w_lw_{}", i + 1),
                ManifoldParam::lower_tri(params.w_lw[i].clone()),
            );
        }
    }
    set.insert(
        "w_fc".to_string(),
        ManifoldParam::euclidean(params.w_fc.clone()).with_lr_scale(euclid_scale),
    );
    set.insert(
        "b_fc".to_string(),
        ManifoldParam::euclidean(params.b_fc.clone()).with_lr_scale(euclid_scale),
    );
    set
}

fn materialize(set: &BTreeMap<String, ManifoldParam>, base: &GeomNetParams) -> GeomNetParams {
    let mut params = base.clone();
    for u in 0..3 {
        for v in 0..3 {
            if let Some(p) = set.get(&format!("conv_{}_{}", u + 1, v + 1)) {
                params.conv[u * 3 + v] = p.as_euclidean().unwrap().clone();
            }
        }
    }
    for i in 0..2 {
        if let Some(p) = set.get(&format!("w_pt_{}", i + 1)) {
            params.w_pt[i] = p.as_spd().unwrap().clone();
        }
        if let Some(p) = set.get(&format!("w_lw_{}", i + 1)) {
            params.w_lw[i] = p.as_lower_tri().unwrap().clone();
        }
    }
    if let Some(p) = set.get("w_fc") {
        params.w_fc = p.as_euclidean().unwrap().clone();
    }
    if let Some(p) = set.get("b_fc") {
        params.b_fc = p.as_euclidean().unwrap().clone();
    }
    params
}

/// Riemannian gradients for the optimizer from the Euclidean batch gradients:
/// `P sym(G) P` for the transport targets, the diagonal-rescaled lower
/// triangle for the triangular weights, identity for the rest.
fn riemannian_named_grads(
    grads: &net::GeomNetGrads,
    params: &GeomNetParams,
    run: &RunConfig,
) -> Result<BTreeMap<String, Mat>> {
    let mut named = net::named_grads(grads);
    if !run.net.no_pt {
        for i in 0..2 {
            let name = format!("w_pt_{}", i + 1);
            let g = named.get(&name).expect("present unless ablated").clone();
            let rg = riemannian_gradient(&params.w_pt[i], &g)?;
            named.insert(name, rg.vector().clone());
        }
    }
    if !run.net.no_ltml {
        for i in 0..2 {
            let name = format!("w_lw_{}", i + 1);
            let g = named.get(&name).expect("present unless ablated").clone();
            let rg = tri_riemannian_gradient(&params.w_lw[i], &g)?;
            named.insert(name, rg.vector().clone());
        }
    }
    Ok(named)
}

/// Metric used for the Adam norm of a manifold parameter of dimension `dim`.
fn metric_for_dim(run: &RunConfig, dim: usize) -> Result<MetricConfig> {
    if run.metric.use_trace_term {
        MetricConfig::trace_corrected(if run.metric.beta_denominator >= dim {
            run.metric.beta_denominator
        } else {
            dim
        })
    } else {
        Ok(MetricConfig::airm())
    }
}

/// Summary of a training run.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub final_train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub params_path: PathBuf,
    pub metrics_path: PathBuf,
}

/// Train per the configuration; writes `config_echo.txt`, `metrics.log`,
/// `params.txt` and a final `summary.txt` into the output directory.
/// Deterministic for a fixed seed. A non-finite loss aborts with a diagnostic
/// dump of the current parameter norms.
pub fn run_train(run: &RunConfig) -> Result<TrainSummary> {
    run.validate()?;
    let topo = topology_of(run)?;
    let data = prepare_data(run, &topo)?;
    if data.train.is_empty() {
        return Err(GeomError::Config("training split is empty".to_string()));
    }
    fs::create_dir_all(&run.out_dir)?;
    fs::write(run.out_dir.join("config_echo.txt"), run.echo())?;

    let threads = threads_from_env();
    let mut rng = SplitMix64::new(run.seed ^ 0x7261_696e);
    let params0 = GeomNetParams::init(&run.net, rng.next_u64());
    let mut net_cfg = run.net.clone();
    net_cfg.kmeans_seed = if run.net.kmeans_seed != 0 {
        run.net.kmeans_seed
    } else {
        rng.next_u64()
    };
    let mut set = param_set(&params0, run);
    let mut params = materialize(&set, &params0);
    let spd_metric = metric_for_dim(run, run.net.gauss_dim())?;
    // the Cholesky-space inner product is fixed; the metric argument only
    // matters for SPD parameters
    let mut metrics_log = String::new();
    let mut epoch_rng = rng.fork();
    let mut last_loss = f64::NAN;
    let mut last_acc = 0.0;

    for epoch in 0..run.epochs {
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        epoch_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        let mut counted = 0usize;
        for chunk in order.chunks(run.batch_size) {
            let batch: Vec<(&SkeletonSequence, usize)> = chunk
                .iter()
                .map(|&i| (&data.train[i].0, data.train[i].1))
                .collect();
            let pass = net::batch_loss_and_grads(&batch, &topo, &params, &net_cfg, threads)?;
            if !pass.loss.is_finite() {
                let dump = diagnostic_dump(&params);
                fs::write(run.out_dir.join("diagnostic.txt"), &dump)?;
                return Err(GeomError::Numeric(format!(
                    "non-finite loss at epoch {epoch}; parameter norms:\n{dump}"
                )));
            }
            epoch_loss += pass.loss * chunk.len() as f64;
            for (&(_, label), &pred) in batch.iter().zip(&pass.predictions) {
                if pred == label {
                    correct += 1;
                }
                counted += 1;
            }
            let named = riemannian_named_grads(&pass.grads, &params, run)?;
            adam::step_all(&mut set, &named, &run.adam, &spd_metric)?;
            params = materialize(&set, &params);
        }
        last_loss = epoch_loss / data.train.len() as f64;
        last_acc = correct as f64 / counted.max(1) as f64;
        let _ = writeln!(
            metrics_log,
            "epoch={} loss={:.6} train_acc={:.4}",
            epoch + 1,
            last_loss,
            last_acc
        );
    }

    let params_path = run.out_dir.join("params.txt");
    params.save(&params_path)?;
    let metrics_path = run.out_dir.join("metrics.log");
    fs::write(&metrics_path, &metrics_log)?;

    let test_accuracy = if data.test.is_empty() {
        None
    } else {
        let eval = evaluate(&data.test, &topo, &params, &net_cfg)?;
        Some(eval.accuracy)
    };

    let counters = diag::counters();
    let mut summary = String::new();
    let _ = writeln!(summary, "epochs = {}", run.epochs);
    let _ = writeln!(summary, "final_loss = {last_loss:.6}");
    let _ = writeln!(summary, "final_train_accuracy = {last_acc:.4}");
    if let Some(acc) = test_accuracy {
        let _ = writeln!(summary, "test_accuracy = {acc:.4}");
    }
    let _ = writeln!(summary, "eig_clamp_events = {}", counters.eig_clamps);
    let _ = writeln!(
        summary,
        "kmeans_reductions = {}",
        counters.kmeans_reductions
    );
    let _ = writeln!(summary, "skipped_adam_steps = {}", counters.skipped_steps);
    fs::write(run.out_dir.join("summary.txt"), &summary)?;

    Ok(TrainSummary {
        epochs_run: run.epochs,
        final_loss: last_loss,
        final_train_accuracy: last_acc,
        test_accuracy,
        params_path,
        metrics_path,
    })
}

fn diagnostic_dump(params: &GeomNetParams) -> String {
    let mut s = String::new();
    for u in 0..3 {
        for v in 0..3 {
            let _ = writeln!(
                s,
                "conv_{}_{} frobenius {:.6e}",
                u + 1,
                v + 1,
                params.conv[u * 3 + v].frob_norm()
            );
        }
    }
    for i in 0..2 {
        let _ = writeln!(
            s,
            "w_pt_{} frobenius {:.6e}",
            i + 1,
            params.w_pt[i].mat().frob_norm()
        );
        let _ = writeln!(
            s,
            "w_lw_{} frobenius {:.6e}",
            i + 1,
            params.w_lw[i].mat().frob_norm()
        );
    }
    let _ = writeln!(s, "w_fc frobenius {:.6e}", params.w_fc.frob_norm());
    let _ = writeln!(s, "b_fc frobenius {:.6e}", params.b_fc.frob_norm());
    s
}

/// Accuracy and per-class confusion counts.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub accuracy: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
}

fn evaluate(
    items: &[(SkeletonSequence, usize)],
    topo: &SkeletonTopology,
    params: &GeomNetParams,
    cfg: &GeomNetConfig,
) -> Result<EvalSummary> {
    if items.is_empty() {
        return Err(GeomError::Degenerate("empty evaluation set".to_string()));
    }
    let mut confusion = vec![vec![0usize; cfg.classes]; cfg.classes];
    let mut correct = 0usize;
    for (seq, label) in items {
        if *label >= cfg.classes {
            return Err(GeomError::Validation(format!(
                "label {label} is out of range for {} classes",
                cfg.classes
            )));
        }
        let (probs, _) = net::forward(seq, topo, params, cfg)?;
        let pred = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        confusion[*label][pred] += 1;
        if pred == *label {
            correct += 1;
        }
    }
    Ok(EvalSummary {
        accuracy: correct as f64 / items.len() as f64,
        confusion,
        total: items.len(),
    })
}

/// Evaluate saved parameters on the configured test split.
pub fn run_eval(params_path: &Path, run: &RunConfig) -> Result<EvalSummary> {
    run.validate()?;
    let topo = topology_of(run)?;
    let mut net_cfg = run.net.clone();
    net_cfg.kmeans_seed = if run.net.kmeans_seed != 0 {
        run.net.kmeans_seed
    } else {
        let mut rng = SplitMix64::new(run.seed ^ 0x7261_696e);
        let _ = rng.next_u64(); // skip the init draw
        rng.next_u64()
    };
    let params = GeomNetParams::load(params_path, &run.net)?;
    let data = prepare_data(run, &topo)?;
    let items = if data.test.is_empty() {
        data.train
    } else {
        data.test
    };
    evaluate(&items, &topo, &params, &net_cfg)
}

/// Run every self-check family; any failure is a numeric-property failure.
pub fn run_selfcheck(seed: u64, sizes: &[usize]) -> Result<Vec<FamilyReport>> {
    selfcheck::run_all(seed, sizes)
}
