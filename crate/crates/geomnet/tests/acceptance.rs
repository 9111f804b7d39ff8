//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured worst deviation (run with `--nocapture` to see them).

use std::time::Instant;

use geomnet::adam::{self, AdamConfig, ManifoldParam};
use geomnet::cli::{DatasetSource, RunConfig};
use geomnet::data::{generate_synthetic, normalize, toy_topology, SyntheticSpec};
use geomnet::mat::{Mat, MatrixFnKind};
use geomnet::net::{self, layers, GeomNetConfig, GeomNetParams, SkeletonTopology};
use geomnet::rng::{rand_lower_pos, rand_spd, SplitMix64};
use geomnet::selfcheck;
use geomnet::spd::{self, MetricConfig, SpdPoint};
use geomnet::tape::{check_grad, Tape, Var};

const SIZES: [usize; 5] = [2, 3, 4, 5, 6];

#[test]
fn criterion_1_geometry_suite() {
    let start = Instant::now();
    let trials = 100;

    let inv = selfcheck::spd_inversion_family(1001, &SIZES, trials).unwrap();
    assert!(inv.passed, "{}", inv.line());

    let iso = selfcheck::spd_transport_isometry_family(1002, &SIZES, trials).unwrap();
    assert!(iso.passed, "{}", iso.line());

    let factor = selfcheck::spd_transport_factor_family(1003, &SIZES, trials).unwrap();
    assert!(factor.passed, "{}", factor.line());

    // 100 trials per (size, k) pair with k in {0, 1, 2, 5, 10}
    let det = selfcheck::gaussian_determinant_family(1004, &SIZES, 20).unwrap();
    assert!(det.passed, "{}", det.line());

    let tri_inv = selfcheck::cholesky_inversion_family(1005, &SIZES, trials).unwrap();
    assert!(tri_inv.passed, "{}", tri_inv.line());

    let tri_iso = selfcheck::cholesky_transport_family(1006, &SIZES, trials).unwrap();
    assert!(tri_iso.passed, "{}", tri_iso.line());

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "geometry suite took {elapsed:.1} s");
    println!(
        "criterion 1 PASS: geometry suite in {elapsed:.1} s; worst deviations \
         exp/log {:.2e}, isometry {:.2e}, factor {:.2e}, determinant {:.2e}, \
         cholesky inv {:.2e}, cholesky isometry {:.2e}",
        inv.max_deviation,
        iso.max_deviation,
        factor.max_deviation,
        det.max_deviation,
        tri_inv.max_deviation,
        tri_iso.max_deviation
    );
}

#[test]
fn criterion_2_algebra_suite() {
    // 100 random pairs/triples at each (n_s, k') in {(3,1), (3,3), (4,2)}
    let axioms = selfcheck::group_axioms_family(2001, 100).unwrap();
    assert!(axioms.passed, "{}", axioms.line());
    let homo = selfcheck::group_homomorphism_family(2002, 100).unwrap();
    assert!(homo.passed, "{}", homo.line());
    println!(
        "criterion 2 PASS: group axioms {:.2e}, homomorphism {:.2e} (tolerance 1e-8)",
        axioms.max_deviation, homo.max_deviation
    );
}

#[test]
fn criterion_3_frechet_mean() {
    // variational condition and convergence within 50 iterations on
    // 100 random 4x4 sets of 10 points
    let variational = selfcheck::frechet_variational_family(3001, 100).unwrap();
    assert!(variational.passed, "{}", variational.line());
    let midpoint = selfcheck::frechet_midpoint_family(3002, 100).unwrap();
    assert!(midpoint.passed, "{}", midpoint.line());

    // commuting closed form: elementwise geometric mean of a diagonal pair
    let metric = MetricConfig::airm();
    let a = SpdPoint::new(Mat::from_diag(&[1.0, 1.0])).unwrap();
    let b = SpdPoint::new(Mat::from_diag(&[4.0, 4.0])).unwrap();
    let mean = spd::frechet_mean(&[a, b], &metric).unwrap();
    assert!(mean.converged && mean.iterations <= 50);
    let dev = mean.mean.mat().max_abs_diff(&Mat::from_diag(&[2.0, 2.0]));
    assert!(dev < 1e-8, "commuting mean off by {dev:e}");
    println!(
        "criterion 3 PASS: variational {:.2e} (tol 1e-5), midpoint {:.2e}, commuting {dev:.2e}",
        variational.max_deviation, midpoint.max_deviation
    );
}

fn toy_instance() -> (
    SkeletonTopology,
    geomnet::data::SkeletonSequence,
    GeomNetConfig,
) {
    // 2 persons x 4 joints, 5 frames, d = 3, 2 clusters, (k, k') = (1, 1)
    let spec = SyntheticSpec {
        classes: 2,
        frames: 5,
        sigma: 0.05,
        topology: toy_topology(),
    };
    let topo = SkeletonTopology::from_spec(spec.topology.clone()).unwrap();
    let split = generate_synthetic(&spec, 2, 17).unwrap();
    let seq = normalize(&split.items[0].sequence, &topo);
    let mut cfg = GeomNetConfig::new(3, 2, 1, 1, 2);
    cfg.kmeans_seed = 9;
    (topo, seq, cfg)
}

#[test]
fn criterion_4_gradient_suite() {
    let start = Instant::now();
    let mut rng = SplitMix64::new(4001);
    let mut worst_layer = 0.0f64;

    // per-layer checks, each against entrywise central differences
    for trial in 0..5 {
        let n = 3 + trial % 3;

        // convolution features (linear layer), reduced through a probe
        let (topo, seq, _) = toy_instance();
        let sums = layers::conv_input_sums(&seq, &topo, trial % 2).unwrap();
        let weights: Vec<Mat> = (0..9)
            .map(|_| geomnet::rng::rand_matrix(&mut rng, 3, 3))
            .collect();
        let probe = geomnet::rng::rand_matrix(&mut rng, sums[0].cols(), 3);
        let sums_c = sums.clone();
        let p = probe.clone();
        let err = check_grad(
            |t, vs| {
                let feat = layers::conv_features(t, vs, &sums_c);
                let c = t.constant(p.clone());
                let w = t.matmul(feat, c);
                Ok(t.trace(w))
            },
            &weights,
        )
        .unwrap();
        worst_layer = worst_layer.max(err);

        // per-cluster Gaussian embedding
        let feats = geomnet::rng::rand_matrix(&mut rng, 3, 6);
        let members = [0usize, 1, 3, 5];
        let probe = geomnet::rng::rand_matrix(&mut rng, 4, 4);
        let p = probe.clone();
        let err = check_grad(
            |t, vs| {
                let emb = layers::gaussian_embed_cluster(t, vs[0], &members, 1)?;
                let c = t.constant(p.clone());
                let w = t.matmul(emb, c);
                Ok(t.trace(w))
            },
            &[feats],
        )
        .unwrap();
        worst_layer = worst_layer.max(err);

        // SPD statistics: unrolled mean + transported covariance
        let pts: Vec<Mat> = (0..3).map(|_| rand_spd(&mut rng, n, 0.5, 2.0)).collect();
        let target = rand_spd(&mut rng, n, 0.5, 2.0);
        let dim = n * (n + 1) / 2;
        let probe = geomnet::rng::rand_matrix(&mut rng, dim, dim);
        let mut inputs = pts.clone();
        inputs.push(target.clone());
        let mut t0 = Tape::new();
        let vs0: Vec<Var> = inputs.iter().map(|m| t0.constant(m.clone())).collect();
        let (_, iters) = layers::frechet_mean_unrolled(&mut t0, &vs0[..3], None).unwrap();
        let p = probe.clone();
        let err = check_grad(
            |t, vs| {
                let (mean, _) = layers::frechet_mean_unrolled(t, &vs[..3], Some(iters))?;
                let cov = layers::transported_covariance_node(t, &vs[..3], mean, Some(vs[3]))?;
                let c = t.constant(p.clone());
                let w = t.matmul(cov, c);
                Ok(t.trace(w))
            },
            &inputs,
        )
        .unwrap();
        worst_layer = worst_layer.max(err);

        // group embedding, triangular layer, log-Euclidean projection, head
        let cov = rand_spd(&mut rng, dim, 0.5, 2.0);
        let mean_leaf = rand_spd(&mut rng, n, 0.5, 2.0);
        let w_lw = rand_lower_pos(&mut rng, dim + 1);
        let w_fc = geomnet::rng::rand_matrix(&mut rng, 2, (dim + 1) * (dim + 2) / 2);
        let err = check_grad(
            |t, vs| {
                let chol = t.cholesky(vs[0])?;
                let g = dim + 1;
                let mut group = t.place(chol, g, g, 0, 0);
                let log_mean = t.mat_fn(vs[1], MatrixFnKind::Log)?;
                let lv = t.vec_sym(log_mean);
                let row = t.transpose(lv);
                let ones = t.constant(Mat::from_fn(1, 1, |_, _| 1.0));
                let phi = t.matmul(ones, row);
                let placed = t.place(phi, g, g, dim, 0);
                group = t.add(group, placed);
                let mut eye = Mat::zeros(g, g);
                eye[(dim, dim)] = 1.0;
                let eye = t.constant(eye);
                group = t.add(group, eye);
                let d_node = t.matmul(group, vs[2]);
                let dt = t.transpose(d_node);
                let ddt = t.matmul(d_node, dt);
                let e = t.mat_fn(ddt, MatrixFnKind::Log)?;
                let ev = t.vec_sym(e);
                let logits = t.matmul(vs[3], ev);
                let lse = t.log_sum_exp(logits);
                let picked = t.entry(logits, 0, 0);
                Ok(t.sub(lse, picked))
            },
            &[cov, mean_leaf, w_lw, w_fc],
        )
        .unwrap();
        worst_layer = worst_layer.max(err);
    }
    assert!(
        worst_layer < 1e-4,
        "per-layer gradient error {worst_layer:e}"
    );

    // composed loss on the pinned toy topology at a generic parameter point,
    // including tangent-space probes for the transport targets and the
    // triangular weights
    let (topo, seq, cfg) = toy_instance();
    let mut params = GeomNetParams::init(&cfg, 11);
    let mut prng = SplitMix64::new(11 ^ 0xabcdef);
    params.w_pt = [
        SpdPoint::new(rand_spd(&mut prng, cfg.gauss_dim(), 0.5, 2.0)).unwrap(),
        SpdPoint::new(rand_spd(&mut prng, cfg.gauss_dim(), 0.5, 2.0)).unwrap(),
    ];
    params.w_lw = [
        geomnet::cholesky_space::LowerTriPos::new(rand_lower_pos(&mut prng, cfg.group_dim()))
            .unwrap(),
        geomnet::cholesky_space::LowerTriPos::new(rand_lower_pos(&mut prng, cfg.group_dim()))
            .unwrap(),
    ];
    let report = net::check_loss_gradient(&seq, 1, &topo, &params, &cfg, 4002).unwrap();
    assert!(
        report.max_rel_err < 1e-4,
        "composed loss gradient error {:e}",
        report.max_rel_err
    );
    for (name, norm) in &report.block_norms {
        assert!(
            *norm > 1e-4,
            "parameter block {name} had no meaningful gradient to probe ({norm:e})"
        );
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "gradient suite took {elapsed:.1} s");
    println!(
        "criterion 4 PASS: per-layer {worst_layer:.2e}, composed {:.2e} over {} probes, {elapsed:.1} s",
        report.max_rel_err, report.directions_checked
    );
}

#[test]
fn criterion_5_optimizer_suite() {
    // Riemannian Adam drives dist^2 to 20 random SPD(3) targets below 1e-6
    // within 1000 steps from the identity, staying on the manifold throughout
    let cfg = AdamConfig {
        alpha: 0.05,
        ..AdamConfig::default()
    };
    let metric = MetricConfig::airm();
    let mut rng = SplitMix64::new(5001);
    let mut worst = 0.0f64;
    let mut worst_steps = 0usize;
    for trial in 0..20 {
        let target = SpdPoint::new(rand_spd(&mut rng, 3, 0.4, 2.5)).unwrap();
        let mut param = ManifoldParam::spd(SpdPoint::identity(3));
        let mut reached = None;
        for step_idx in 1..=1000 {
            let x = param.as_spd().unwrap().clone();
            let grad = spd::log_map(&x, &target).unwrap().vector().scale(-2.0);
            adam::step(&mut param, &grad, &cfg, &metric).unwrap();
            assert!(
                param.as_spd().unwrap().mat().cholesky_raw().is_some(),
                "trial {trial}: left the manifold at step {step_idx}"
            );
            let d = spd::distance(param.as_spd().unwrap(), &target, &metric).unwrap();
            if d * d < 1e-6 {
                reached = Some((step_idx, d * d));
                break;
            }
        }
        let (steps, dsq) = reached.unwrap_or_else(|| {
            let d = spd::distance(param.as_spd().unwrap(), &target, &metric).unwrap();
            (1000, d * d)
        });
        assert!(
            dsq < 1e-6,
            "trial {trial}: dist^2 {dsq:e} after {steps} steps"
        );
        worst = worst.max(dsq);
        worst_steps = worst_steps.max(steps);
    }

    // Euclidean degeneration matches classical Adam per step
    let parity = selfcheck::adam_euclidean_parity_family(500).unwrap();
    assert!(parity.passed, "{}", parity.line());

    println!(
        "criterion 5 PASS: 20 targets below 1e-6 within {worst_steps} steps (worst dist^2 {worst:.2e}); \
         euclidean parity {:.2e} (tol 1e-10)",
        parity.max_deviation
    );
}

#[test]
fn criterion_6_end_to_end_desk_run() {
    let start = Instant::now();
    let out = std::env::temp_dir().join(format!("geomnet-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&out);

    // 60 train / 20 test synthetic two-class sequences, sigma 0.02, seed 7,
    // d = 6, 8 clusters, (k, k') = (2, 1), 200 epochs
    let mut run = RunConfig::desk_synthetic();
    run.out_dir = out.join("main");
    assert!(matches!(
        run.dataset,
        DatasetSource::Synthetic {
            classes: 2,
            sigma,
            train_count: 60,
            test_count: 20,
            ..
        } if sigma == 0.02
    ));
    assert_eq!(run.seed, 7);
    assert_eq!(run.epochs, 200);
    assert_eq!((run.net.d, run.net.clusters), (6, 8));
    assert_eq!((run.net.k, run.net.k_prime), (2, 1));

    let summary = geomnet::cli::run_train(&run).unwrap();
    let test_acc = summary.test_accuracy.unwrap();
    assert!(
        summary.final_train_accuracy >= 0.95,
        "train accuracy {}",
        summary.final_train_accuracy
    );
    assert!(test_acc >= 0.85, "test accuracy {test_acc}");

    // ablation consistency: the no-transport run takes the mean-target path
    let mut nopt_cfg = run.net.clone();
    nopt_cfg.no_pt = true;
    nopt_cfg.kmeans_seed = 3;
    let spec = SyntheticSpec::two_class(0.02);
    let topo = SkeletonTopology::from_spec(spec.topology.clone()).unwrap();
    let split = generate_synthetic(&spec, 2, 7).unwrap();
    let seq = normalize(&split.items[0].sequence, &topo);
    let params = GeomNetParams::init(&nopt_cfg, 7);
    let (_, plan) = net::sequence_loss(&seq, 0, &topo, &params, &nopt_cfg, None).unwrap();
    assert!(
        plan.streams.iter().all(|s| s.used_mean_target),
        "no-pt run did not take the mean-target path"
    );
    // and the covariance at the mean equals the identity-transport statistic
    let mut rng = SplitMix64::new(6001);
    let mats: Vec<Mat> = (0..4).map(|_| rand_spd(&mut rng, 3, 0.5, 2.0)).collect();
    let mut tape = Tape::new();
    let vars: Vec<Var> = mats.iter().map(|m| tape.constant(m.clone())).collect();
    let (mean_var, _) = layers::frechet_mean_unrolled(&mut tape, &vars, None).unwrap();
    let cov_var = layers::transported_covariance_node(&mut tape, &vars, mean_var, None).unwrap();
    let points: Vec<SpdPoint> = mats
        .iter()
        .map(|m| SpdPoint::new(m.clone()).unwrap())
        .collect();
    let mean = spd::frechet_mean(&points, &MetricConfig::airm())
        .unwrap()
        .mean;
    let oracle = spd::transported_covariance(&points, &mean, &mean).unwrap();
    let dev = tape.value(cov_var).max_abs_diff(oracle.mat());
    assert!(
        dev < 1e-8,
        "no-pt covariance deviates from the mean-target statistic by {dev:e}"
    );

    // the no-LTML run keeps the triangular weights at the identity
    let mut noltml = run.clone();
    noltml.net.no_ltml = true;
    noltml.epochs = 3;
    noltml.out_dir = out.join("no-ltml");
    let s = geomnet::cli::run_train(&noltml).unwrap();
    let p = GeomNetParams::load(&s.params_path, &noltml.net).unwrap();
    for w in &p.w_lw {
        assert_eq!(
            w.mat().max_abs_diff(&Mat::identity(noltml.net.group_dim())),
            0.0,
            "triangular weights moved under no-ltml"
        );
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "desk run took {elapsed:.1} s");
    println!(
        "criterion 6 PASS: train {:.3}, test {test_acc:.3}, no-pt path asserted, \
         no-ltml weights frozen, {elapsed:.1} s",
        summary.final_train_accuracy
    );
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn criterion_7_sbu_reproduction_optional() {
    let Some(dir) = std::env::var_os("GEOMNET_SBU_DIR") else {
        println!(
            "criterion 7 SKIP: set GEOMNET_SBU_DIR to an SBU-layout directory to run the \
             5-fold protocol with the full-scale preset (d = 9, 180 clusters, (k, k') = (2, 3), \
             batch 30, 600 epochs); the reported mean accuracy is a reference target, not a gate"
        );
        return;
    };
    let dir = std::path::PathBuf::from(dir);
    let out = std::env::temp_dir().join(format!("geomnet-sbu-{}", std::process::id()));
    let mut accs = Vec::new();
    for fold in 0..5 {
        let mut run = RunConfig::desk_synthetic();
        run.dataset = DatasetSource::Sbu {
            path: dir.clone(),
            test_fold: fold,
        };
        run.net = GeomNetConfig::paper_sbu();
        run.epochs = 600;
        run.batch_size = 30;
        run.net_learning_rate = 1e-2;
        run.out_dir = out.join(format!("fold{fold}"));
        let summary = geomnet::cli::run_train(&run).unwrap();
        let acc = summary.test_accuracy.unwrap_or(0.0);
        println!("fold {fold}: test accuracy {acc:.4}");
        accs.push(acc);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    println!(
        "criterion 7 REPORT: 5-fold mean accuracy {:.4} (reference target 0.9633, gap {:+.4})",
        mean,
        mean - 0.9633
    );
}
