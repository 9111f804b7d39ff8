//! Property-family runners behind the `selfcheck` command and the acceptance
//! suite: geodesic map inversions, transport isometries, embedding
//! determinants, group axioms, Fréchet-mean conditions, gradient checks, and
//! optimizer sanity. Each family reports its worst observed deviation against
//! its tolerance.

use crate::adam::{self, AdamConfig, ManifoldParam};
use crate::cholesky_space::{self, LowerTriPos, TriTangent};
use crate::data::{generate_synthetic, normalize, toy_topology, SyntheticSpec};
use crate::error::Result;
use crate::gaussian::{embed_gaussian, sym_dim, GaussianEmbedConfig, GaussianParams};
use crate::mat::{Mat, MatrixFnKind};
use crate::net::{self, GeomNetConfig, GeomNetParams, SkeletonTopology};
use crate::rgaussian::{
    iso_check, star_identity, star_inverse, star_product, to_group_element, RiemannianGaussian,
    StatsEmbedConfig,
};
use crate::rng::{
    rand_lower_pos, rand_lower_tangent, rand_matrix, rand_spd, rand_symmetric, SplitMix64,
};
use crate::spd::{self, MetricConfig, SpdPoint, SymTangent};
use crate::tape::check_grad;

/// Outcome of one property family.
#[derive(Debug, Clone)]
pub struct FamilyReport {
    pub name: &'static str,
    pub trials: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl FamilyReport {
    fn new(name: &'static str, trials: usize, max_deviation: f64, tolerance: f64) -> Self {
        FamilyReport {
            name,
            trials,
            max_deviation,
            tolerance,
            passed: max_deviation < tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{:6} {:28} trials {:4}  max deviation {:10.3e}  tolerance {:8.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.max_deviation,
            self.tolerance
        )
    }
}

fn rand_point(rng: &mut SplitMix64, n: usize) -> SpdPoint {
    SpdPoint::new_unchecked(rand_spd(rng, n, 0.4, 2.5))
}

fn rand_tangent(rng: &mut SplitMix64, base: &SpdPoint, scale: f64) -> SymTangent {
    SymTangent::new(base.clone(), rand_symmetric(rng, base.dim(), scale)).unwrap()
}

/// `exp`/`log` inversion on the SPD manifold.
pub fn spd_inversion_family(seed: u64, sizes: &[usize], trials: usize) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &n in sizes {
        for _ in 0..trials {
            let p = rand_point(&mut rng, n);
            let a = rand_tangent(&mut rng, &p, 0.5);
            let norm = a.vector().frob_norm();
            let a = if norm > 1.0 { a.scale(1.0 / norm) } else { a };
            let q = spd::exp_map(&p, &a)?;
            let back = spd::log_map(&p, &q)?;
            dev = dev.max(back.vector().sub(a.vector()).frob_norm());
            count += 1;
        }
    }
    Ok(FamilyReport::new("spd-exp-log-inversion", count, dev, 1e-8))
}

/// Transport isometry deviation under a caller-supplied transport rule;
/// exposed so a corrupted rule can serve as a negative control.
pub fn transport_isometry_deviation<T>(
    seed: u64,
    sizes: &[usize],
    trials: usize,
    transport: T,
) -> Result<(f64, usize)>
where
    T: Fn(&SpdPoint, &SpdPoint, &SymTangent) -> Result<SymTangent>,
{
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &n in sizes {
        let metrics = [MetricConfig::airm(), MetricConfig::trace_corrected(n + 2)?];
        for _ in 0..trials {
            let q = rand_point(&mut rng, n);
            let p = rand_point(&mut rng, n);
            let a = rand_tangent(&mut rng, &q, 0.8);
            let b = rand_tangent(&mut rng, &q, 0.8);
            let ta = transport(&q, &p, &a)?;
            let tb = transport(&q, &p, &b)?;
            for cfg in &metrics {
                let before = spd::inner(&q, &a, &b, cfg)?;
                let after = spd::inner(&p, &ta, &tb, cfg)?;
                dev = dev.max((before - after).abs() / before.abs().max(1.0));
            }
            count += 1;
        }
    }
    Ok((dev, count))
}

/// Parallel transport preserves both metric variants.
pub fn spd_transport_isometry_family(
    seed: u64,
    sizes: &[usize],
    trials: usize,
) -> Result<FamilyReport> {
    let (dev, count) = transport_isometry_deviation(seed, sizes, trials, spd::parallel_transport)?;
    Ok(FamilyReport::new(
        "spd-transport-isometry",
        count,
        dev,
        1e-8,
    ))
}

/// The transport factor squares to `P Q^-1`.
pub fn spd_transport_factor_family(
    seed: u64,
    sizes: &[usize],
    trials: usize,
) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &n in sizes {
        for _ in 0..trials {
            let q = rand_point(&mut rng, n);
            let p = rand_point(&mut rng, n);
            let e = spd::transport_factor(&q, &p)?;
            let rhs = p.mat().matmul(&q.mat().inverse()?);
            dev = dev.max(e.matmul(&e).sub(&rhs).frob_norm() / rhs.frob_norm());
            count += 1;
        }
    }
    Ok(FamilyReport::new("spd-transport-factor", count, dev, 1e-8))
}

/// The Gaussian embedding lands on determinant one for k in {0, 1, 2, 5, 10}.
pub fn gaussian_determinant_family(
    seed: u64,
    sizes: &[usize],
    trials: usize,
) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &n in sizes {
        for &k in &[0usize, 1, 2, 5, 10] {
            for _ in 0..trials {
                let sigma = rand_spd(&mut rng, n, 0.3, 3.0);
                let mu: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                let g = GaussianParams::new(mu, sigma)?;
                let p = embed_gaussian(&g, &GaussianEmbedConfig::new(k))?;
                let log_det: f64 = p.mat().sym_eig()?.values.iter().map(|&z| z.ln()).sum();
                dev = dev.max((log_det.exp() - 1.0).abs());
                count += 1;
            }
        }
    }
    Ok(FamilyReport::new(
        "gaussian-embed-determinant",
        count,
        dev,
        1e-6,
    ))
}

/// Cholesky-space exp/log inversion in both directions.
pub fn cholesky_inversion_family(
    seed: u64,
    sizes: &[usize],
    trials: usize,
) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &n in sizes {
        for _ in 0..trials {
            let k = LowerTriPos::new_unchecked(rand_lower_pos(&mut rng, n));
            let h = LowerTriPos::new_unchecked(rand_lower_pos(&mut rng, n));
            let u = cholesky_space::tri_log(&k, &h)?;
            let back = cholesky_space::tri_exp(&k, &u)?;
            dev = dev.max(back.mat().max_abs_diff(h.mat()));
            let v = TriTangent::new(k.clone(), rand_lower_tangent(&mut rng, n, 0.7))?;
            let fwd = cholesky_space::tri_exp(&k, &v)?;
            let rec = cholesky_space::tri_log(&k, &fwd)?;
            dev = dev.max(rec.vector().max_abs_diff(v.vector()));
            count += 1;
        }
    }
    Ok(FamilyReport::new(
        "cholesky-exp-log-inversion",
        count,
        dev,
        1e-10,
    ))
}

/// Cholesky-space transport isometry.
pub fn cholesky_transport_family(
    seed: u64,
    sizes: &[usize],
    trials: usize,
) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &n in sizes {
        for _ in 0..trials {
            let k = LowerTriPos::new_unchecked(rand_lower_pos(&mut rng, n));
            let h = LowerTriPos::new_unchecked(rand_lower_pos(&mut rng, n));
            let u = TriTangent::new(k.clone(), rand_lower_tangent(&mut rng, n, 0.7))?;
            let v = TriTangent::new(k.clone(), rand_lower_tangent(&mut rng, n, 0.7))?;
            let before = cholesky_space::tri_inner(&k, &u, &v)?;
            let tu = cholesky_space::tri_transport(&k, &h, &u)?;
            let tv = cholesky_space::tri_transport(&k, &h, &v)?;
            let after = cholesky_space::tri_inner(&h, &tu, &tv)?;
            dev = dev.max((before - after).abs() / before.abs().max(1.0));
            count += 1;
        }
    }
    Ok(FamilyReport::new(
        "cholesky-transport-isometry",
        count,
        dev,
        1e-10,
    ))
}

fn rand_gaussian_pair(rng: &mut SplitMix64, n_s: usize) -> RiemannianGaussian {
    let mean = rand_point(rng, n_s);
    let cov = rand_point(rng, sym_dim(n_s));
    RiemannianGaussian::new(mean, cov).unwrap()
}

fn gaussian_dev(a: &RiemannianGaussian, b: &RiemannianGaussian) -> f64 {
    let m = a.mean().mat().sub(b.mean().mat()).frob_norm();
    let c = a.covariance().mat().sub(b.covariance().mat()).frob_norm();
    m.max(c)
}

/// Group identity, associativity and inverse of the star product at
/// (n_s, k') in {(3, 1), (3, 3), (4, 2)}.
pub fn group_axioms_family(seed: u64, trials: usize) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &(n_s, k_prime) in &[(3usize, 1usize), (3, 3), (4, 2)] {
        let cfg = StatsEmbedConfig::new(k_prime);
        let e = star_identity(n_s);
        for _ in 0..trials {
            let x = rand_gaussian_pair(&mut rng, n_s);
            let y = rand_gaussian_pair(&mut rng, n_s);
            let z = rand_gaussian_pair(&mut rng, n_s);
            dev = dev.max(gaussian_dev(&star_product(&e, &x, &cfg)?, &x));
            dev = dev.max(gaussian_dev(&star_product(&x, &e, &cfg)?, &x));
            let left = star_product(&star_product(&x, &y, &cfg)?, &z, &cfg)?;
            let right = star_product(&x, &star_product(&y, &z, &cfg)?, &cfg)?;
            dev = dev.max(gaussian_dev(&left, &right));
            let inv = star_inverse(&x, &cfg)?;
            dev = dev.max(gaussian_dev(&star_product(&x, &inv, &cfg)?, &e));
            count += 1;
        }
    }
    Ok(FamilyReport::new("group-axioms", count, dev, 1e-8))
}

/// The map between block matrices and (mean, covariance) pairs is a group
/// homomorphism, at the same (n_s, k') settings.
pub fn group_homomorphism_family(seed: u64, trials: usize) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for &(n_s, k_prime) in &[(3usize, 1usize), (3, 3), (4, 2)] {
        let cfg = StatsEmbedConfig::new(k_prime);
        for _ in 0..trials {
            let k1 = to_group_element(&rand_gaussian_pair(&mut rng, n_s), &cfg)?;
            let k2 = to_group_element(&rand_gaussian_pair(&mut rng, n_s), &cfg)?;
            dev = dev.max(iso_check(&k1, &k2, &cfg)?);
            count += 1;
        }
    }
    Ok(FamilyReport::new("group-homomorphism", count, dev, 1e-8))
}

/// Fréchet mean: variational condition `|sum_i log_mean(P_i)| / L < 1e-5`
/// and convergence within the iteration cap on random 4x4 sets of ten points.
pub fn frechet_variational_family(seed: u64, trials: usize) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let metric = MetricConfig::airm();
    let mut dev = 0.0f64;
    for _ in 0..trials {
        let points: Vec<SpdPoint> = (0..10).map(|_| rand_point(&mut rng, 4)).collect();
        let result = spd::frechet_mean(&points, &metric)?;
        if !result.converged || result.iterations > spd::FRECHET_MAX_ITERS {
            dev = dev.max(1.0);
            continue;
        }
        let mut sum = Mat::zeros(4, 4);
        for p in &points {
            sum = sum.add(spd::log_map(&result.mean, p)?.vector());
        }
        dev = dev.max(sum.frob_norm() / points.len() as f64);
    }
    Ok(FamilyReport::new("frechet-variational", trials, dev, 1e-5))
}

/// Fréchet mean of two points equals the closed-form geodesic midpoint.
pub fn frechet_midpoint_family(seed: u64, trials: usize) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let metric = MetricConfig::airm();
    let mut dev = 0.0f64;
    for _ in 0..trials {
        let p = rand_point(&mut rng, 4);
        let q = rand_point(&mut rng, 4);
        let mean = spd::frechet_mean(&[p.clone(), q.clone()], &metric)?.mean;
        let (sqrt, inv_sqrt) = p.sqrt_pair()?;
        let middle = inv_sqrt.matmul(q.mat()).matmul(&inv_sqrt);
        let midpoint = sqrt
            .matmul(&middle.matrix_fn(MatrixFnKind::Sqrt)?)
            .matmul(&sqrt);
        dev = dev.max(mean.mat().sub(&midpoint).frob_norm() / midpoint.frob_norm());
    }
    Ok(FamilyReport::new("frechet-midpoint", trials, dev, 1e-8))
}

/// Per-primitive finite-difference agreement of the tape.
pub fn gradient_primitive_family(seed: u64, trials: usize) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let mut dev = 0.0f64;
    let mut count = 0;
    for trial in 0..trials {
        let n = 2 + trial % 5;
        let spd_m = rand_spd(&mut rng, n, 0.4, 2.5);
        let probe = rand_matrix(&mut rng, n, n);
        for kind in [
            MatrixFnKind::Log,
            MatrixFnKind::Exp,
            MatrixFnKind::Sqrt,
            MatrixFnKind::InvSqrt,
        ] {
            let p = probe.clone();
            let err = check_grad(
                |t, vs| {
                    let c = t.constant(p.clone());
                    let f = t.mat_fn(vs[0], kind)?;
                    let w = t.matmul(f, c);
                    Ok(t.trace(w))
                },
                std::slice::from_ref(&spd_m),
            )?;
            dev = dev.max(err);
            count += 1;
        }
        let p = probe.clone();
        let err = check_grad(
            |t, vs| {
                let c = t.constant(p.clone());
                let l = t.cholesky(vs[0])?;
                let w = t.matmul(l, c);
                Ok(t.trace(w))
            },
            std::slice::from_ref(&spd_m),
        )?;
        dev = dev.max(err);
        count += 1;
        let err = check_grad(
            |t, vs| {
                let v = t.vec_sym(vs[0]);
                Ok(t.log_sum_exp(v))
            },
            &[rand_symmetric(&mut rng, n, 1.0)],
        )?;
        dev = dev.max(err);
        count += 1;
    }
    Ok(FamilyReport::new("gradient-primitives", count, dev, 1e-4))
}

/// Directional gradient check of the composed network loss on the toy
/// topology, at a generic random parameter point.
pub fn gradient_composed_family(seed: u64) -> Result<FamilyReport> {
    let spec = SyntheticSpec {
        classes: 2,
        frames: 5,
        sigma: 0.05,
        topology: toy_topology(),
    };
    let topo = SkeletonTopology::from_spec(spec.topology.clone())?;
    let split = generate_synthetic(&spec, 2, 17)?;
    let seq = normalize(&split.items[0].sequence, &topo);
    let mut cfg = GeomNetConfig::new(3, 2, 1, 1, 2);
    cfg.kmeans_seed = 9;
    let mut params = GeomNetParams::init(&cfg, 11);
    let mut rng = SplitMix64::new(seed ^ 0xabcdef);
    params.w_pt = [
        SpdPoint::new(rand_spd(&mut rng, cfg.gauss_dim(), 0.5, 2.0))?,
        SpdPoint::new(rand_spd(&mut rng, cfg.gauss_dim(), 0.5, 2.0))?,
    ];
    params.w_lw = [
        LowerTriPos::new(rand_lower_pos(&mut rng, cfg.group_dim()))?,
        LowerTriPos::new(rand_lower_pos(&mut rng, cfg.group_dim()))?,
    ];
    let report = net::check_loss_gradient(&seq, 1, &topo, &params, &cfg, seed)?;
    Ok(FamilyReport::new(
        "gradient-composed-loss",
        report.directions_checked,
        report.max_rel_err,
        1e-4,
    ))
}

/// Riemannian Adam drives the squared distance to a random SPD target below
/// 1e-6 within 1000 steps, with manifold membership asserted along the way.
pub fn adam_spd_descent_family(seed: u64, targets: usize) -> Result<FamilyReport> {
    let mut rng = SplitMix64::new(seed);
    let cfg = AdamConfig {
        alpha: 0.05,
        ..AdamConfig::default()
    };
    let metric = MetricConfig::airm();
    let mut dev = 0.0f64;
    for _ in 0..targets {
        let target = rand_point(&mut rng, 3);
        let mut param = ManifoldParam::spd(SpdPoint::identity(3));
        let mut best = f64::INFINITY;
        for _ in 0..1000 {
            let x = param.as_spd().unwrap().clone();
            let grad = spd::log_map(&x, &target)?.vector().scale(-2.0);
            adam::step(&mut param, &grad, &cfg, &metric)?;
            if param.as_spd().unwrap().mat().cholesky_raw().is_none() {
                dev = dev.max(1.0);
                break;
            }
            let d = spd::distance(param.as_spd().unwrap(), &target, &metric)?;
            best = best.min(d * d);
            if best < 1e-8 {
                break;
            }
        }
        let final_d = spd::distance(param.as_spd().unwrap(), &target, &metric)?;
        dev = dev.max((final_d * final_d).min(best));
    }
    Ok(FamilyReport::new("adam-spd-descent", targets, dev, 1e-6))
}

/// The Euclidean path of the optimizer agrees with classical per-entry Adam
/// step by step.
pub fn adam_euclidean_parity_family(steps: usize) -> Result<FamilyReport> {
    let cfg = AdamConfig::default();
    let metric = MetricConfig::airm();
    let mut x = 3.0f64;
    let mut m = 0.0f64;
    let mut v = 0.0f64;
    let mut param = ManifoldParam::euclidean(Mat::scalar(x));
    let mut dev = 0.0f64;
    for t in 1..=steps {
        let g = 2.0 * x;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        let m_hat = m / (1.0 - cfg.beta1.powi(t as i32));
        let v_hat = v / (1.0 - cfg.beta2.powi(t as i32));
        x -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);

        let g_mat = Mat::scalar(2.0 * param.as_euclidean().unwrap().as_scalar());
        adam::step(&mut param, &g_mat, &cfg, &metric)?;
        dev = dev.max((param.as_euclidean().unwrap().as_scalar() - x).abs());
    }
    Ok(FamilyReport::new(
        "adam-euclidean-parity",
        steps,
        dev,
        1e-10,
    ))
}

/// Run every family at the given sizes.
pub fn run_all(seed: u64, sizes: &[usize]) -> Result<Vec<FamilyReport>> {
    let trials = 20;
    Ok(vec![
        spd_inversion_family(seed, sizes, trials)?,
        spd_transport_isometry_family(seed.wrapping_add(1), sizes, trials)?,
        spd_transport_factor_family(seed.wrapping_add(2), sizes, trials)?,
        gaussian_determinant_family(seed.wrapping_add(3), sizes, 5)?,
        cholesky_inversion_family(seed.wrapping_add(4), sizes, trials)?,
        cholesky_transport_family(seed.wrapping_add(5), sizes, trials)?,
        group_axioms_family(seed.wrapping_add(6), 10)?,
        group_homomorphism_family(seed.wrapping_add(7), 10)?,
        frechet_variational_family(seed.wrapping_add(8), 10)?,
        frechet_midpoint_family(seed.wrapping_add(9), 10)?,
        gradient_primitive_family(seed.wrapping_add(10), 10)?,
        gradient_composed_family(11)?,
        adam_spd_descent_family(seed.wrapping_add(12), 3)?,
        adam_euclidean_parity_family(200)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_families_pass_at_default_sizes() {
        let reports = run_all(424242, &[2, 3, 4]).unwrap();
        for r in &reports {
            assert!(r.passed, "{}", r.line());
        }
    }

    #[test]
    fn seed_change_leaves_outcomes_stable() {
        for seed in [7u64, 99] {
            let reports = run_all(seed, &[2, 3]).unwrap();
            assert!(
                reports.iter().all(|r| r.passed),
                "seed {seed} broke a family"
            );
        }
    }

    #[test]
    fn corrupted_transport_fails_the_isometry_family() {
        // negative control: drop the E^T factor from the transport
        let corrupted = |q: &SpdPoint, p: &SpdPoint, a: &SymTangent| -> Result<SymTangent> {
            let e = spd::transport_factor(q, p)?;
            SymTangent::new(p.clone(), e.matmul(a.vector()).sym())
        };
        let (dev, _) = transport_isometry_deviation(5, &[3], 10, corrupted).unwrap();
        assert!(dev > 1e-3, "corrupted transport went unnoticed: {dev:e}");
    }
}
