//! The full-scale preset (d = 9, 180 clusters, (k, k') = (2, 3)) on a short
//! 15-joint two-person sequence: dimensions compose, the cluster count
//! reduces gracefully on desk-scale data, and one forward/backward pass
//! stays finite.

use geomnet::data::{generate_synthetic, normalize, sbu_topology, SyntheticSpec};
use geomnet::net::{self, GeomNetConfig, GeomNetParams, SkeletonTopology};

#[test]
fn paper_preset_dimensions_compose() {
    let cfg = GeomNetConfig::paper_sbu();
    assert_eq!(cfg.gauss_dim(), 11);
    assert_eq!(cfg.stats_dim(), 66);
    assert_eq!(cfg.group_dim(), 69);
    assert_eq!(cfg.logit_input_dim(), 2 * 69 * 70 / 2);

    let ntu = GeomNetConfig::paper_ntu(60);
    assert_eq!(ntu.k_prime, 1);
    assert_eq!(ntu.classes, 60);
}

#[test]
fn paper_preset_forward_and_backward_run() {
    let spec = SyntheticSpec {
        classes: 8,
        frames: 6,
        sigma: 0.03,
        topology: sbu_topology(),
    };
    let topo = SkeletonTopology::from_spec(spec.topology.clone()).unwrap();
    let split = generate_synthetic(&spec, 1, 3).unwrap();
    let seq = normalize(&split.items[0].sequence, &topo);

    let mut cfg = GeomNetConfig::paper_sbu();
    cfg.kmeans_seed = 5;
    let params = GeomNetParams::init(&cfg, 1);

    let (probs, plan) = net::forward(&seq, &topo, &params, &cfg).unwrap();
    assert_eq!(probs.len(), 8);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    // 12 arm joints x 6 frames = 72 vectors cannot fill 180 clusters;
    // the effective count shrinks but every cluster keeps >= 2 members
    assert!(plan.streams[0].effective_l >= 1);
    assert!(plan.streams[0].effective_l < 180);

    let pass = net::sequence_loss_and_grads(&seq, 3, &topo, &params, &cfg).unwrap();
    assert!(pass.loss.is_finite());
    assert!(pass.grads.w_fc.is_finite());
    assert!(pass.grads.w_pt[0].as_ref().unwrap().is_finite());
    assert!(pass.grads.w_lw[0].as_ref().unwrap().is_finite());
}
