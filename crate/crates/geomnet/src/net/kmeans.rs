//! Deterministic K-means over feature vectors: seeded K-means++
//! initialization, Lloyd iterations with lowest-index tie breaking, and a
//! final merge pass so every surviving cluster has at least two members
//! (single clusters excepted).

use crate::diag;
use crate::rng::SplitMix64;

/// Cluster assignments over the input points, relabeled to `0..effective_l`.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub effective_l: usize,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        for (a, b) in points[i].iter().zip(&points[j]) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    let mut distinct = 0;
    for (idx, &o) in order.iter().enumerate() {
        if idx == 0 || points[o] != points[order[idx - 1]] {
            distinct += 1;
        }
    }
    distinct
}

/// Cluster `points` into at most `l` groups.
///
/// When the input has fewer than `2 l` distinct vectors the target count is
/// reduced to half the distinct count (at least one) and a warning counter is
/// bumped. Assignment ties break toward the lowest cluster index; empty
/// clusters keep their previous centroid during Lloyd and are dropped at the
/// end; clusters left with a single member are merged into the nearest
/// cluster that has at least two.
pub fn cluster(points: &[Vec<f64>], l: usize, seed: u64, max_iters: usize) -> Clustering {
    assert!(!points.is_empty(), "cluster: no points");
    assert!(l >= 1, "cluster: l must be at least 1");
    let distinct = count_distinct(points);
    let l_eff = if distinct < 2 * l {
        diag::note_kmeans_reduction();
        (distinct / 2).max(1)
    } else {
        l
    };

    let mut rng = SplitMix64::new(seed);
    // K-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(l_eff);
    centroids.push(points[rng.below(points.len())].clone());
    let mut min_d: Vec<f64> = points.iter().map(|p| dist_sq(p, &centroids[0])).collect();
    while centroids.len() < l_eff {
        let idx = rng.weighted(&min_d);
        centroids.push(points[idx].clone());
        let c = centroids.last().unwrap();
        for (m, p) in min_d.iter_mut().zip(points) {
            let d = dist_sq(p, c);
            if d < *m {
                *m = d;
            }
        }
    }

    // Lloyd iterations
    let mut assignments = vec![0usize; points.len()];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = dist_sq(p, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = dist_sq(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, (sum, count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                for (cc, s) in c.iter_mut().zip(sum) {
                    *cc = s / *count as f64;
                }
            }
        }
    }

    merge_small_clusters(points, &mut assignments, &mut centroids);
    Clustering {
        effective_l: centroids.len(),
        assignments,
        centroids,
    }
}

fn merge_small_clusters(
    points: &[Vec<f64>],
    assignments: &mut [usize],
    centroids: &mut Vec<Vec<f64>>,
) {
    loop {
        let k = centroids.len();
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        // recompute centroids from actual members
        let dim = points[0].len();
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mut sum = vec![0.0; dim];
            for (p, &a) in points.iter().zip(assignments.iter()) {
                if a == c {
                    for (s, x) in sum.iter_mut().zip(p) {
                        *s += x;
                    }
                }
            }
            for s in sum.iter_mut() {
                *s /= counts[c] as f64;
            }
            centroids[c] = sum;
        }
        let singleton = (0..k).find(|&c| counts[c] == 1);
        let has_host = (0..k).any(|c| counts[c] >= 2);
        if let (Some(small), true) = (singleton, has_host) {
            // move its member to the nearest cluster with >= 2 members
            let mut best = None;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                if counts[c] >= 2 {
                    let d = dist_sq(&centroids[small], &centroids[c]);
                    if d < best_d {
                        best_d = d;
                        best = Some(c);
                    }
                }
            }
            let target = best.expect("a host cluster exists");
            for a in assignments.iter_mut() {
                if *a == small {
                    *a = target;
                }
            }
            continue;
        }
        // drop empty clusters and relabel compactly
        if counts.contains(&0) {
            let mut remap = vec![usize::MAX; k];
            let mut kept = Vec::new();
            for c in 0..k {
                if counts[c] > 0 {
                    remap[c] = kept.len();
                    kept.push(centroids[c].clone());
                }
            }
            for a in assignments.iter_mut() {
                *a = remap[*a];
            }
            *centroids = kept;
            continue;
        }
        break;
    }
}
