//! Seeded pseudo-random numbers and random test-point generators.
//!
//! Everything that consumes randomness in this crate draws from [`SplitMix64`]
//! so that a run is fully determined by a single `u64` seed, bit-for-bit and
//! across platforms.

use crate::mat::Mat;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 generator (Steele, Lea, Flood 2014).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Index drawn with probability proportional to `weights`.
    ///
    /// Falls back to index 0 when the total weight vanishes.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return 0;
        }
        let target = self.next_f64() * total;
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        weights.len() - 1
    }

    /// Derive an independent stream, advancing this one.
    pub fn fork(&mut self) -> SplitMix64 {
        SplitMix64::new(self.next_u64() ^ GOLDEN_GAMMA.rotate_left(17))
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Dense matrix with i.i.d. standard normal entries.
pub fn rand_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.normal())
}

/// Random symmetric matrix with entries of the given scale.
pub fn rand_symmetric(rng: &mut SplitMix64, n: usize, scale: f64) -> Mat {
    let a = rand_matrix(rng, n, n);
    a.sym().scale(scale)
}

/// Random orthogonal matrix (eigenbasis of a random symmetric matrix).
pub fn rand_orthogonal(rng: &mut SplitMix64, n: usize) -> Mat {
    let s = rand_symmetric(rng, n, 1.0);
    let eig = s.sym_eig().expect("random symmetric matrix must decompose");
    eig.vectors
}

/// Random SPD matrix with eigenvalues drawn uniformly from [lo, hi].
pub fn rand_spd(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> Mat {
    assert!(lo > 0.0 && hi >= lo);
    let u = rand_orthogonal(rng, n);
    let vals: Vec<f64> = (0..n).map(|_| rng.range(lo, hi)).collect();
    let d = Mat::from_diag(&vals);
    u.matmul(&d).matmul(&u.t()).sym()
}

/// Random lower-triangular matrix with positive diagonal.
pub fn rand_lower_pos(rng: &mut SplitMix64, n: usize) -> Mat {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            rng.range(0.5, 1.5)
        } else if i > j {
            rng.range(-0.5, 0.5)
        } else {
            0.0
        }
    })
}

/// Random lower-triangular tangent (diagonal unconstrained in sign).
pub fn rand_lower_tangent(rng: &mut SplitMix64, n: usize, scale: f64) -> Mat {
    Mat::from_fn(n, n, |i, j| if i >= j { scale * rng.normal() } else { 0.0 })
}
