//! Lightweight global counters for numeric events worth surfacing without
//! spamming hot loops: eigenvalue clamps, K-means cluster reductions, and
//! skipped optimizer steps. The CLI prints a summary at the end of a run.

use std::sync::atomic::{AtomicU64, Ordering};

static EIG_CLAMPS: AtomicU64 = AtomicU64::new(0);
static KMEANS_REDUCTIONS: AtomicU64 = AtomicU64::new(0);
static SKIPPED_STEPS: AtomicU64 = AtomicU64::new(0);

pub fn note_eig_clamp() {
    EIG_CLAMPS.fetch_add(1, Ordering::Relaxed);
}

pub fn note_kmeans_reduction() {
    KMEANS_REDUCTIONS.fetch_add(1, Ordering::Relaxed);
}

pub fn note_skipped_step() {
    SKIPPED_STEPS.fetch_add(1, Ordering::Relaxed);
}

/// Snapshot of the counters since process start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counters {
    pub eig_clamps: u64,
    pub kmeans_reductions: u64,
    pub skipped_steps: u64,
}

pub fn counters() -> Counters {
    Counters {
        eig_clamps: EIG_CLAMPS.load(Ordering::Relaxed),
        kmeans_reductions: KMEANS_REDUCTIONS.load(Ordering::Relaxed),
        skipped_steps: SKIPPED_STEPS.load(Ordering::Relaxed),
    }
}
