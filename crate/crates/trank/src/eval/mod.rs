//! Synthetic data, query workloads, quality reports and IO benchmarks.

pub mod bench;
pub mod quality;
pub mod synth;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trank_core::{Aggregate, QuerySpec};

pub use bench::{bench, BenchRow};
pub use quality::{quality, QualityReport, QualitySummary};
pub use synth::{SynthProfile, ValueModel};

/// A fixed list of queries, reproducible from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub queries: Vec<QuerySpec>,
}

impl Workload {
    /// `count` intervals of length `fraction · t_end` at uniform offsets.
    pub fn fixed_fraction(t_end: f64, count: usize, fraction: f64, k: usize, aggregate: Aggregate, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = fraction.clamp(0.0, 1.0) * t_end;
        let queries = (0..count)
            .map(|_| {
                let t1 = rng.random_range(0.0..=t_end - len);
                let t2 = (t1 + len).min(t_end);
                QuerySpec::new(k, t1, t2, aggregate).expect("valid query")
            })
            .collect();
        Self { queries }
    }

    /// Like [`Workload::fixed_fraction`], but starts are uniform in
    /// `[0, start_span · t_end]` whatever the length, so workloads of
    /// different lengths share their start distribution (and with the same
    /// seed, their starts). Lengths are cut at `t_end`.
    pub fn anchored(t_end: f64, count: usize, fraction: f64, start_span: f64, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = fraction.clamp(0.0, 1.0) * t_end;
        let hi = start_span.clamp(0.0, 1.0) * t_end;
        let queries = (0..count)
            .map(|_| {
                let t1 = rng.random_range(0.0..=hi);
                QuerySpec::sum(k, t1, (t1 + len).min(t_end)).expect("valid query")
            })
            .collect();
        Self { queries }
    }

    /// `count` intervals with uniform endpoints and `k` uniform in `1..=k_max`.
    pub fn uniform(t_end: f64, count: usize, k_max: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let queries = (0..count)
            .map(|_| {
                let a = rng.random_range(0.0..=t_end);
                let b = rng.random_range(0.0..=t_end);
                let k = rng.random_range(1..=k_max.max(1));
                QuerySpec::sum(k, a.min(b), a.max(b)).expect("valid query")
            })
            .collect();
        Self { queries }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}
