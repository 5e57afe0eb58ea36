//! Deterministic synthetic datasets.
//!
//! All profiles share the domain `[0, t_end]` and draw from a ChaCha8 stream
//! seeded by `seed`, so a `(profile, seed)` pair always yields the same
//! dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use trank_core::{Dataset, ObjectId, Polyline, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ValueModel {
    /// Every object spans the whole domain; values are a reflected random walk.
    RandomWalkPositive,
    /// Whole-domain mean-reverting walk around zero.
    RandomWalkMixed,
    /// Objects tile the domain on consecutive non-overlapping spans, each
    /// carrying the same total mass.
    DisjointSupport,
    /// Short series at random offsets, mostly quiet with one heavy spike.
    Bursty,
}

impl ValueModel {
    pub fn name(self) -> &'static str {
        match self {
            ValueModel::RandomWalkPositive => "random_walk_positive",
            ValueModel::RandomWalkMixed => "random_walk_mixed",
            ValueModel::DisjointSupport => "disjoint_support",
            ValueModel::Bursty => "bursty",
        }
    }
}

/// Mass of each object under [`ValueModel::DisjointSupport`].
pub const DISJOINT_OBJECT_MASS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub model: ValueModel,
    pub m: usize,
    /// Mean segments per object.
    pub n_avg: usize,
    pub seed: u64,
    pub t_end: f64,
}

impl SynthProfile {
    pub fn new(model: ValueModel, m: usize, n_avg: usize, seed: u64) -> Self {
        Self { model, m: m.max(1), n_avg: n_avg.max(1), seed, t_end: 10_000.0 }
    }

    pub fn generate(&self) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = self.m.max(1);
        let t = self.t_end;
        let polylines = (0..m)
            .map(|i| {
                let n = self.segment_count(&mut rng);
                let (lo, hi) = match self.model {
                    ValueModel::RandomWalkPositive | ValueModel::RandomWalkMixed => (0.0, t),
                    ValueModel::DisjointSupport => (t * i as f64 / m as f64, if i + 1 == m { t } else { t * (i + 1) as f64 / m as f64 }),
                    ValueModel::Bursty => {
                        let start = rng.random_range(0.0..0.9 * t);
                        let len = rng.random_range(0.01..0.1) * t;
                        (start, (start + len).min(t))
                    }
                };
                let times = times(&mut rng, lo, hi, n);
                let values = match self.model {
                    ValueModel::RandomWalkPositive => positive_walk(&mut rng, times.len()),
                    ValueModel::RandomWalkMixed => mixed_walk(&mut rng, times.len()),
                    ValueModel::DisjointSupport => normalized(&times, positive_walk(&mut rng, times.len())),
                    ValueModel::Bursty => burst(&mut rng, &times),
                };
                let vs = times.into_iter().zip(values).map(|(t, v)| Vertex::new(t, v)).collect();
                Polyline::new(ObjectId::from_index(i), vs).expect("generated times increase")
            })
            .collect();
        Dataset::with_domain(polylines, t).expect("generated objects lie in the domain")
    }

    fn segment_count(&self, rng: &mut ChaCha8Rng) -> usize {
        let cap = 3 * self.n_avg;
        if self.n_avg == 1 {
            return 1;
        }
        let g = Geometric::new(1.0 / self.n_avg as f64).expect("p in (0, 1]");
        (1 + g.sample(rng) as usize).min(cap)
    }
}

/// `n + 1` strictly increasing times from `lo` to `hi` with exponential gaps.
fn times(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let exp = Exp::new(1.0).unwrap();
    let mut acc = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    acc.push(0.0);
    for _ in 0..n {
        s += 0.1 + exp.sample(rng);
        acc.push(s);
    }
    let mut out: Vec<f64> = acc.iter().map(|x| lo + (hi - lo) * x / s).collect();
    out[n] = hi;
    out
}

fn positive_walk(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let step = Normal::new(0.0, 5.0).unwrap();
    let mut v: f64 = rng.random_range(10.0..100.0);
    (0..len)
        .map(|_| {
            let out = v;
            v = (v + step.sample(rng)).abs();
            out
        })
        .collect()
}

fn mixed_walk(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let step = Normal::new(0.0, 5.0).unwrap();
    let mut v = Normal::new(0.0, 20.0).unwrap().sample(rng);
    (0..len)
        .map(|_| {
            let out = v;
            v = 0.95 * v + step.sample(rng);
            out
        })
        .collect()
}

fn normalized(times: &[f64], mut values: Vec<f64>) -> Vec<f64> {
    let area: f64 = times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum();
    let scale = if area > 0.0 { DISJOINT_OBJECT_MASS / area } else { 0.0 };
    if scale == 0.0 {
        let w = times[times.len() - 1] - times[0];
        return vec![DISJOINT_OBJECT_MASS / w; values.len()];
    }
    values.iter_mut().for_each(|v| *v *= scale);
    values
}

fn burst(rng: &mut ChaCha8Rng, times: &[f64]) -> Vec<f64> {
    let base = Exp::new(1.0).unwrap();
    let height = LogNormal::new(3.0, 1.0).unwrap().sample(rng);
    let (lo, hi) = (times[0], times[times.len() - 1]);
    let peak = rng.random_range(lo..=hi);
    let width = (hi - lo).max(f64::MIN_POSITIVE) * rng.random_range(0.05..0.3);
    times
        .iter()
        .map(|&t| {
            let z = (t - peak) / width;
            base.sample(rng) + height * (-z * z).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use trank_core::breakpoints::{build_breakpoints1, build_breakpoints2_efficient};

    const ALL: [ValueModel; 4] =
        [ValueModel::RandomWalkPositive, ValueModel::RandomWalkMixed, ValueModel::DisjointSupport, ValueModel::Bursty];

    #[test]
    fn deterministic_per_seed() {
        for model in ALL {
            let p = SynthProfile::new(model, 20, 8, 11);
            assert_eq!(p.generate(), p.generate());
            assert_ne!(p.generate(), SynthProfile { seed: 12, ..p }.generate());
        }
    }

    #[test]
    fn sizes_follow_n_avg() {
        for model in ALL {
            let ds = SynthProfile::new(model, 10, 5, 3).generate();
            assert_eq!(ds.m(), 10);
            assert!((10..=150).contains(&ds.n()), "{model:?}: {}", ds.n());
        }
        let ds = SynthProfile::new(ValueModel::RandomWalkPositive, 2000, 20, 1).generate();
        let mean = ds.n() as f64 / 2000.0;
        assert!((mean - 20.0).abs() < 2.0, "{mean}");
    }

    #[test]
    fn value_shapes() {
        let pos = SynthProfile::new(ValueModel::RandomWalkPositive, 30, 40, 5).generate();
        assert!(pos.is_non_negative());
        let mixed = SynthProfile::new(ValueModel::RandomWalkMixed, 30, 40, 5).generate();
        assert!(!mixed.is_non_negative());
        let bursty = SynthProfile::new(ValueModel::Bursty, 30, 40, 5).generate();
        assert!(bursty.is_non_negative());
        assert!(bursty.polylines().iter().all(|p| p.last().t - p.first_t() <= 0.1 * bursty.t_end() + 1e-9));
    }

    #[test]
    fn disjoint_spans_tile_the_domain() {
        let ds = SynthProfile::new(ValueModel::DisjointSupport, 7, 10, 2).generate();
        let ps = ds.polylines();
        assert_eq!(ps[0].first_t(), 0.0);
        assert_eq!(ps[6].last().t, ds.t_end());
        for w in ps.windows(2) {
            assert_eq!(w[0].last().t, w[1].first_t());
        }
        for p in ps {
            assert!((p.total() - DISJOINT_OBJECT_MASS).abs() < 1e-9);
        }
    }

    #[test]
    fn disjoint_equal_counts_when_fractions_fit() {
        // m objects of mass μ: BP2 emits Σ⌊μ/τ⌋, BP1 ⌊mμ/τ⌋ interior points.
        let m = 8;
        let ds = SynthProfile::new(ValueModel::DisjointSupport, m, 12, 9).generate();
        for per_object in [1.1, 3.05, 12.1] {
            let eps = 1.0 / (m as f64 * per_object);
            let b1 = build_breakpoints1(&ds, eps).unwrap();
            let b2 = build_breakpoints2_efficient(&ds, eps).unwrap();
            assert_eq!(b1.len(), b2.len(), "eps {eps}");
        }
    }
}
