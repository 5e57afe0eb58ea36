//! Build and query cost per method, in page accesses and wall time.
//!
//! Stores have no cache, so IO counts depend only on the dataset, the
//! parameters and the workload.

use std::time::Instant;

use serde::Serialize;
use trank_core::{Dataset, IoStats, MemStore, TopKQuery};

use super::Workload;
use crate::index::{AnyIndex, BuildParams, MethodTag};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: MethodTag,
    pub m: usize,
    pub n: usize,
    pub n_avg: f64,
    /// Breakpoints, both ends counted; 0 for exact methods.
    pub r: usize,
    pub epsilon: f64,
    pub k: usize,
    pub k_max: usize,
    pub page_size: usize,
    pub build_reads: u64,
    pub build_writes: u64,
    pub build_ms: f64,
    pub index_pages: u64,
    pub queries: usize,
    pub query_io_mean: f64,
    pub query_io_min: u64,
    pub query_io_max: u64,
    pub query_ms_mean: f64,
}

impl BenchRow {
    /// Column names of [`BenchRow::tsv`], in order.
    pub const COLUMNS: [&'static str; 18] = [
        "method",
        "m",
        "n",
        "n_avg",
        "r",
        "epsilon",
        "k",
        "k_max",
        "page_size",
        "build_reads",
        "build_writes",
        "build_ms",
        "index_pages",
        "queries",
        "query_io_mean",
        "query_io_min",
        "query_io_max",
        "query_ms_mean",
    ];

    pub fn tsv(&self) -> String {
        [
            self.method.to_string(),
            self.m.to_string(),
            self.n.to_string(),
            self.n_avg.to_string(),
            self.r.to_string(),
            self.epsilon.to_string(),
            self.k.to_string(),
            self.k_max.to_string(),
            self.page_size.to_string(),
            self.build_reads.to_string(),
            self.build_writes.to_string(),
            format!("{:.3}", self.build_ms),
            self.index_pages.to_string(),
            self.queries.to_string(),
            self.query_io_mean.to_string(),
            self.query_io_min.to_string(),
            self.query_io_max.to_string(),
            format!("{:.4}", self.query_ms_mean),
        ]
        .join("\t")
    }
}

/// Builds each method in memory and runs the workload against it.
pub fn bench(ds: &Dataset, methods: &[MethodTag], params: &BuildParams, workload: &Workload) -> Result<Vec<BenchRow>> {
    methods.iter().map(|&tag| bench_one(ds, tag, params, workload)).collect()
}

pub fn bench_one(ds: &Dataset, tag: MethodTag, params: &BuildParams, workload: &Workload) -> Result<BenchRow> {
    let ps = params.page_size;
    let mut build_io = IoStats::default();
    let start = Instant::now();
    let idx = AnyIndex::build(ds, tag, params, MemStore::new(ps)?, || Ok(MemStore::new(ps)?), &mut build_io)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let (ios, ms) = run_workload(&idx, workload)?;
    let (r, epsilon) = idx.breakpoints().map_or((0, 0.0), |b| (b.len(), b.epsilon));
    let nq = ios.len().max(1) as f64;
    Ok(BenchRow {
        method: tag,
        m: ds.m(),
        n: ds.n(),
        n_avg: ds.n() as f64 / ds.m().max(1) as f64,
        r,
        epsilon,
        k: workload.queries.iter().map(|q| q.k).max().unwrap_or(0),
        k_max: idx.k_max().unwrap_or(0),
        page_size: ps,
        build_reads: build_io.reads,
        build_writes: build_io.writes,
        build_ms,
        index_pages: idx.pages(),
        queries: ios.len(),
        query_io_mean: ios.iter().sum::<u64>() as f64 / nq,
        query_io_min: ios.iter().copied().min().unwrap_or(0),
        query_io_max: ios.iter().copied().max().unwrap_or(0),
        query_ms_mean: ms / nq,
    })
}

/// Per-query page accesses, and total elapsed milliseconds.
pub fn run_workload<Q: TopKQuery>(idx: &Q, workload: &Workload) -> Result<(Vec<u64>, f64)> {
    let start = Instant::now();
    let ios = workload
        .queries
        .iter()
        .map(|q| {
            let mut io = IoStats::default();
            idx.query(q, &mut io)?;
            Ok(io.total())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ios, start.elapsed().as_secs_f64() * 1e3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{SynthProfile, ValueModel};
    use trank_core::approx::Resolution;
    use trank_core::Aggregate;

    #[test]
    fn io_counts_are_deterministic() {
        let ds = SynthProfile::new(ValueModel::RandomWalkPositive, 50, 40, 6).generate();
        let w = Workload::fixed_fraction(ds.t_end(), 30, 0.2, 10, Aggregate::Sum, 1);
        let p = BuildParams { resolution: Some(Resolution::Breakpoints(20)), k_max: 20, ..BuildParams::default() };
        let strip = |mut rows: Vec<BenchRow>| {
            rows.iter_mut().for_each(|r| {
                r.build_ms = 0.0;
                r.query_ms_mean = 0.0;
            });
            rows
        };
        let a = strip(bench(&ds, &MethodTag::ALL, &p, &w).unwrap());
        let b = strip(bench(&ds, &MethodTag::ALL, &p, &w).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        for row in &a {
            assert!(row.query_io_min > 0 && row.index_pages > 1);
            assert_eq!(row.tsv().split('\t').count(), BenchRow::COLUMNS.len());
            assert_eq!(row.r == 0, row.method.is_exact());
        }
    }

    #[test]
    fn exact1_io_grows_with_interval_length() {
        let ds = SynthProfile::new(ValueModel::RandomWalkPositive, 100, 100, 2).generate();
        let p = BuildParams::default();
        let io = |frac: f64| {
            let w = Workload::anchored(ds.t_end(), 20, frac, 0.5, 10, 4);
            bench_one(&ds, MethodTag::Exact1, &p, &w).unwrap().query_io_mean
        };
        let (short, long) = (io(0.02), io(0.5));
        // The extra 48% of T is scanned forward: that many segments, 36 bytes each.
        let forward_pages = 0.48 * ds.n() as f64 * 36.0 / 4096.0;
        assert!(long - short >= 0.8 * forward_pages, "{short} -> {long}");
    }
}
