//! Answer quality against brute-force ground truth.

use serde::Serialize;
use trank_core::eval::{precision_recall, ratio_of_pairs, verify_rankwise};
use trank_core::model::{apply_aggregate, brute_force_topk, MassMode};
use trank_core::{Dataset, IoStats, PageStore, TopKQuery};

use super::Workload;
use crate::index::{AnyIndex, MethodTag};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub method: MethodTag,
    pub t1: f64,
    pub t2: f64,
    pub k: usize,
    pub precision_recall: f64,
    /// Mean reported / true score over the raw interval.
    pub mean_approx_ratio: f64,
    pub max_deviation: f64,
    /// Returned objects left out of the ratio because their true score is 0.
    pub zero_excluded: usize,
    /// Whether every rank met the index's `(ε, α)` promise.
    pub rankwise_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualitySummary {
    pub method: MethodTag,
    pub queries: usize,
    pub mean_precision_recall: f64,
    pub mean_approx_ratio: f64,
    pub rankwise_pass_rate: f64,
}

impl QualitySummary {
    pub fn of(method: MethodTag, rows: &[QualityReport]) -> Self {
        let n = rows.len().max(1) as f64;
        Self {
            method,
            queries: rows.len(),
            mean_precision_recall: rows.iter().map(|r| r.precision_recall).sum::<f64>() / n,
            mean_approx_ratio: rows.iter().map(|r| r.mean_approx_ratio).sum::<f64>() / n,
            rankwise_pass_rate: rows.iter().filter(|r| r.rankwise_pass).count() as f64 / n,
        }
    }
}

/// One report per query. The rank-wise check uses the index's own `(ε, α)`
/// and the dataset's absolute mass; on mixed-sign data the additive unit of
/// the approximate methods is doubled, since snapping can move a score by up
/// to `τ` at each end.
pub fn quality<S: PageStore>(index: &AnyIndex<S>, ds: &Dataset, workload: &Workload) -> Result<Vec<QualityReport>> {
    let (mut eps, alpha) = index.guarantee();
    if !ds.is_non_negative() {
        eps *= 2.0;
    }
    let mass = ds.total_mass(MassMode::Absolute);
    let mut io = IoStats::default();
    workload
        .queries
        .iter()
        .map(|q| {
            let ans = index.query(q, &mut io)?;
            let truth = brute_force_topk(ds, q)?;
            let exact = |o| ds.polyline(o).map(|p| p.integral(q.t1(), q.t2())).and_then(|s| apply_aggregate(s, q));
            let pairs = ans.entries.iter().map(|e| Ok((e.score, exact(e.object)?))).collect::<trank_core::Result<Vec<_>>>()?;
            let ratio = ratio_of_pairs(&pairs);
            let pass = verify_rankwise(&ans, &truth, |o| exact(o).unwrap_or(f64::NAN), eps, alpha, mass).iter().all(|&p| p);
            Ok(QualityReport {
                method: index.tag(),
                t1: q.t1(),
                t2: q.t2(),
                k: q.k,
                precision_recall: precision_recall(&ans, &truth)?,
                mean_approx_ratio: ratio.mean,
                max_deviation: ratio.max_deviation,
                zero_excluded: ratio.zero_excluded,
                rankwise_pass: pass,
            })
        })
        .collect()
}
