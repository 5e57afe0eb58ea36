//! Answer-quality metrics and guarantee checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{apply_aggregate, Dataset, ObjectId, QuerySpec};
use crate::rank::RankedAnswer;
use crate::scores_close;

/// Fraction of `truth`'s objects present in `ans` (order ignored).
pub fn precision_recall(ans: &RankedAnswer, truth: &RankedAnswer) -> Result<f64> {
    if ans.len() != truth.len() {
        return Err(Error::Parameter(format!("answer sizes differ: {} vs {}", ans.len(), truth.len())));
    }
    if truth.is_empty() {
        return Ok(1.0);
    }
    let mut want: Vec<ObjectId> = truth.objects().collect();
    want.sort_unstable();
    let hits = ans.objects().filter(|o| want.binary_search(o).is_ok()).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    /// Mean of reported / true score over returned objects with a non-zero
    /// true score.
    pub mean: f64,
    /// Largest `|ratio - 1|` among those objects.
    pub max_deviation: f64,
    /// Returned objects skipped because their true score is zero.
    pub zero_excluded: usize,
}

/// Reported scores against exact scores over the raw query interval.
pub fn approx_ratio(ans: &RankedAnswer, ds: &Dataset, q: &QuerySpec) -> Result<RatioReport> {
    let pairs = ans
        .entries
        .iter()
        .map(|e| {
            let truth = ds.polyline(e.object)?.integral(q.t1(), q.t2());
            Ok((e.score, apply_aggregate(truth, q)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ratio_of_pairs(&pairs))
}

/// [`approx_ratio`] on `(reported, true)` pairs.
pub fn ratio_of_pairs(pairs: &[(f64, f64)]) -> RatioReport {
    let (mut sum, mut n, mut dev, mut zero) = (0.0, 0usize, 0.0f64, 0usize);
    for &(got, truth) in pairs {
        if truth == 0.0 {
            zero += 1;
            continue;
        }
        let r = got / truth;
        sum += r;
        dev = dev.max((r - 1.0).abs());
        n += 1;
    }
    RatioReport { mean: if n == 0 { 1.0 } else { sum / n as f64 }, max_deviation: dev, zero_excluded: zero }
}

/// Whether `approx` is an `(ε, α)`-approximation of `exact` with `εM = eps_m`.
pub fn within(approx: f64, exact: f64, alpha: f64, eps_m: f64, slack: f64) -> bool {
    exact / alpha - eps_m - slack <= approx && approx <= exact + eps_m + slack
}

/// Per-rank check of the rank-wise guarantee: the score reported at rank `j`
/// must approximate both the true score of the object truly ranked `j` and
/// the true score of the object it reports. `true_score` gives exact scores
/// for reported objects.
pub fn verify_rankwise(
    ans: &RankedAnswer,
    truth: &RankedAnswer,
    true_score: impl Fn(ObjectId) -> f64,
    epsilon: f64,
    alpha: f64,
    mass: f64,
) -> Vec<bool> {
    let eps_m = epsilon * mass;
    let slack = 1e-9 * mass.abs().max(1.0);
    let n = ans.len().max(truth.len());
    (0..n)
        .map(|j| match (ans.entries.get(j), truth.entries.get(j)) {
            (Some(a), Some(t)) => {
                within(a.score, t.score, alpha, eps_m, slack) && within(a.score, true_score(a.object), alpha, eps_m, slack)
            }
            _ => false,
        })
        .collect()
}

/// Whether two answers agree up to floating-point ties: scores match rank by
/// rank, and where the object ids differ the reported object's exact score
/// ties the true one at that rank.
pub fn same_ranking(got: &RankedAnswer, truth: &RankedAnswer, true_score: impl Fn(ObjectId) -> f64) -> core::result::Result<(), String> {
    if got.len() != truth.len() {
        return Err(format!("lengths differ: {} vs {}", got.len(), truth.len()));
    }
    if !got.is_well_formed(got.len()) {
        return Err("answer is not ordered or repeats an object".into());
    }
    for (j, (g, t)) in got.entries.iter().zip(&truth.entries).enumerate() {
        if !scores_close(g.score, t.score) {
            return Err(format!("rank {}: score {} vs {}", j + 1, g.score, t.score));
        }
        if g.object != t.object && !scores_close(true_score(g.object), t.score) {
            return Err(format!("rank {}: {} vs {}", j + 1, g.object, t.object));
        }
    }
    Ok(())
}
