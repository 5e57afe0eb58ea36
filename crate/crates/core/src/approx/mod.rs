//! Approximate top-k over a [`BreakpointSet`](crate::breakpoints::BreakpointSet).
//!
//! Queries are answered over the snapped interval `[B(t1), B(t2)]`, where
//! `B(t)` is the smallest breakpoint `>= t`.
//!
//! - [`Query1Index`]: a precomputed top-`k_max` list for every pair of
//!   breakpoints, found through a two-level B+-tree. `(ε, 1)`-approximate.
//! - [`Query2Index`]: lists only for dyadic intervals; a query merges the
//!   lists of at most `2⌈log₂ r⌉` nodes. `(ε, 2 log r)`-approximate.
//! - [`Appx2Plus`]: the QUERY2 candidates re-scored exactly with [`Exact2`](crate::exact::Exact2).
//! - [`ApproxEngine`]: one of the above plus an append tail and rebuilds.

mod dyadic;
mod engine;
mod lists;
mod query1;
mod query2;

pub use dyadic::{DyadicNode, DyadicTree};
pub use engine::{build_breakpoints, ApproxConfig, ApproxEngine, QueryMethod, Resolution};
pub use query1::Query1Index;
pub use query2::{Appx2Plus, CandidateSet, Query2Index};

use alloc::vec;
use alloc::vec::Vec;

use crate::breakpoints::BreakpointSet;
use crate::error::{Error, Result};
use crate::model::{Dataset, ObjectId, QuerySpec};
use crate::rank::{RankedAnswer, Scored};
use crate::storage::{ByteReader, ByteWriter};

/// Signed mass of every object in every gap, gap-major: entry `g·m + i` is
/// `σ_i(b_g, b_{g+1})`.
pub(crate) fn gap_masses(ds: &Dataset, points: &[f64]) -> Vec<f64> {
    let m = ds.m();
    let gaps = points.len() - 1;
    let mut out = vec![0.0; gaps * m];
    for (i, p) in ds.polylines().iter().enumerate() {
        let mut g = 0;
        for s in p.segments() {
            while g + 1 < gaps && points[g + 1] <= s.t_l {
                g += 1;
            }
            let mut h = g;
            loop {
                let a = s.t_l.max(points[h]);
                let b = s.t_r.min(points[h + 1]);
                if b > a {
                    out[h * m + i] += s.integral(a, b);
                }
                if h + 1 == gaps || points[h + 1] >= s.t_r {
                    break;
                }
                h += 1;
            }
        }
    }
    out
}

/// Top `k_max` of per-object scores under the rank order.
pub(crate) fn top_list(scores: &[f64], k_max: usize) -> Vec<Scored> {
    let all = scores.iter().enumerate().map(|(i, &s)| Scored::new(ObjectId::from_index(i), s)).collect();
    RankedAnswer::from_unsorted(all, k_max).entries
}

/// Answer for a snapped interval of length zero: every score is 0, so the
/// first `k` ids win.
pub(crate) fn zeros_by_id(m: usize, k: usize) -> RankedAnswer {
    RankedAnswer { entries: (0..m.min(k)).map(|i| Scored::new(ObjectId::from_index(i), 0.0)).collect() }
}

/// Rank factor `α = 2⌈log₂ r⌉` of the dyadic methods for `r` breakpoints
/// (at least 1).
pub fn dyadic_alpha(r: usize) -> f64 {
    (2 * dyadic::ceil_log2(r)).max(1) as f64
}

pub(crate) fn check_k(k: usize, k_max: usize) -> Result<()> {
    if k > k_max {
        return Err(Error::KTooLarge { k, k_max });
    }
    Ok(())
}

pub(crate) fn check_query(q: &QuerySpec, k_max: usize, t_end: f64) -> Result<()> {
    check_k(q.k, k_max)?;
    q.interval.check_within(t_end)
}

pub(crate) fn check_k_max(k_max: usize) -> Result<()> {
    if k_max == 0 {
        return Err(Error::Parameter("k_max must be at least 1".into()));
    }
    Ok(())
}

/// Metadata shared by both query indexes.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Common {
    pub m: usize,
    pub k_max: usize,
    pub bps: BreakpointSet,
}

impl Common {
    pub fn encode(&self, w: &mut ByteWriter) {
        w.u64(self.m as u64).u64(self.k_max as u64);
        self.bps.encode(w);
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let m = r.u64()? as usize;
        let k_max = r.u64()? as usize;
        Ok(Self { m, k_max, bps: BreakpointSet::decode(r)? })
    }
}
