//! Aggregate top-k queries over piecewise-linear time series.
//!
//! Every object carries a score function given as a polyline; a query asks
//! for the `k` objects whose score integrates to the largest value over a
//! time interval. The crate provides:
//!
//! - [`model`]: the data model, exact trapezoid integrals and a brute-force
//!   ranking used as ground truth,
//! - [`storage`]: a paged block store with IO accounting, a bulk-loadable
//!   B+-tree and a static slab interval tree,
//! - [`exact`]: three exact engines (segment scan, per-object prefix sums,
//!   single interval tree),
//! - [`breakpoints`]: breakpoint sets bounding the mass between consecutive
//!   breakpoints, globally or per object,
//! - [`approx`]: approximate engines answering from precomputed top lists
//!   over breakpoint intervals,
//! - [`eval`]: quality metrics and rank-wise guarantee checks.
//!
//! The crate is `no_std` and only needs `alloc`; file-backed stores and file
//! formats live in the companion `trank` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod approx;
pub mod breakpoints;
pub mod error;
pub mod eval;
pub mod exact;
pub mod model;
pub mod rank;
pub mod storage;

pub use error::{Error, Result};
pub use model::{Aggregate, Dataset, ObjectId, Polyline, QuerySpec, Segment, TimeInterval, Vertex};
pub use rank::{RankedAnswer, Scored, TopKQuery};
pub use storage::{IoStats, MemStore, PageId, PageStore};

/// Relative tolerance used when comparing scores produced along different
/// accumulation orders.
pub const SCORE_RTOL: f64 = 1e-9;
/// Absolute floor for [`SCORE_RTOL`] comparisons near zero.
pub const SCORE_ATOL: f64 = 1e-12;

/// `a` and `b` agree within [`SCORE_RTOL`] (relative) or [`SCORE_ATOL`].
pub fn scores_close(a: f64, b: f64) -> bool {
    let diff = (a - b).abs();
    diff <= SCORE_ATOL || diff <= SCORE_RTOL * a.abs().max(b.abs())
}
