//! Breakpoint sets bounding the mass between consecutive breakpoints.
//!
//! Both builders sweep forward from `b_0 = 0` and place `b_{j+1}` where the
//! mass accumulated since `b_j` reaches `τ = εM`: summed over all objects
//! ([`Method::Bp1`]) or for the heaviest single object ([`Method::Bp2`]).
//! Mass is always the integral of `|g_i|`, so mixed-sign data is handled by
//! splitting segments at zero crossings; for non-negative data this is the
//! ordinary integral.

mod bp1;
mod bp2;

pub use bp1::{build_breakpoints1, build_breakpoints1_with_stats};
pub use bp2::{
    build_breakpoints2_baseline, build_breakpoints2_baseline_with_stats, build_breakpoints2_efficient,
    build_breakpoints2_efficient_with_stats,
};

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Dataset, MassMode, Polyline, Segment};
use crate::storage::{ByteReader, ByteWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Total mass over all objects per gap.
    Bp1,
    /// Largest single-object mass per gap.
    Bp2,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bp1 => "BP1",
            Method::Bp2 => "BP2",
        }
    }
}

/// Ordered breakpoints `0 = b_0 < ... < b_r = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointSet {
    breakpoints: Vec<f64>,
    pub epsilon: f64,
    /// `τ = ε · M`, in mass units.
    pub tau: f64,
    /// The mass `M` the threshold was derived from.
    pub mass: f64,
    pub method: Method,
    /// `Signed` when the data had no negative values, `Absolute` otherwise.
    pub mass_mode: MassMode,
}

/// Counters describing the work done by a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    /// Segment or vertex events consumed.
    pub events: u64,
    /// Crossing times solved.
    pub crossings: u64,
    pub heap_pushes: u64,
    pub heap_pops: u64,
    /// Heap entries found outdated on pop.
    pub stale: u64,
    /// Per-object state resets at breakpoints.
    pub resets: u64,
}

impl SweepStats {
    pub fn operations(&self) -> u64 {
        self.events + self.crossings + self.heap_pushes + self.heap_pops + self.resets
    }
}

impl BreakpointSet {
    /// Wraps an explicit breakpoint list, e.g. for tests or hand-built sets.
    pub fn from_points(breakpoints: Vec<f64>, epsilon: f64, tau: f64, mass: f64, method: Method) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 {
            return Err(Error::Parameter("breakpoints must start at 0 and hold at least two points".into()));
        }
        if breakpoints.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(core::cmp::Ordering::Less)) {
            return Err(Error::Parameter("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints, epsilon, tau, mass, method, mass_mode: MassMode::Signed })
    }

    pub fn points(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of breakpoints including both ends.
    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Number of elementary gaps, `len() - 1`.
    pub fn gaps(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    pub fn get(&self, j: usize) -> f64 {
        self.breakpoints[j]
    }

    /// Index of the smallest breakpoint `>= t`.
    pub fn snap_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.t_end()).contains(&t) {
            return Err(Error::OutOfDomain { t, lo: 0.0, hi: self.t_end() });
        }
        Ok(self.breakpoints.partition_point(|&b| b < t))
    }

    /// Smallest breakpoint `>= t`.
    pub fn snap(&self, t: f64) -> Result<f64> {
        Ok(self.breakpoints[self.snap_index(t)?])
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u8(match self.method {
            Method::Bp1 => 1,
            Method::Bp2 => 2,
        })
        .u8(match self.mass_mode {
            MassMode::Signed => 0,
            MassMode::Absolute => 1,
        })
        .f64(self.epsilon)
        .f64(self.tau)
        .f64(self.mass)
        .f64s(&self.breakpoints);
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let method = match r.u8()? {
            1 => Method::Bp1,
            2 => Method::Bp2,
            x => return Err(Error::Corrupt(format!("unknown breakpoint method {x}"))),
        };
        let mass_mode = if r.u8()? == 0 { MassMode::Signed } else { MassMode::Absolute };
        let (epsilon, tau, mass) = (r.f64()?, r.f64()?, r.f64()?);
        let breakpoints = r.f64s()?;
        let mut s = Self::from_points(breakpoints, epsilon, tau, mass, method).map_err(|e| Error::Corrupt(format!("{e}")))?;
        s.mass_mode = mass_mode;
        Ok(s)
    }
}

/// Smallest `t' > t` with `I + V·Δ + ½·W·Δ² = τ` (`Δ = t' - t`), if it is
/// reached no later than `horizon`.
///
/// Uses `Δ = 2(τ - I) / (V + √(V² + 2W(τ - I)))`, algebraically the root
/// `(-V + √(V² + 2W(τ - I))) / W` without cancellation when `W` is small.
pub fn solve_crossing(v: f64, w: f64, i: f64, tau: f64, t: f64, horizon: f64) -> Option<f64> {
    let dt = crossing_delta(v, w, i, tau)?;
    let at = t + dt;
    (at <= horizon).then_some(at)
}

/// Mass at which a gap counts as full: `τ` less a relative `1e-9`, so a
/// crossing that lands exactly on a segment end does not hinge on rounding.
pub(crate) fn full(tau: f64) -> f64 {
    tau * (1.0 - 1e-9)
}

pub(crate) fn crossing_delta(v: f64, w: f64, i: f64, tau: f64) -> Option<f64> {
    let need = tau - i;
    if need <= 0.0 {
        return Some(0.0);
    }
    let disc = v * v + 2.0 * w * need;
    if disc < 0.0 {
        return None;
    }
    let den = v + libm::sqrt(disc);
    if den <= 0.0 {
        return None;
    }
    Some(2.0 * need / den)
}

/// `|g|` as segments, split where `g` changes sign.
pub(crate) fn abs_segments(p: &Polyline) -> Vec<Segment> {
    let mut out = Vec::with_capacity(p.segment_count() + 1);
    for s in p.segments() {
        if s.v_l * s.v_r < 0.0 {
            let tc = s.t_l + (s.t_r - s.t_l) * s.v_l.abs() / (s.v_l.abs() + s.v_r.abs());
            let tc = tc.clamp(s.t_l, s.t_r);
            if tc > s.t_l {
                out.push(Segment { t_l: s.t_l, t_r: tc, v_l: s.v_l.abs(), v_r: 0.0, object: s.object });
            }
            if tc < s.t_r {
                out.push(Segment { t_l: tc, t_r: s.t_r, v_l: 0.0, v_r: s.v_r.abs(), object: s.object });
            }
        } else {
            out.push(Segment { v_l: s.v_l.abs(), v_r: s.v_r.abs(), ..s });
        }
    }
    out
}

/// Checks parameters and returns `(M, τ, mode)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub(crate) fn threshold(ds: &Dataset, epsilon: f64) -> Result<(f64, f64, MassMode)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1]")));
    }
    let mass = ds.total_mass(MassMode::Absolute);
    if !(mass > 0.0) {
        return Err(Error::Parameter("dataset has no mass to split".into()));
    }
    let mode = if ds.is_non_negative() { MassMode::Signed } else { MassMode::Absolute };
    Ok((mass, epsilon * mass, mode))
}

/// Appends `T` and removes numerically spurious breakpoints: near
/// duplicates (within `1e-12·T`) and trailing ones whose remaining mass up
/// to `T` is negligible (a crossing landing on `T` up to rounding).
pub(crate) fn finish(ds: &Dataset, mut bps: Vec<f64>, tau: f64) -> Vec<f64> {
    let t_end = ds.t_end();
    let tol = 1e-12 * t_end;
    let mut out: Vec<f64> = Vec::with_capacity(bps.len() + 1);
    for b in bps.drain(..) {
        if out.last().is_none_or(|&l| b - l > tol) && b < t_end - tol {
            out.push(b);
        }
    }
    while out.len() > 1 {
        let b = out[out.len() - 1];
        let rest: f64 = ds.polylines().iter().map(|p| p.abs_integral(b, t_end)).sum();
        if rest > 1e-9 * tau {
            break;
        }
        out.pop();
    }
    out.push(t_end);
    out
}

/// Searches ε so that `build` yields at most `target` breakpoints (both ends
/// included), as close to `target` as the search resolution allows.
pub fn epsilon_for_target<F>(target: usize, mut build: F) -> Result<(f64, BreakpointSet)>
where
    F: FnMut(f64) -> Result<BreakpointSet>,
{
    if target < 2 {
        return Err(Error::Parameter("a breakpoint set has at least two points".into()));
    }
    let mut hi = 1.0;
    let mut best = build(hi)?;
    if best.len() >= target {
        return Ok((hi, best));
    }
    let mut lo = 1.0 / (target as f64 * 4.0);
    loop {
        let s = build(lo)?;
        if s.len() > target {
            break;
        }
        best = s;
        hi = lo;
        if lo < 1e-12 {
            return Ok((hi, best));
        }
        lo /= 4.0;
    }
    // invariant: build(hi) fits, build(lo) has too many
    for _ in 0..60 {
        let mid = libm::sqrt(lo * hi);
        let s = build(mid)?;
        if s.len() <= target {
            hi = mid;
            let done = s.len() == target;
            best = s;
            if done {
                break;
            }
        } else {
            lo = mid;
        }
        if hi / lo < 1.0 + 1e-9 {
            break;
        }
    }
    Ok((hi, best))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::tests::{d0, poly};
    use alloc::vec;

    pub fn two_constants() -> Dataset {
        Dataset::new(vec![poly(1, &[(0.0, 1.0), (10.0, 1.0)]), poly(2, &[(0.0, 1.0), (10.0, 1.0)])]).unwrap()
    }

    #[test]
    fn crossing_examples() {
        let t = solve_crossing(8.0, -0.2, 0.0, 10.0, 0.0, f64::INFINITY).unwrap();
        assert!((t - (-8.0 + 60f64.sqrt()) / -0.2).abs() < 1e-12);
        assert!((8.0 * t - 0.1 * t * t - 10.0).abs() < 1e-12);
        assert!((t - 1.270167).abs() < 1e-6);
        assert_eq!(solve_crossing(5.0, 0.0, 2.0, 10.0, 0.0, f64::INFINITY), Some(1.6));
        assert_eq!(solve_crossing(1.0, 0.0, 0.0, 10.0, 0.0, 1.0), None);
        assert_eq!(solve_crossing(0.0, 0.0, 0.0, 10.0, 0.0, 1e9), None);
        assert_eq!(solve_crossing(1.0, -1.0, 0.0, 10.0, 0.0, 1e9), None);
    }

    #[test]
    fn abs_split() {
        let p = poly(1, &[(0.0, -1.0), (2.0, 1.0), (3.0, 4.0)]);
        let s = abs_segments(&p);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].t_r, s[0].v_l, s[0].v_r), (1.0, 1.0, 0.0));
        let total: f64 = s.iter().map(|s| s.area()).sum();
        assert!((total - p.abs_total()).abs() < 1e-12);
    }

    #[test]
    fn snapping() {
        let b = BreakpointSet::from_points(vec![0.0, 2.5, 5.0, 7.5, 10.0], 0.25, 5.0, 20.0, Method::Bp1).unwrap();
        assert_eq!(b.snap(3.1).unwrap(), 5.0);
        assert_eq!(b.snap(2.5).unwrap(), 2.5);
        assert_eq!(b.snap(0.0).unwrap(), 0.0);
        assert!(b.snap(10.5).is_err());
        let mut w = ByteWriter::new();
        b.encode(&mut w);
        let bytes = w.finish();
        assert_eq!(BreakpointSet::decode(&mut ByteReader::new(&bytes)).unwrap(), b);
    }

    #[test]
    fn parameter_errors() {
        assert!(build_breakpoints1(&d0(), 0.0).is_err());
        assert!(build_breakpoints1(&d0(), 1.5).is_err());
        assert!(build_breakpoints2_efficient(&d0(), -0.1).is_err());
        assert!(build_breakpoints1(&Dataset::empty(), 0.5).is_err());
    }

    #[test]
    fn target_search_never_exceeds() {
        let ds = crate::exact::tests::mixed(30, 40, 4);
        for target in [2, 3, 10, 57, 200] {
            let (eps, b) = epsilon_for_target(target, |e| build_breakpoints2_efficient(&ds, e)).unwrap();
            assert!(b.len() <= target, "{target}: {}", b.len());
            assert_eq!(b.epsilon, eps);
            if target <= 57 {
                assert!(b.len() + 2 >= target, "{target}: {}", b.len());
            }
        }
    }
}
