use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use super::{abs_segments, crossing_delta, finish, full, threshold, BreakpointSet, Method, SweepStats};
use crate::error::Result;
use crate::model::{Dataset, ObjectId, Segment};

/// Breakpoints where some single object's mass since the previous
/// breakpoint reaches `τ = εM`.
///
/// This version resets every object at every breakpoint, `O(N log N + rm)`.
/// It is kept as the reference for [`build_breakpoints2_efficient`].
pub fn build_breakpoints2_baseline(ds: &Dataset, epsilon: f64) -> Result<BreakpointSet> {
    build_breakpoints2_baseline_with_stats(ds, epsilon).map(|(b, _)| b)
}

/// Same output as the baseline without touching every object at every
/// breakpoint: cumulative masses are rebased lazily and outdated candidate
/// crossings are re-solved only when they reach the top of the heap.
pub fn build_breakpoints2_efficient(ds: &Dataset, epsilon: f64) -> Result<BreakpointSet> {
    build_breakpoints2_efficient_with_stats(ds, epsilon).map(|(b, _)| b)
}

fn sorted_segments(ds: &Dataset) -> Vec<Segment> {
    let mut segs: Vec<Segment> = ds.polylines().iter().flat_map(abs_segments).collect();
    segs.sort_by(|a, b| a.t_l.total_cmp(&b.t_l).then(a.object.cmp(&b.object)));
    segs
}

/// Crossing of `τ` inside `s`, starting at `a` with mass `m0` already
/// accumulated there. Caller guarantees the crossing exists mathematically.
fn crossing_in(s: &Segment, a: f64, m0: f64, tau: f64) -> f64 {
    let va = s.value_unchecked(a);
    match crossing_delta(va, s.slope(), m0, tau) {
        Some(d) => (a + d).min(s.t_r),
        None => s.t_r,
    }
}

pub fn build_breakpoints2_baseline_with_stats(ds: &Dataset, epsilon: f64) -> Result<(BreakpointSet, SweepStats)> {
    let (mass, tau, mass_mode) = threshold(ds, epsilon)?;
    let mut stats = SweepStats::default();
    let segs = sorted_segments(ds);
    let m = ds.m();

    // active segment, mass since the last breakpoint at its (clipped) start,
    // and the pending crossing if the object is dangerous
    let mut cur: Vec<Option<Segment>> = vec![None; m];
    let mut start_mass = vec![0.0f64; m];
    let mut start_at = vec![0.0f64; m];
    let mut cand: Vec<Option<f64>> = vec![None; m];
    let mut bhat = f64::INFINITY;

    let mut b = 0.0;
    let mut bps = vec![0.0];
    let mut idx = 0;
    loop {
        let next_tl = segs.get(idx).map_or(f64::INFINITY, |s| s.t_l);
        if bhat.is_finite() && bhat <= next_tl {
            b = bhat;
            bps.push(b);
            bhat = f64::INFINITY;
            for i in 0..m {
                stats.resets += 1;
                cand[i] = None;
                let Some(s) = cur[i] else { continue };
                if s.t_r <= b {
                    cur[i] = None;
                    continue;
                }
                start_mass[i] = 0.0;
                start_at[i] = b;
                if s.integral(b, s.t_r) >= full(tau) {
                    stats.crossings += 1;
                    let c = crossing_in(&s, b, 0.0, tau);
                    cand[i] = Some(c);
                    bhat = bhat.min(c);
                }
            }
            continue;
        }
        let Some(s) = segs.get(idx) else { break };
        idx += 1;
        stats.events += 1;
        let i = s.object.index();
        let before = match cur[i] {
            Some(p) if p.t_r > b => start_mass[i] + p.integral(start_at[i], p.t_r),
            _ => 0.0,
        };
        cur[i] = Some(*s);
        start_mass[i] = before;
        start_at[i] = s.t_l;
        if before + s.area() >= full(tau) {
            stats.crossings += 1;
            let c = crossing_in(s, s.t_l, before, tau);
            cand[i] = Some(c);
            bhat = bhat.min(c);
        }
    }

    let breakpoints = finish(ds, bps, tau);
    Ok((BreakpointSet { breakpoints, epsilon, tau, mass, method: Method::Bp2, mass_mode }, stats))
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    at: f64,
    object: u32,
    epoch: u32,
    seq: u32,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.at.total_cmp(&o.at).then(self.object.cmp(&o.object))
    }
}

#[derive(Clone, Copy, Default)]
struct ObjState {
    seg: Option<Segment>,
    /// Cumulative mass of the object up to `seg.t_l`.
    c_start: f64,
    /// Cumulative mass at the breakpoint of `epoch`.
    base: f64,
    epoch: u32,
    seq: u32,
}

impl ObjState {
    /// Cumulative mass at `t`, for `t` not before the active segment.
    fn cumulative(&self, t: f64) -> f64 {
        match self.seg {
            Some(s) if t < s.t_r => self.c_start + s.integral(s.t_l, t),
            Some(s) => self.c_start + s.area(),
            None => 0.0,
        }
    }
}

pub fn build_breakpoints2_efficient_with_stats(ds: &Dataset, epsilon: f64) -> Result<(BreakpointSet, SweepStats)> {
    let (mass, tau, mass_mode) = threshold(ds, epsilon)?;
    let mut stats = SweepStats::default();
    let segs = sorted_segments(ds);
    let mut st = vec![ObjState::default(); ds.m()];
    let mut heap: BinaryHeap<Reverse<Entry>> = BinaryHeap::new();

    let mut epoch = 0u32;
    let mut b = 0.0;
    let mut bps = vec![0.0];
    let mut idx = 0;
    loop {
        // settle the heap top: drop entries for replaced segments, re-solve
        // entries computed against an older breakpoint
        let top = loop {
            let Some(&Reverse(e)) = heap.peek() else { break None };
            let o = &mut st[ObjectId(e.object).index()];
            if e.seq != o.seq {
                heap.pop();
                stats.heap_pops += 1;
                stats.stale += 1;
                continue;
            }
            if e.epoch != epoch {
                heap.pop();
                stats.heap_pops += 1;
                stats.stale += 1;
                o.base = o.cumulative(b);
                o.epoch = epoch;
                let s = o.seg.expect("entry without segment");
                if s.t_r > b && o.c_start + s.area() - o.base >= full(tau) {
                    stats.crossings += 1;
                    let at = crossing_in(&s, b.max(s.t_l), 0.0, tau);
                    heap.push(Reverse(Entry { at, epoch, ..e }));
                    stats.heap_pushes += 1;
                }
                continue;
            }
            break Some(e);
        };

        let next_tl = segs.get(idx).map_or(f64::INFINITY, |s| s.t_l);
        if let Some(e) = top {
            if e.at <= next_tl {
                b = e.at;
                bps.push(b);
                epoch += 1;
                continue;
            }
        }
        let Some(s) = segs.get(idx) else { break };
        idx += 1;
        stats.events += 1;
        let o = &mut st[s.object.index()];
        if o.epoch != epoch {
            o.base = o.cumulative(b);
            o.epoch = epoch;
        }
        o.c_start = o.seg.map_or(0.0, |p| o.c_start + p.area());
        o.seg = Some(*s);
        o.seq += 1;
        let m0 = o.c_start - o.base;
        if m0 + s.area() >= full(tau) {
            stats.crossings += 1;
            let at = crossing_in(s, s.t_l, m0, tau);
            heap.push(Reverse(Entry { at, object: s.object.0, epoch, seq: o.seq }));
            stats.heap_pushes += 1;
        }
    }

    let breakpoints = finish(ds, bps, tau);
    Ok((BreakpointSet { breakpoints, epsilon, tau, mass, method: Method::Bp2, mass_mode }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breakpoints::build_breakpoints1;
    use crate::breakpoints::tests::two_constants;
    use crate::exact::tests::mixed;
    use crate::model::tests::d0;
    use proptest::prelude::*;

    fn max_gap(ds: &Dataset, a: f64, b: f64) -> f64 {
        ds.polylines().iter().map(|p| p.abs_integral(a, b)).fold(0.0, f64::max)
    }

    fn same(a: &BreakpointSet, b: &BreakpointSet, t_end: f64) -> bool {
        a.len() == b.len() && a.points().iter().zip(b.points()).all(|(x, y)| (x - y).abs() <= 1e-9 * t_end)
    }

    #[test]
    fn d0_first_breakpoint() {
        for b in [build_breakpoints2_baseline(&d0(), 0.1).unwrap(), build_breakpoints2_efficient(&d0(), 0.1).unwrap()] {
            assert!((b.get(1) - 2.113249).abs() < 1e-6, "{:?}", b.points());
        }
    }

    #[test]
    fn constants() {
        for f in [build_breakpoints2_baseline, build_breakpoints2_efficient] {
            assert_eq!(f(&two_constants(), 0.25).unwrap().points(), &[0.0, 5.0, 10.0]);
            assert_eq!(f(&two_constants(), 1.0).unwrap().points(), &[0.0, 10.0]);
        }
    }

    #[test]
    fn efficient_matches_baseline_on_mixed() {
        for (seed, m, n) in [(1, 40, 50), (2, 200, 10), (3, 5, 300)] {
            let ds = mixed(m, n, seed);
            for eps in [0.5, 0.05, 0.004, 0.0007] {
                let a = build_breakpoints2_baseline(&ds, eps).unwrap();
                let b = build_breakpoints2_efficient(&ds, eps).unwrap();
                assert!(same(&a, &b, ds.t_end()), "seed {seed} eps {eps}: {} vs {}", a.len(), b.len());
            }
        }
    }

    #[test]
    fn efficient_avoids_per_object_resets() {
        let ds = mixed(300, 20, 5);
        let (a, sa) = build_breakpoints2_baseline_with_stats(&ds, 0.002).unwrap();
        let (b, sb) = build_breakpoints2_efficient_with_stats(&ds, 0.002).unwrap();
        assert!(same(&a, &b, ds.t_end()));
        assert!(sa.resets >= (a.len() as u64 - 2) * 300);
        assert_eq!(sb.resets, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn bp2_invariants(seed in 0u64..1000, m in 1u32..15, n in 1usize..20, inv in 1u32..80) {
            let ds = mixed(m, n, seed);
            let eps = (1.0 / inv as f64 * 0.999).min(1.0);
            let a = build_breakpoints2_baseline(&ds, eps).unwrap();
            let b = build_breakpoints2_efficient(&ds, eps).unwrap();
            prop_assert!(same(&a, &b, ds.t_end()), "{:?} vs {:?}", a.points(), b.points());
            let p = b.points();
            prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(p[p.len() - 1], ds.t_end());
            for j in 1..p.len() {
                let g = max_gap(&ds, p[j - 1], p[j]);
                prop_assert!(g <= b.tau * (1.0 + 1e-9));
                if j + 1 < p.len() {
                    prop_assert!((g - b.tau).abs() <= 1e-6 * b.tau);
                }
            }
            let b1 = build_breakpoints1(&ds, eps).unwrap();
            prop_assert!(b.len() <= b1.len());
        }
    }
}
