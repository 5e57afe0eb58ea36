use alloc::vec::Vec;

use super::{abs_segments, crossing_delta, finish, full, threshold, BreakpointSet, Method, SweepStats};
use crate::error::Result;
use crate::model::Dataset;

/// Breakpoints where the total mass of all objects since the previous
/// breakpoint reaches `τ = εM`. At most `⌈1/ε⌉ + 1` points.
pub fn build_breakpoints1(ds: &Dataset, epsilon: f64) -> Result<BreakpointSet> {
    build_breakpoints1_with_stats(ds, epsilon).map(|(b, _)| b)
}

pub fn build_breakpoints1_with_stats(ds: &Dataset, epsilon: f64) -> Result<(BreakpointSet, SweepStats)> {
    let (mass, tau, mass_mode) = threshold(ds, epsilon)?;
    let mut stats = SweepStats::default();

    // (time, ΔV, ΔW): the summed value V jumps and its slope W changes at
    // segment ends; between events the running mass is quadratic.
    let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(2 * ds.n() + 2);
    for p in ds.polylines() {
        for s in abs_segments(p) {
            let w = s.slope();
            events.push((s.t_l, s.v_l, w));
            events.push((s.t_r, -s.v_r, -w));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut bps = Vec::with_capacity((1.0 / epsilon) as usize + 2);
    bps.push(0.0);
    let (mut t, mut v, mut w, mut acc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(te, dv, dw) in &events {
        stats.events += 1;
        loop {
            let dt = te - t;
            if dt <= 0.0 {
                break;
            }
            let gain = v * dt + 0.5 * w * dt * dt;
            if acc + gain < full(tau) {
                acc += gain;
                v += w * dt;
                t = te;
                break;
            }
            stats.crossings += 1;
            let d = crossing_delta(v, w, acc, tau).unwrap_or(dt).min(dt);
            t += d;
            v += w * d;
            acc = 0.0;
            bps.push(t);
            if d <= 0.0 {
                // rounding left no room to move; take the event time
                t = te;
                break;
            }
        }
        v += dv;
        w += dw;
    }

    let breakpoints = finish(ds, bps, tau);
    Ok((BreakpointSet { breakpoints, epsilon, tau, mass, method: Method::Bp1, mass_mode }, stats))
}
