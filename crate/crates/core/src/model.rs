//! Temporal data model and exact integral arithmetic.
//!
//! An object's score over time is a [`Polyline`]; its aggregate score over
//! `[t1, t2]` is the integral of that polyline, computed segment by segment
//! as trapezoid areas. A polyline contributes nothing outside its own extent.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::rank::{RankedAnswer, Scored, TopK};

/// Dense object identifier, `1..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ObjectId(pub u32);

impl ObjectId {
    /// Zero-based position of the object inside a [`Dataset`].
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        ObjectId(i as u32 + 1)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub t: f64,
    pub v: f64,
}

impl Vertex {
    pub const fn new(t: f64, v: f64) -> Self {
        Self { t, v }
    }
}

/// One linear piece `(t_l, v_l) -> (t_r, v_r)` of an object's score function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_l: f64,
    pub t_r: f64,
    pub v_l: f64,
    pub v_r: f64,
    pub object: ObjectId,
}

impl Segment {
    pub fn new(object: ObjectId, t_l: f64, v_l: f64, t_r: f64, v_r: f64) -> Result<Self> {
        let seg = Self { t_l, t_r, v_l, v_r, object };
        seg.check()?;
        Ok(seg)
    }

    pub fn check(&self) -> Result<()> {
        if ![self.t_l, self.t_r, self.v_l, self.v_r].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidPolyline { object: self.object.0, reason: "non-finite value" });
        }
        if self.t_l >= self.t_r {
            return Err(Error::InvalidPolyline {
                object: self.object.0,
                reason: "segment endpoints not increasing",
            });
        }
        Ok(())
    }

    #[inline]
    pub fn slope(&self) -> f64 {
        (self.v_r - self.v_l) / (self.t_r - self.t_l)
    }

    /// Value at `t` without a range check.
    #[inline]
    pub fn value_unchecked(&self, t: f64) -> f64 {
        if t == self.t_r {
            return self.v_r;
        }
        self.v_l + (self.v_r - self.v_l) * (t - self.t_l) / (self.t_r - self.t_l)
    }

    /// Linear interpolation at `t`, which must lie in `[t_l, t_r]`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(self.t_l..=self.t_r).contains(&t) {
            return Err(Error::OutOfDomain { t, lo: self.t_l, hi: self.t_r });
        }
        Ok(self.value_unchecked(t))
    }

    /// Area under the segment over `[t_l, t_r]`.
    #[inline]
    pub fn area(&self) -> f64 {
        0.5 * (self.t_r - self.t_l) * (self.v_l + self.v_r)
    }

    /// Area under the segment restricted to `[t1, t2]`; zero when disjoint.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        let a = t1.max(self.t_l);
        let b = t2.min(self.t_r);
        if a >= b {
            return 0.0;
        }
        if a == self.t_l && b == self.t_r {
            return self.area();
        }
        0.5 * (b - a) * (self.value_unchecked(a) + self.value_unchecked(b))
    }

    /// Integral of `|g|` over `[t1, t2]`, split at the zero crossing.
    pub fn abs_integral(&self, t1: f64, t2: f64) -> f64 {
        let a = t1.max(self.t_l);
        let b = t2.min(self.t_r);
        if a >= b {
            return 0.0;
        }
        let (va, vb) = (self.value_unchecked(a), self.value_unchecked(b));
        abs_trapezoid(b - a, va, vb)
    }
}

/// `∫|l|` over a width-`w` piece whose endpoint values are `va`, `vb`.
#[inline]
pub fn abs_trapezoid(w: f64, va: f64, vb: f64) -> f64 {
    if va >= 0.0 && vb >= 0.0 || va <= 0.0 && vb <= 0.0 {
        0.5 * w * (va.abs() + vb.abs())
    } else {
        0.5 * w * (va * va + vb * vb) / (va.abs() + vb.abs())
    }
}

/// An object's score function: vertices with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub object: ObjectId,
    vertices: Vec<Vertex>,
}

impl Polyline {
    pub fn new(object: ObjectId, vertices: Vec<Vertex>) -> Result<Self> {
        let bad = |reason| Error::InvalidPolyline { object: object.0, reason };
        if vertices.len() < 2 {
            return Err(bad("fewer than two vertices"));
        }
        if vertices.iter().any(|p| !p.t.is_finite() || !p.v.is_finite()) {
            return Err(bad("non-finite vertex"));
        }
        if vertices.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(bad("timestamps not strictly increasing"));
        }
        Ok(Self { object, vertices })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Number of segments, `n_i`.
    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn first_t(&self) -> f64 {
        self.vertices[0].t
    }

    pub fn last(&self) -> Vertex {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn segment(&self, j: usize) -> Segment {
        let (a, b) = (self.vertices[j], self.vertices[j + 1]);
        Segment { t_l: a.t, t_r: b.t, v_l: a.v, v_r: b.v, object: self.object }
    }

    pub fn segments(&self) -> impl ExactSizeIterator<Item = Segment> + '_ {
        self.vertices.windows(2).map(move |w| Segment {
            t_l: w[0].t,
            t_r: w[1].t,
            v_l: w[0].v,
            v_r: w[1].v,
            object: self.object,
        })
    }

    /// Index of the segment containing `t` (the later one at a vertex), or
    /// `None` outside the extent.
    pub fn segment_at(&self, t: f64) -> Option<usize> {
        let n = self.vertices.len();
        if t < self.vertices[0].t || t > self.vertices[n - 1].t {
            return None;
        }
        let p = self.vertices.partition_point(|x| x.t <= t);
        Some((p - 1).min(n - 2))
    }

    /// Value at `t`, zero outside the extent.
    pub fn value_at(&self, t: f64) -> f64 {
        self.segment_at(t).map_or(0.0, |j| self.segment(j).value_unchecked(t))
    }

    /// `σ_i(t1, t2)`.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        self.fold_overlapping(t1, t2, |s| s.integral(t1, t2))
    }

    /// `∫|g_i|` over `[t1, t2]`.
    pub fn abs_integral(&self, t1: f64, t2: f64) -> f64 {
        self.fold_overlapping(t1, t2, |s| s.abs_integral(t1, t2))
    }

    pub fn total(&self) -> f64 {
        self.segments().map(|s| s.area()).sum()
    }

    pub fn abs_total(&self) -> f64 {
        self.segments().map(|s| abs_trapezoid(s.t_r - s.t_l, s.v_l, s.v_r)).sum()
    }

    fn fold_overlapping(&self, t1: f64, t2: f64, f: impl Fn(&Segment) -> f64) -> f64 {
        if t1 >= t2 {
            return 0.0;
        }
        let n = self.vertices.len();
        // first segment whose right end exceeds t1
        let start = self.vertices.partition_point(|x| x.t <= t1).saturating_sub(1);
        let mut acc = 0.0;
        for j in start..n - 1 {
            if self.vertices[j].t >= t2 {
                break;
            }
            acc += f(&self.segment(j));
        }
        acc
    }

    pub(crate) fn push(&mut self, v: Vertex) {
        self.vertices.push(v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    Signed,
    Absolute,
}

/// A validated collection of `m` polylines with ids `1..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    polylines: Vec<Polyline>,
    t_end: f64,
    n: usize,
    mass: f64,
    abs_mass: f64,
}

impl Dataset {
    /// Builds a dataset whose domain ends at the latest vertex.
    pub fn new(polylines: Vec<Polyline>) -> Result<Self> {
        let t_end = polylines.iter().map(|p| p.last().t).fold(0.0, f64::max);
        Self::with_domain(polylines, t_end)
    }

    /// Builds a dataset over `[0, t_end]`.
    pub fn with_domain(mut polylines: Vec<Polyline>, t_end: f64) -> Result<Self> {
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::InvalidDataset(format!("domain end {t_end} is not a finite non-negative time")));
        }
        polylines.sort_by_key(|p| p.object);
        for (i, p) in polylines.iter().enumerate() {
            if p.object != ObjectId::from_index(i) {
                return Err(Error::InvalidDataset(format!(
                    "object ids must be unique and dense in 1..={}, found {}",
                    polylines.len(),
                    p.object.0
                )));
            }
            if p.first_t() < 0.0 || p.last().t > t_end {
                return Err(Error::InvalidDataset(format!(
                    "object {} extends outside [0, {t_end}]",
                    p.object.0
                )));
            }
        }
        let n = polylines.iter().map(Polyline::segment_count).sum();
        let mass = polylines.iter().map(Polyline::total).sum();
        let abs_mass = polylines.iter().map(Polyline::abs_total).sum();
        Ok(Self { polylines, t_end, n, mass, abs_mass })
    }

    pub fn empty() -> Self {
        Self { polylines: Vec::new(), t_end: 0.0, n: 0, mass: 0.0, abs_mass: 0.0 }
    }

    /// Number of objects, `m`.
    pub fn m(&self) -> usize {
        self.polylines.len()
    }

    /// Total number of segments, `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Domain end `T`.
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn polylines(&self) -> &[Polyline] {
        &self.polylines
    }

    pub fn polyline(&self, id: ObjectId) -> Result<&Polyline> {
        if id.0 == 0 {
            return Err(Error::UnknownObject(0));
        }
        self.polylines.get(id.index()).ok_or(Error::UnknownObject(id.0))
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.polylines.iter().flat_map(|p| p.segments())
    }

    pub fn total_mass(&self, mode: MassMode) -> f64 {
        match mode {
            MassMode::Signed => self.mass,
            MassMode::Absolute => self.abs_mass,
        }
    }

    /// True when no vertex value is negative.
    pub fn is_non_negative(&self) -> bool {
        self.polylines.iter().all(|p| p.vertices.iter().all(|x| x.v >= 0.0))
    }

    /// Extends object `id` to a new last vertex, returning the new segment.
    pub fn append(&mut self, id: ObjectId, to: Vertex) -> Result<Segment> {
        let p = self.polyline(id)?;
        let last = p.last();
        let seg = Segment::new(id, last.t, last.v, to.t, to.v)?;
        self.push_segment(seg)?;
        Ok(seg)
    }

    /// Appends a segment that continues its object's last vertex.
    pub fn push_segment(&mut self, seg: Segment) -> Result<()> {
        seg.check()?;
        let p = self.polyline(seg.object)?;
        let last = p.last();
        if seg.t_l != last.t || seg.v_l != last.v {
            return Err(Error::DiscontinuousAppend { object: seg.object.0 });
        }
        self.polylines[seg.object.index()].push(Vertex::new(seg.t_r, seg.v_r));
        self.n += 1;
        self.mass += seg.area();
        self.abs_mass += abs_trapezoid(seg.t_r - seg.t_l, seg.v_l, seg.v_r);
        self.t_end = self.t_end.max(seg.t_r);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub t1: f64,
    pub t2: f64,
}

impl TimeInterval {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite()) || t1 > t2 {
            return Err(Error::InvalidQuery(format!("interval [{t1}, {t2}] is not ordered")));
        }
        Ok(Self { t1, t2 })
    }

    pub fn len(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn is_empty(&self) -> bool {
        self.t1 == self.t2
    }

    /// Checks `0 <= t1 <= t2 <= t_end`.
    pub fn check_within(&self, t_end: f64) -> Result<()> {
        for t in [self.t1, self.t2] {
            if !(0.0..=t_end).contains(&t) {
                return Err(Error::OutOfDomain { t, lo: 0.0, hi: t_end });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregate {
    #[default]
    Sum,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuerySpec {
    pub k: usize,
    pub interval: TimeInterval,
    pub aggregate: Aggregate,
}

impl QuerySpec {
    pub fn new(k: usize, t1: f64, t2: f64, aggregate: Aggregate) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidQuery("k must be at least 1".into()));
        }
        let interval = TimeInterval::new(t1, t2)?;
        if aggregate == Aggregate::Avg && interval.is_empty() {
            return Err(Error::DegenerateInterval);
        }
        Ok(Self { k, interval, aggregate })
    }

    pub fn sum(k: usize, t1: f64, t2: f64) -> Result<Self> {
        Self::new(k, t1, t2, Aggregate::Sum)
    }

    pub fn t1(&self) -> f64 {
        self.interval.t1
    }

    pub fn t2(&self) -> f64 {
        self.interval.t2
    }
}

/// Turns an integral over the query interval into the requested aggregate.
pub fn apply_aggregate(sum: f64, q: &QuerySpec) -> Result<f64> {
    match q.aggregate {
        Aggregate::Sum => Ok(sum),
        Aggregate::Avg if q.interval.is_empty() => Err(Error::DegenerateInterval),
        Aggregate::Avg => Ok(sum / q.interval.len()),
    }
}

/// Ranks per-object integrals (indexed by object position) for `q`.
pub fn rank_scores(sums: impl IntoIterator<Item = (ObjectId, f64)>, q: &QuerySpec) -> Result<RankedAnswer> {
    let mut top = TopK::new(q.k);
    for (id, s) in sums {
        top.push(Scored::new(id, apply_aggregate(s, q)?));
    }
    Ok(top.into_answer())
}

/// Ground truth: integrates every object and keeps the best `k`.
pub fn brute_force_topk(ds: &Dataset, q: &QuerySpec) -> Result<RankedAnswer> {
    q.interval.check_within(ds.t_end())?;
    let (t1, t2) = (q.t1(), q.t2());
    rank_scores(ds.polylines().iter().map(|p| (p.object, p.integral(t1, t2))), q)
}
