//! Exact engines.
//!
//! - [`Exact1`]: one B+-tree over all segments keyed by left end; a query
//!   scans the segments overlapping the interval.
//! - [`Exact2`]: one B+-tree per object over prefix integrals; a query does
//!   two searches per object.
//! - [`Exact3`]: one interval tree over per-object prefix entries; a query is
//!   two stabbing queries.
//!
//! All three rank every object (objects with no mass in the interval score
//! 0) and support appending a segment at the end of an object.

mod exact1;
mod exact2;
mod exact3;

pub use exact1::Exact1;
pub use exact2::Exact2;
pub use exact3::Exact3;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Dataset, ObjectId, Segment, Vertex};
use crate::storage::{read_blob, write_blob, ByteReader, ByteWriter, IndexHeader, IndexKind, IoStats, PageId, PageStore};

/// Per-object extents and totals kept in memory by every engine.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Extents {
    pub first: Vec<f64>,
    pub last: Vec<Vertex>,
    pub total: Vec<f64>,
    /// Largest segment left end; appends may not start before it.
    pub max_start: f64,
    pub t_end: f64,
    pub n: u64,
}

impl Extents {
    pub fn of(ds: &Dataset) -> Self {
        let p = ds.polylines();
        Self {
            first: p.iter().map(|p| p.first_t()).collect(),
            last: p.iter().map(|p| p.last()).collect(),
            total: p.iter().map(|p| p.total()).collect(),
            max_start: ds.segments().map(|s| s.t_l).fold(f64::NEG_INFINITY, f64::max),
            t_end: ds.t_end(),
            n: ds.n() as u64,
        }
    }

    pub fn m(&self) -> usize {
        self.first.len()
    }

    pub fn check_append(&self, seg: &Segment) -> Result<()> {
        seg.check()?;
        let i = seg.object.0 as usize;
        if i == 0 || i > self.m() {
            return Err(Error::UnknownObject(seg.object.0));
        }
        if seg.t_l < self.max_start {
            return Err(Error::OutOfOrderAppend { key: seg.t_l, max: self.max_start });
        }
        let last = self.last[i - 1];
        if seg.t_l != last.t || seg.v_l != last.v {
            return Err(Error::DiscontinuousAppend { object: seg.object.0 });
        }
        Ok(())
    }

    pub fn record(&mut self, seg: &Segment) {
        let i = seg.object.index();
        self.last[i] = Vertex::new(seg.t_r, seg.v_r);
        self.total[i] += seg.area();
        self.max_start = self.max_start.max(seg.t_l);
        self.t_end = self.t_end.max(seg.t_r);
        self.n += 1;
    }

    /// Prefix integral of object `i` for a time outside its extent.
    pub fn outside(&self, i: usize, t: f64) -> f64 {
        if t >= self.last[i].t {
            self.total[i]
        } else {
            0.0
        }
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.f64(self.max_start).f64(self.t_end).u64(self.n).u64(self.m() as u64);
        for i in 0..self.m() {
            w.f64(self.first[i]).f64(self.last[i].t).f64(self.last[i].v).f64(self.total[i]);
        }
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let (max_start, t_end, n) = (r.f64()?, r.f64()?, r.u64()?);
        let m = r.len()?;
        let mut e = Self { first: Vec::with_capacity(m), last: Vec::with_capacity(m), total: Vec::with_capacity(m), max_start, t_end, n };
        for _ in 0..m {
            e.first.push(r.f64()?);
            let (t, v) = (r.f64()?, r.f64()?);
            e.last.push(Vertex::new(t, v));
            e.total.push(r.f64()?);
        }
        Ok(e)
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> {
        (0..self.m()).map(ObjectId::from_index)
    }
}

/// Writes an engine's metadata blob and the header page.
#[allow(clippy::too_many_arguments)]
pub(crate) fn seal_index<S: PageStore>(
    store: &mut S,
    kind: IndexKind,
    entry_width: usize,
    root: PageId,
    entry_count: u64,
    meta: &[u8],
    companion: Option<alloc::string::String>,
    io: &mut IoStats,
) -> Result<()> {
    let meta_page = write_blob(store, meta, io)?;
    IndexHeader {
        kind,
        page_size: store.page_size() as u32,
        entry_width: entry_width as u32,
        root,
        entry_count,
        meta_page,
        meta_len: meta.len() as u64,
        companion,
    }
    .write(store, io)
}

/// Reads and checks the header, returning it with the metadata blob.
pub(crate) fn open_index<S: PageStore>(store: &S, kind: IndexKind, io: &mut IoStats) -> Result<(IndexHeader, Vec<u8>)> {
    let h = IndexHeader::read(store, io)?;
    h.expect(kind, store)?;
    let meta = read_blob(store, h.meta_page, h.meta_len as usize, io)?;
    Ok((h, meta))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::tests::{d0, poly};
    use crate::model::{brute_force_topk, Polyline, QuerySpec};
    use crate::rank::{RankedAnswer, TopKQuery};
    use alloc::vec;

    pub fn assert_same(got: &RankedAnswer, want: &RankedAnswer, ds: &Dataset, q: &QuerySpec) {
        let score = |o: ObjectId| crate::model::apply_aggregate(ds.polyline(o).unwrap().integral(q.t1(), q.t2()), q).unwrap();
        if let Err(e) = crate::eval::same_ranking(got, want, score) {
            panic!("{e}\n got {got:?}\nwant {want:?}");
        }
    }

    /// A deterministic mixed dataset: staggered extents, sign changes,
    /// shared vertex times.
    pub fn mixed(m: u32, n: usize, seed: u64) -> Dataset {
        let mut s = seed;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut polys: Vec<Polyline> = Vec::new();
        for id in 1..=m {
            let mut t = (rnd() * 20.0).floor();
            let cnt = 2 + (rnd() * n as f64) as usize;
            let mut pts = vec![];
            for _ in 0..cnt {
                pts.push((t, (rnd() - 0.3) * 10.0));
                t += if rnd() < 0.3 { 1.0 } else { 0.1 + rnd() * 3.0 };
            }
            polys.push(poly(id, &pts));
        }
        let end = polys.iter().map(|p| p.last().t).fold(0.0, f64::max);
        Dataset::with_domain(polys, end + 1.0).unwrap()
    }

    pub fn queries(ds: &Dataset, count: usize, seed: u64) -> Vec<QuerySpec> {
        let mut s = seed;
        let mut rnd = move || {
            s = s.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let end = ds.t_end();
        (0..count)
            .map(|i| {
                let mut a = rnd() * end;
                let mut b = rnd() * end;
                if i % 5 == 0 {
                    a = a.floor();
                    b = b.floor();
                }
                if i % 17 == 0 {
                    b = a;
                }
                let k = 1 + (rnd() * (ds.m() as f64 + 2.0)) as usize;
                QuerySpec::sum(k, a.min(b), a.max(b)).unwrap()
            })
            .collect()
    }

    pub fn check_engine(engine: &impl TopKQuery, ds: &Dataset, count: usize) {
        for q in queries(ds, count, 99) {
            let got = engine.query(&q, &mut IoStats::default()).unwrap();
            assert_same(&got, &brute_force_topk(ds, &q).unwrap(), ds, &q);
        }
    }

    #[test]
    fn append_checks() {
        let ds = d0();
        let e = Extents::of(&ds);
        let ok = Segment::new(ObjectId(1), 10.0, 2.0, 12.0, 4.0).unwrap();
        assert!(e.check_append(&ok).is_ok());
        let early = Segment::new(ObjectId(1), 4.0, 2.0, 12.0, 4.0).unwrap();
        assert!(matches!(e.check_append(&early), Err(Error::OutOfOrderAppend { .. })));
        let jump = Segment::new(ObjectId(1), 10.0, 3.0, 12.0, 4.0).unwrap();
        assert_eq!(e.check_append(&jump), Err(Error::DiscontinuousAppend { object: 1 }));
        let ghost = Segment::new(ObjectId(9), 10.0, 3.0, 12.0, 4.0).unwrap();
        assert_eq!(e.check_append(&ghost), Err(Error::UnknownObject(9)));
    }

    #[test]
    fn extents_round_trip() {
        let e = Extents::of(&mixed(7, 5, 1));
        let mut w = ByteWriter::new();
        e.encode(&mut w);
        let b = w.finish();
        assert_eq!(Extents::decode(&mut ByteReader::new(&b)).unwrap(), e);
    }
}
