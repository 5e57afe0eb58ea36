use alloc::vec;
use alloc::vec::Vec;

use super::{open_index, seal_index, Extents};
use crate::error::{Error, Result};
use crate::model::{rank_scores, Dataset, QuerySpec, Segment};
use crate::rank::{RankedAnswer, TopKQuery};
use crate::storage::codec::{get_f64, get_u32, put_f64, put_u32};
use crate::storage::{ByteReader, ByteWriter, IndexKind, IntervalRecord, IntervalTree, IoStats, PageId, PageStore, RecordLoc};

/// object id, `v_l`, `v_r`, prefix integral at the interval's right end.
const WIDTH: usize = 28;

fn record(seg: &Segment, prefix: f64, closed: bool) -> IntervalRecord {
    let mut b = vec![0u8; WIDTH];
    put_u32(&mut b, 0, seg.object.0);
    put_f64(&mut b, 4, seg.v_l);
    put_f64(&mut b, 12, seg.v_r);
    put_f64(&mut b, 20, prefix);
    IntervalRecord::new(seg.t_l, seg.t_r, closed, b)
}

fn encode_loc(w: &mut ByteWriter, loc: RecordLoc) {
    match loc {
        RecordLoc::Page { page, off } => w.u8(0).u32(page.0).u32(off as u32),
        RecordLoc::Tail(i) => w.u8(1).u32(i).u32(0),
    };
}

fn decode_loc(r: &mut ByteReader<'_>) -> Result<RecordLoc> {
    let (tag, a, b) = (r.u8()?, r.u32()?, r.u32()?);
    match tag {
        0 => Ok(RecordLoc::Page { page: PageId(a), off: b as u16 }),
        1 => Ok(RecordLoc::Tail(a)),
        _ => Err(Error::Corrupt("bad record location tag".into())),
    }
}

/// Interval-tree engine: every segment `ℓ` of object `i` becomes the entry
/// `[t_{ℓ-1}, t_ℓ)` (closed on the object's last segment) carrying the
/// prefix integral at `t_ℓ`. Stabbing at `t` yields one entry per object
/// whose extent contains `t`, so two stabs price every object.
#[derive(Debug, Clone)]
pub struct Exact3<S> {
    store: S,
    tree: IntervalTree,
    ext: Extents,
    /// Location of each object's closed last entry.
    last_loc: Vec<RecordLoc>,
}

impl<S: PageStore> Exact3<S> {
    pub fn build(ds: &Dataset, mut store: S, io: &mut IoStats) -> Result<Self> {
        let mut recs = Vec::with_capacity(ds.n());
        let mut last_idx = Vec::with_capacity(ds.m());
        for p in ds.polylines() {
            let mut prefix = 0.0;
            let n = p.segment_count();
            for (j, s) in p.segments().enumerate() {
                prefix += s.area();
                recs.push(record(&s, prefix, j + 1 == n));
            }
            last_idx.push(recs.len() - 1);
        }
        let (tree, locs) = IntervalTree::build(&mut store, WIDTH, &recs, io)?;
        let last_loc = last_idx.into_iter().map(|i| locs[i]).collect();
        let mut e = Self { store, tree, ext: Extents::of(ds), last_loc };
        e.seal(io)?;
        Ok(e)
    }

    pub fn open(store: S, io: &mut IoStats) -> Result<Self> {
        let (_, meta) = open_index(&store, IndexKind::Exact3, io)?;
        let mut r = ByteReader::new(&meta);
        let tree = IntervalTree::decode(&mut r)?;
        let ext = Extents::decode(&mut r)?;
        let last_loc = (0..ext.m()).map(|_| decode_loc(&mut r)).collect::<Result<_>>()?;
        Ok(Self { store, tree, ext, last_loc })
    }

    pub fn seal(&mut self, io: &mut IoStats) -> Result<()> {
        let mut w = ByteWriter::new();
        self.tree.encode(&mut w);
        self.ext.encode(&mut w);
        for &l in &self.last_loc {
            encode_loc(&mut w, l);
        }
        let root = self.tree.root();
        seal_index(&mut self.store, IndexKind::Exact3, WIDTH, root, self.ext.n, &w.finish(), None, io)
    }

    /// Prefix integrals of every object at `t`, from one stabbing query.
    pub fn prefixes_at(&self, t: f64, io: &mut IoStats) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = (0..self.ext.m()).map(|i| self.ext.outside(i, t)).collect();
        self.tree.stab(&self.store, t, io, |h| {
            let v = h.value;
            let i = get_u32(v, 0) as usize - 1;
            let (v_l, v_r, prefix) = (get_f64(v, 4), get_f64(v, 12), get_f64(v, 20));
            let seg = Segment { t_l: h.lo, t_r: h.hi, v_l, v_r, object: crate::model::ObjectId::from_index(i) };
            out[i] = prefix - seg.integral(t, h.hi);
        })?;
        Ok(out)
    }

    /// Objects reported by a stab at `t`, for cardinality checks.
    pub fn stab_count(&self, t: f64, io: &mut IoStats) -> Result<usize> {
        let mut n = 0;
        self.tree.stab(&self.store, t, io, |_| n += 1)?;
        Ok(n)
    }

    pub fn sums(&self, t1: f64, t2: f64, io: &mut IoStats) -> Result<Vec<f64>> {
        if t1 >= t2 {
            return Ok(vec![0.0; self.ext.m()]);
        }
        let p1 = self.prefixes_at(t1, io)?;
        let mut p2 = self.prefixes_at(t2, io)?;
        p2.iter_mut().zip(p1).for_each(|(b, a)| *b -= a);
        Ok(p2)
    }

    pub fn append(&mut self, seg: Segment, io: &mut IoStats) -> Result<()> {
        self.ext.check_append(&seg)?;
        let i = seg.object.index();
        self.tree.set_closed(&mut self.store, self.last_loc[i], false, io)?;
        let prefix = self.ext.total[i] + seg.area();
        self.last_loc[i] = self.tree.push_tail(record(&seg, prefix, true))?;
        self.ext.record(&seg);
        if self.tree.needs_rebuild() {
            let remap = self.tree.rebuild(&mut self.store, io)?;
            for l in &mut self.last_loc {
                *l = remap.get(*l).ok_or_else(|| Error::Corrupt("record lost in rebuild".into()))?;
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.ext.m()
    }

    pub fn n(&self) -> u64 {
        self.ext.n
    }

    pub fn t_end(&self) -> f64 {
        self.ext.t_end
    }

    pub fn tree(&self) -> &IntervalTree {
        &self.tree
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_store(self) -> S {
        self.store
    }
}

impl<S: PageStore> TopKQuery for Exact3<S> {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer> {
        q.interval.check_within(self.t_end())?;
        let sums = self.sums(q.t1(), q.t2(), io)?;
        rank_scores(self.ext.ids().zip(sums), q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::tests::{check_engine, mixed};
    use crate::exact::{Exact1, Exact2};
    use crate::model::tests::d0;
    use crate::model::{ObjectId, Vertex};
    use crate::storage::MemStore;

    fn pairs(a: &RankedAnswer) -> Vec<(u32, f64)> {
        a.entries.iter().map(|e| (e.object.0, e.score)).collect()
    }

    #[test]
    fn d0_examples() {
        let mut io = IoStats::default();
        let e = Exact3::build(&d0(), MemStore::default(), &mut io).unwrap();
        assert_eq!(e.tree().len(), 4);
        assert_eq!(e.stab_count(3.0, &mut io).unwrap(), 3);
        let mut at7 = vec![];
        e.tree.stab(&e.store, 7.0, &mut io, |h| at7.push((get_u32(h.value, 0), h.lo, h.hi))).unwrap();
        at7.sort_by_key(|x| x.0);
        assert_eq!(at7, vec![(1, 0.0, 10.0), (2, 0.0, 10.0), (3, 5.0, 10.0)]);
        let a = e.query(&QuerySpec::sum(1, 0.0, 10.0).unwrap(), &mut io).unwrap();
        assert_eq!(pairs(&a), vec![(2, 50.0)]);
        let a = e.query(&QuerySpec::sum(3, 2.0, 4.0).unwrap(), &mut io).unwrap();
        assert_eq!(a.objects().map(|o| o.0).collect::<Vec<_>>(), vec![2, 3, 1]);
    }

    #[test]
    fn stab_cardinality_equals_covering_objects() {
        let ds = mixed(80, 30, 5);
        let mut io = IoStats::default();
        let e = Exact3::build(&ds, MemStore::new(1024).unwrap(), &mut io).unwrap();
        for k in 0..=400 {
            let t = ds.t_end() * k as f64 / 400.0;
            let covering = ds.polylines().iter().filter(|p| p.first_t() <= t && t <= p.last().t).count();
            assert_eq!(e.stab_count(t, &mut io).unwrap(), covering, "t = {t}");
        }
    }

    #[test]
    fn matches_oracle_on_mixed_data() {
        for seed in 0..4 {
            let ds = mixed(40, 60, seed + 20);
            let e = Exact3::build(&ds, MemStore::new(512).unwrap(), &mut IoStats::default()).unwrap();
            check_engine(&e, &ds, 150);
        }
    }

    #[test]
    fn appends_match_rebuild_across_engines() {
        let mut ds = mixed(12, 8, 7);
        let end = ds.t_end();
        for i in 1..=12 {
            ds.append(ObjectId(i), Vertex::new(end, 1.0)).unwrap();
        }
        let mut io = IoStats::default();
        let mut e1 = Exact1::build(&ds, MemStore::new(512).unwrap(), &mut io).unwrap();
        let mut e2 = Exact2::build(&ds, MemStore::new(512).unwrap(), &mut io).unwrap();
        let mut e3 = Exact3::build(&ds, MemStore::new(512).unwrap(), &mut io).unwrap();
        let mut now: f64 = ds.polylines().iter().map(|p| p.last().t).fold(0.0, f64::max);
        for step in 0..1000u32 {
            // extending the object that lags furthest keeps segment starts non-decreasing
            let p = ds.polylines().iter().min_by(|a, b| a.last().t.total_cmp(&b.last().t)).unwrap();
            let (id, last) = (p.object, p.last());
            now += 0.25 + (step % 3) as f64;
            let seg = Segment::new(id, last.t, last.v, now, ((step * 7) % 11) as f64 - 2.0).unwrap();
            ds.push_segment(seg).unwrap();
            e1.append(seg, &mut io).unwrap();
            e2.append(seg, &mut io).unwrap();
            e3.append(seg, &mut io).unwrap();
            if step % 250 == 249 {
                check_engine(&e1, &ds, 40);
                check_engine(&e2, &ds, 40);
                check_engine(&e3, &ds, 40);
            }
        }
        e3.seal(&mut io).unwrap();
        let reopened = Exact3::open(e3.into_store(), &mut io).unwrap();
        check_engine(&reopened, &ds, 100);
        let fresh = Exact3::build(&ds, MemStore::new(512).unwrap(), &mut io).unwrap();
        check_engine(&fresh, &ds, 100);
    }

    #[test]
    fn append_example() {
        let mut io = IoStats::default();
        let mut e = Exact3::build(&d0(), MemStore::default(), &mut io).unwrap();
        e.append(Segment::new(ObjectId(1), 10.0, 2.0, 12.0, 4.0).unwrap(), &mut io).unwrap();
        let a = e.query(&QuerySpec::sum(3, 0.0, 12.0).unwrap(), &mut io).unwrap();
        assert_eq!(pairs(&a), vec![(2, 50.0), (3, 30.0), (1, 26.0)]);
        assert_eq!(e.stab_count(10.0, &mut io).unwrap(), 3);
        let mut ds = d0();
        ds.append(ObjectId(1), Vertex::new(12.0, 4.0)).unwrap();
        check_engine(&e, &ds, 60);
    }
}
