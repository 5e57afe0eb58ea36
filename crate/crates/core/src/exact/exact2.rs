use alloc::vec;
use alloc::vec::Vec;

use super::{open_index, seal_index, Extents};
use crate::error::Result;
use crate::model::{rank_scores, Dataset, ObjectId, QuerySpec, Segment};
use crate::rank::{RankedAnswer, TopKQuery};
use crate::storage::codec::{get_f64, put_f64};
use crate::storage::{BTree, ByteReader, ByteWriter, IndexKind, IoStats, PageId, PageStore};

/// `t_l`, `v_l`, `v_r`, prefix integral at `t_r`; the key is `t_r`.
const WIDTH: usize = 32;

fn encode(seg: &Segment, prefix: f64) -> [u8; WIDTH] {
    let mut b = [0u8; WIDTH];
    put_f64(&mut b, 0, seg.t_l);
    put_f64(&mut b, 8, seg.v_l);
    put_f64(&mut b, 16, seg.v_r);
    put_f64(&mut b, 24, prefix);
    b
}

/// Prefix-sum engine: one B+-tree per object, all in a single store.
///
/// Entry `ℓ` of object `i` is keyed by the segment's right end and carries
/// the integral from the object's first vertex up to that key, so
/// `σ_i(t1, t2) = P_i(t2) - P_i(t1)` with each `P_i(x)` one tree search.
#[derive(Debug, Clone)]
pub struct Exact2<S> {
    store: S,
    trees: Vec<BTree>,
    ext: Extents,
}

impl<S: PageStore> Exact2<S> {
    pub fn build(ds: &Dataset, mut store: S, io: &mut IoStats) -> Result<Self> {
        let mut trees = Vec::with_capacity(ds.m());
        for p in ds.polylines() {
            let mut prefix = 0.0;
            let entries = p.segments().map(|s| {
                prefix += s.area();
                (s.t_r, encode(&s, prefix))
            });
            trees.push(BTree::bulk_load(&mut store, WIDTH, entries, io)?);
        }
        let mut e = Self { store, trees, ext: Extents::of(ds) };
        e.seal(io)?;
        Ok(e)
    }

    pub fn open(store: S, io: &mut IoStats) -> Result<Self> {
        let (_, meta) = open_index(&store, IndexKind::Exact2, io)?;
        let mut r = ByteReader::new(&meta);
        let ext = Extents::decode(&mut r)?;
        let trees = (0..ext.m()).map(|_| BTree::decode(&mut r)).collect::<Result<_>>()?;
        Ok(Self { store, trees, ext })
    }

    pub fn seal(&mut self, io: &mut IoStats) -> Result<()> {
        let mut w = ByteWriter::new();
        self.ext.encode(&mut w);
        for t in &self.trees {
            t.encode(&mut w);
        }
        let root = self.trees.first().map_or(PageId::NONE, |t| t.root());
        seal_index(&mut self.store, IndexKind::Exact2, WIDTH, root, self.ext.n, &w.finish(), None, io)
    }

    /// Integral of object `i` from its first vertex to `x`.
    pub fn prefix_at(&self, i: usize, x: f64, io: &mut IoStats) -> Result<f64> {
        if x <= self.ext.first[i] || x >= self.ext.last[i].t {
            return Ok(self.ext.outside(i, x));
        }
        let cur = self.trees[i].seek_geq(&self.store, x, io)?;
        let (key, v) = cur.entry().expect("x lies inside the object's extent");
        let seg = Segment { t_l: get_f64(v, 0), t_r: key, v_l: get_f64(v, 8), v_r: get_f64(v, 16), object: ObjectId::from_index(i) };
        Ok(get_f64(v, 24) - seg.integral(x, key))
    }

    /// `σ_i(t1, t2)` for one object by position.
    pub fn object_sum(&self, i: usize, t1: f64, t2: f64, io: &mut IoStats) -> Result<f64> {
        if t1 >= t2 {
            return Ok(0.0);
        }
        Ok(self.prefix_at(i, t2, io)? - self.prefix_at(i, t1, io)?)
    }

    pub fn sums(&self, t1: f64, t2: f64, io: &mut IoStats) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.ext.m()];
        for (i, s) in out.iter_mut().enumerate() {
            *s = self.object_sum(i, t1, t2, io)?;
        }
        Ok(out)
    }

    pub fn append(&mut self, seg: Segment, io: &mut IoStats) -> Result<()> {
        self.ext.check_append(&seg)?;
        let i = seg.object.index();
        let prefix = self.ext.total[i] + seg.area();
        self.trees[i].append(&mut self.store, seg.t_r, &encode(&seg, prefix), io)?;
        self.ext.record(&seg);
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

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_store(self) -> S {
        self.store
    }

    /// The prefix entries of object `i` as `(key, prefix)` pairs.
    pub fn prefixes(&self, i: usize, io: &mut IoStats) -> Result<Vec<(f64, f64)>> {
        Ok(self.trees[i].collect(&self.store, io)?.into_iter().map(|(k, v)| (k, get_f64(&v, 24))).collect())
    }
}

impl<S: PageStore> TopKQuery for Exact2<S> {
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
    use crate::model::tests::d0;
    use crate::model::Vertex;
    use crate::storage::MemStore;

    fn close(a: f64, b: f64) -> bool {
        crate::scores_close(a, b)
    }

    #[test]
    fn d0_prefixes() {
        let mut io = IoStats::default();
        let e = Exact2::build(&d0(), MemStore::default(), &mut io).unwrap();
        assert_eq!(e.prefixes(2, &mut io).unwrap(), vec![(5.0, 15.0), (10.0, 30.0)]);
        assert_eq!(e.prefixes(0, &mut io).unwrap(), vec![(10.0, 20.0)]);
        // both endpoints land on the entry keyed 5: 15 - 15 + σ(2,5) - σ(4,5)
        assert!(close(e.object_sum(2, 2.0, 4.0, &mut io).unwrap(), 5.4 - 0.6));
        let a = e.query(&QuerySpec::sum(3, 0.0, 10.0).unwrap(), &mut io).unwrap();
        let got: Vec<(u32, f64)> = a.entries.iter().map(|s| (s.object.0, s.score)).collect();
        assert_eq!(got, vec![(2, 50.0), (3, 30.0), (1, 20.0)]);
    }

    #[test]
    fn last_prefix_is_full_integral() {
        let ds = mixed(60, 40, 3);
        let mut io = IoStats::default();
        let e = Exact2::build(&ds, MemStore::new(512).unwrap(), &mut io).unwrap();
        for (i, p) in ds.polylines().iter().enumerate() {
            let pre = e.prefixes(i, &mut io).unwrap();
            assert_eq!(pre.len(), p.segment_count());
            assert!(close(pre.last().unwrap().1, p.integral(0.0, ds.t_end())));
        }
    }

    #[test]
    fn matches_oracle_on_mixed_data() {
        for seed in 0..4 {
            let ds = mixed(40, 60, seed + 10);
            let e = Exact2::build(&ds, MemStore::new(512).unwrap(), &mut IoStats::default()).unwrap();
            check_engine(&e, &ds, 150);
        }
    }

    #[test]
    fn append_and_reopen() {
        let mut io = IoStats::default();
        let mut e = Exact2::build(&d0(), MemStore::default(), &mut io).unwrap();
        e.append(Segment::new(ObjectId(1), 10.0, 2.0, 12.0, 4.0).unwrap(), &mut io).unwrap();
        assert_eq!(e.object_sum(0, 0.0, 12.0, &mut io).unwrap(), 26.0);
        e.seal(&mut io).unwrap();
        let e2 = Exact2::open(e.into_store(), &mut io).unwrap();
        let mut ds = d0();
        ds.append(ObjectId(1), Vertex::new(12.0, 4.0)).unwrap();
        check_engine(&e2, &ds, 50);
    }
}
