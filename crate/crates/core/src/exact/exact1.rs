use alloc::vec;
use alloc::vec::Vec;

use super::{open_index, seal_index, Extents};
use crate::error::{Error, Result};
use crate::model::{rank_scores, Dataset, ObjectId, QuerySpec, Segment};
use crate::rank::{RankedAnswer, TopKQuery};
use crate::storage::codec::{get_f64, get_u32, put_f64, put_u32};
use crate::storage::{BTree, ByteReader, ByteWriter, IndexKind, IoStats, PageStore};

/// `t_r`, `v_l`, `v_r`, object id; the key is `t_l`.
const WIDTH: usize = 28;

fn encode(seg: &Segment) -> [u8; WIDTH] {
    let mut b = [0u8; WIDTH];
    put_f64(&mut b, 0, seg.t_r);
    put_f64(&mut b, 8, seg.v_l);
    put_f64(&mut b, 16, seg.v_r);
    put_u32(&mut b, 24, seg.object.0);
    b
}

fn decode(key: f64, b: &[u8]) -> Segment {
    Segment { t_l: key, t_r: get_f64(b, 0), v_l: get_f64(b, 8), v_r: get_f64(b, 16), object: ObjectId(get_u32(b, 24)) }
}

/// Segment-scan engine: all segments in one B+-tree keyed by left end.
///
/// A query scans forward from `t1` to `t2` and backward from `t1` until
/// every object whose extent straddles `t1` has contributed its straddling
/// segment. The backward part is what the forward scan alone would miss for
/// objects with no vertex inside the interval; in the worst case it touches
/// `O(N/B)` pages.
#[derive(Debug, Clone)]
pub struct Exact1<S> {
    store: S,
    tree: BTree,
    ext: Extents,
}

impl<S: PageStore> Exact1<S> {
    pub fn build(ds: &Dataset, mut store: S, io: &mut IoStats) -> Result<Self> {
        let mut segs: Vec<Segment> = ds.segments().collect();
        segs.sort_by(|a, b| a.t_l.total_cmp(&b.t_l).then(a.object.cmp(&b.object)));
        let tree = BTree::bulk_load(&mut store, WIDTH, segs.iter().map(|s| (s.t_l, encode(s))), io)?;
        let mut e = Self { store, tree, ext: Extents::of(ds) };
        e.seal(io)?;
        Ok(e)
    }

    pub fn open(store: S, io: &mut IoStats) -> Result<Self> {
        let (_, meta) = open_index(&store, IndexKind::Exact1, io)?;
        let mut r = ByteReader::new(&meta);
        let tree = BTree::decode(&mut r)?;
        let ext = Extents::decode(&mut r)?;
        Ok(Self { store, tree, ext })
    }

    /// Persists metadata so that [`Exact1::open`] sees the current state.
    pub fn seal(&mut self, io: &mut IoStats) -> Result<()> {
        let mut w = ByteWriter::new();
        self.tree.encode(&mut w);
        self.ext.encode(&mut w);
        let root = self.tree.root();
        seal_index(&mut self.store, IndexKind::Exact1, WIDTH, root, self.tree.len(), &w.finish(), None, io)
    }

    /// `σ_i(t1, t2)` for every object, by position.
    pub fn sums(&self, t1: f64, t2: f64, io: &mut IoStats) -> Result<Vec<f64>> {
        let m = self.ext.m();
        let mut sums = vec![0.0; m];
        if t1 >= t2 || m == 0 {
            return Ok(sums);
        }
        let start = self.tree.seek_geq(&self.store, t1, io)?;
        let mut cur = start.clone();
        let mut vertex_at_t1 = 0usize;
        while let Some((key, v)) = cur.entry() {
            if key >= t2 {
                break;
            }
            let seg = decode(key, v);
            let i = seg.object.index();
            if key == t1 && self.ext.first[i] < t1 {
                vertex_at_t1 += 1;
            }
            sums[i] += seg.integral(t1, t2);
            cur.advance(&self.store, io)?;
        }
        let straddling = (0..m).filter(|&i| self.ext.first[i] < t1 && t1 < self.ext.last[i].t).count();
        let mut need = straddling - vertex_at_t1;
        let mut cur = start;
        while need > 0 && cur.retreat(&self.store, io)? {
            let (key, v) = cur.entry().expect("retreat landed on an entry");
            let seg = decode(key, v);
            if seg.t_r > t1 {
                sums[seg.object.index()] += seg.integral(t1, t2);
                need -= 1;
            }
        }
        if need > 0 {
            return Err(Error::Corrupt("straddling segments missing from the segment tree".into()));
        }
        Ok(sums)
    }

    pub fn append(&mut self, seg: Segment, io: &mut IoStats) -> Result<()> {
        self.ext.check_append(&seg)?;
        self.tree.append(&mut self.store, seg.t_l, &encode(&seg), io)?;
        self.ext.record(&seg);
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.ext.m()
    }

    pub fn n(&self) -> u64 {
        self.tree.len()
    }

    pub fn t_end(&self) -> f64 {
        self.ext.t_end
    }

    pub fn tree(&self) -> &BTree {
        &self.tree
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_store(self) -> S {
        self.store
    }
}

impl<S: PageStore> TopKQuery for Exact1<S> {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer> {
        q.interval.check_within(self.t_end())?;
        let sums = self.sums(q.t1(), q.t2(), io)?;
        rank_scores(self.ext.ids().zip(sums), q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::tests::{assert_same, check_engine, mixed};
    use crate::model::tests::d0;
    use crate::model::{brute_force_topk, Vertex};
    use crate::storage::MemStore;

    fn pairs(a: &RankedAnswer) -> Vec<(u32, f64)> {
        a.entries.iter().map(|e| (e.object.0, e.score)).collect()
    }

    #[test]
    fn d0_examples() {
        let mut io = IoStats::default();
        let e = Exact1::build(&d0(), MemStore::default(), &mut io).unwrap();
        assert_eq!(e.n(), 4);
        let a = e.query(&QuerySpec::sum(3, 2.0, 4.0).unwrap(), &mut io).unwrap();
        let q = QuerySpec::sum(3, 2.0, 4.0).unwrap();
        assert_same(&a, &brute_force_topk(&d0(), &q).unwrap(), &d0(), &q);
        assert_eq!(a.objects().map(|o| o.0).collect::<Vec<_>>(), vec![2, 3, 1]);
        let a = e.query(&QuerySpec::sum(2, 0.0, 10.0).unwrap(), &mut io).unwrap();
        assert_eq!(pairs(&a), vec![(2, 50.0), (3, 30.0)]);
    }

    #[test]
    fn empty_dataset() {
        let mut io = IoStats::default();
        let e = Exact1::build(&Dataset::empty(), MemStore::default(), &mut io).unwrap();
        assert!(e.query(&QuerySpec::sum(3, 0.0, 0.0).unwrap(), &mut io).unwrap().is_empty());
    }

    #[test]
    fn matches_oracle_on_mixed_data() {
        for seed in 0..4 {
            let ds = mixed(40, 60, seed);
            let e = Exact1::build(&ds, MemStore::new(512).unwrap(), &mut IoStats::default()).unwrap();
            check_engine(&e, &ds, 150);
        }
    }

    #[test]
    fn append_and_reopen() {
        let mut io = IoStats::default();
        let mut e = Exact1::build(&d0(), MemStore::default(), &mut io).unwrap();
        e.append(Segment::new(ObjectId(1), 10.0, 2.0, 12.0, 4.0).unwrap(), &mut io).unwrap();
        let a = e.query(&QuerySpec::sum(3, 0.0, 12.0).unwrap(), &mut io).unwrap();
        assert_eq!(pairs(&a), vec![(2, 50.0), (3, 30.0), (1, 26.0)]);
        assert!(e.append(Segment::new(ObjectId(2), 5.0, 5.0, 13.0, 1.0).unwrap(), &mut io).is_err());
        e.seal(&mut io).unwrap();
        let e2 = Exact1::open(e.into_store(), &mut io).unwrap();
        let mut ds = d0();
        ds.append(ObjectId(1), Vertex::new(12.0, 4.0)).unwrap();
        check_engine(&e2, &ds, 50);
    }
}
