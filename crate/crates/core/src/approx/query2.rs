use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::dyadic::{DyadicNode, DyadicTree};
use super::lists::{read_list, ListLoc, ListWriter, LOC};
use super::{check_k_max, check_query, gap_masses, top_list, zeros_by_id, Common};
use crate::breakpoints::BreakpointSet;
use crate::error::{Error, Result};
use crate::exact::{open_index, seal_index, Exact2};
use crate::model::{rank_scores, Dataset, ObjectId, QuerySpec};
use crate::rank::{RankedAnswer, Scored, TopKQuery};
use crate::storage::{ByteReader, ByteWriter, IndexKind, IoStats, PageId, PageStore};

/// Top-`k_max` lists for the dyadic intervals over the elementary gaps.
///
/// Lists are located through a directory of fixed-size entries in node
/// order, so a node costs one directory page and its list pages.
#[derive(Debug, Clone)]
pub struct Query2Index<S> {
    store: S,
    common: Common,
    tree: DyadicTree,
    dir: PageId,
}

/// Objects gathered from the nodes covering a snapped interval, with their
/// scores summed over the lists they appeared in.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub scores: BTreeMap<ObjectId, f64>,
}

impl CandidateSet {
    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl<S: PageStore> Query2Index<S> {
    pub fn build(ds: &Dataset, bps: BreakpointSet, k_max: usize, mut store: S, io: &mut IoStats) -> Result<Self> {
        check_k_max(k_max)?;
        if bps.t_end() != ds.t_end() {
            return Err(Error::Parameter("breakpoints do not end at the dataset's T".into()));
        }
        let ps = store.page_size();
        let m = ds.m();
        let tree = DyadicTree::new(bps.gaps());
        let mut level = gap_masses(ds, bps.points());

        let mut writer = ListWriter::new(ps);
        let mut locs = Vec::with_capacity(tree.node_count());
        for l in 0..tree.levels() {
            if l > 0 {
                let below = level;
                level = vec![0.0; tree.width(l) * m];
                for (h, row) in level.chunks_mut(m).enumerate() {
                    for c in [2 * h, 2 * h + 1] {
                        if let Some(child) = below.get(c * m..(c + 1) * m) {
                            for (a, x) in row.iter_mut().zip(child) {
                                *a += x;
                            }
                        }
                    }
                }
            }
            for row in level.chunks(m) {
                locs.push(writer.push(&mut store, &top_list(row, k_max), io)?);
            }
        }
        writer.flush(&mut store, io)?;

        let per = ps / LOC;
        let dir = store.allocate_run(locs.len().div_ceil(per) as u32)?;
        let mut buf = vec![0u8; ps];
        for (p, chunk) in locs.chunks(per).enumerate() {
            buf.fill(0);
            for (i, loc) in chunk.iter().enumerate() {
                buf[i * LOC..(i + 1) * LOC].copy_from_slice(&loc.to_bytes());
            }
            store.write(PageId(dir.0 + p as u32), &buf, io)?;
        }

        let mut idx = Self { store, common: Common { m, k_max, bps }, tree, dir };
        idx.seal(io)?;
        Ok(idx)
    }

    pub fn open(store: S, io: &mut IoStats) -> Result<Self> {
        let (h, meta) = open_index(&store, IndexKind::Query2, io)?;
        let common = Common::decode(&mut ByteReader::new(&meta))?;
        let tree = DyadicTree::new(common.bps.gaps());
        if h.entry_count != tree.node_count() as u64 {
            return Err(Error::Corrupt("dyadic node count does not match the breakpoints".into()));
        }
        Ok(Self { store, common, tree, dir: h.root })
    }

    fn seal(&mut self, io: &mut IoStats) -> Result<()> {
        let mut w = ByteWriter::new();
        self.common.encode(&mut w);
        let count = self.tree.node_count() as u64;
        seal_index(&mut self.store, IndexKind::Query2, LOC, self.dir, count, &w.finish(), None, io)
    }

    pub fn breakpoints(&self) -> &BreakpointSet {
        &self.common.bps
    }

    pub fn k_max(&self) -> usize {
        self.common.k_max
    }

    pub fn m(&self) -> usize {
        self.common.m
    }

    pub fn tree(&self) -> &DyadicTree {
        &self.tree
    }

    /// Number of stored lists, one per dyadic node.
    pub fn list_count(&self) -> usize {
        self.tree.node_count()
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_store(self) -> S {
        self.store
    }

    /// Nodes covering `[b_lo, b_hi]` given as breakpoint indices.
    pub fn decompose_dyadic(&self, lo: usize, hi: usize) -> Result<Vec<DyadicNode>> {
        if lo > hi || hi > self.tree.gaps() {
            return Err(Error::Parameter(format!("breakpoint range {lo}..{hi} outside 0..{}", self.tree.gaps())));
        }
        Ok(self.tree.decompose(lo, hi))
    }

    /// First `k` entries of a node's list.
    pub fn node_list(&self, n: DyadicNode, k: usize, io: &mut IoStats) -> Result<Vec<Scored>> {
        let mut dir = DirCache::default();
        self.node_list_cached(n, k, &mut dir, io)
    }

    fn node_list_cached(&self, n: DyadicNode, k: usize, dir: &mut DirCache, io: &mut IoStats) -> Result<Vec<Scored>> {
        let pos = self.tree.position(n);
        let per = self.store.page_size() / LOC;
        let page = PageId(self.dir.0 + (pos / per) as u32);
        let off = (pos % per) * LOC;
        let loc = ListLoc::from_bytes(&dir.page(&self.store, page, io)?[off..off + LOC]);
        read_list(&self.store, loc, k, io)
    }

    /// Snaps the query interval and merges the top `k` of every covering
    /// node, summing repeated objects.
    pub fn candidates(&self, q: &QuerySpec, io: &mut IoStats) -> Result<CandidateSet> {
        check_query(q, self.k_max(), self.common.bps.t_end())?;
        let bps = &self.common.bps;
        let (lo, hi) = (bps.snap_index(q.t1())?, bps.snap_index(q.t2())?);
        let nodes = self.tree.decompose(lo, hi);
        let mut scores = BTreeMap::new();
        let mut dir = DirCache::default();
        for &n in &nodes {
            for e in self.node_list_cached(n, q.k, &mut dir, io)? {
                *scores.entry(e.object).or_insert(0.0) += e.score;
            }
        }
        Ok(CandidateSet { lo: bps.get(lo), hi: bps.get(hi), nodes: nodes.len(), scores })
    }
}

/// Directory pages read during one query.
#[derive(Default)]
struct DirCache {
    pages: Vec<(PageId, Vec<u8>)>,
}

impl DirCache {
    fn page<S: PageStore>(&mut self, store: &S, id: PageId, io: &mut IoStats) -> Result<&[u8]> {
        let i = match self.pages.iter().position(|(p, _)| *p == id) {
            Some(i) => i,
            None => {
                let mut buf = vec![0u8; store.page_size()];
                store.read(id, &mut buf, io)?;
                self.pages.push((id, buf));
                self.pages.len() - 1
            }
        };
        Ok(&self.pages[i].1)
    }
}

impl<S: PageStore> TopKQuery for Query2Index<S> {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer> {
        let c = self.candidates(q, io)?;
        if c.is_degenerate() {
            return Ok(zeros_by_id(self.m(), q.k));
        }
        rank_scores(c.scores, q)
    }
}

/// QUERY2 candidates re-scored exactly over the snapped interval.
#[derive(Debug, Clone)]
pub struct Appx2Plus<S, T> {
    pub query2: Query2Index<S>,
    pub exact2: Exact2<T>,
}

impl<S: PageStore, T: PageStore> Appx2Plus<S, T> {
    pub fn new(query2: Query2Index<S>, exact2: Exact2<T>) -> Result<Self> {
        if query2.m() != exact2.m() {
            return Err(Error::Parameter(format!(
                "QUERY2 index has {} objects, EXACT2 companion has {}",
                query2.m(),
                exact2.m()
            )));
        }
        Ok(Self { query2, exact2 })
    }

    pub fn candidates(&self, q: &QuerySpec, io: &mut IoStats) -> Result<CandidateSet> {
        self.query2.candidates(q, io)
    }
}

impl<S: PageStore, T: PageStore> TopKQuery for Appx2Plus<S, T> {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer> {
        let c = self.query2.candidates(q, io)?;
        if c.is_degenerate() {
            return Ok(zeros_by_id(self.query2.m(), q.k));
        }
        let mut exact = Vec::with_capacity(c.len());
        for &id in c.scores.keys() {
            exact.push((id, self.exact2.object_sum(id.index(), c.lo, c.hi, io)?));
        }
        rank_scores(exact, q)
    }
}
