use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::lists::{read_list, ListLoc, ListWriter, LOC};
use super::{check_k_max, check_query, gap_masses, top_list, zeros_by_id, Common};
use crate::breakpoints::BreakpointSet;
use crate::error::{Error, Result};
use crate::exact::{open_index, seal_index};
use crate::model::{apply_aggregate, Dataset, QuerySpec};
use crate::rank::{RankedAnswer, Scored, TopKQuery};
use crate::storage::codec::get_u32;
use crate::storage::{BTree, ByteReader, ByteWriter, IndexKind, IoStats, PageId, PageStore};

/// Top-`k_max` lists for every breakpoint pair `j < j'`.
///
/// A top-level B+-tree keyed by `b_j` points to a lower-level tree keyed by
/// `b_{j'}`, whose entries locate the list. Searching the top tree for `t1`
/// and the lower tree for `t2` snaps both ends on the way.
#[derive(Debug, Clone)]
pub struct Query1Index<S> {
    store: S,
    common: Common,
    top: BTree,
    lists: u64,
}

impl<S: PageStore> Query1Index<S> {
    /// Builds the index, rejecting breakpoint sets too large for the data:
    /// with `r` breakpoints, requires `r² < N` and `r·k_max < N`.
    pub fn build(ds: &Dataset, bps: BreakpointSet, k_max: usize, store: S, io: &mut IoStats) -> Result<Self> {
        let r = bps.len() as u64;
        let n = ds.n() as u64;
        if r * r >= n || r * k_max as u64 >= n {
            return Err(Error::Capacity(format!(
                "QUERY1 with r = {r} breakpoints and k_max = {k_max} needs r² < N and r·k_max < N (N = {n})"
            )));
        }
        Self::build_oversized(ds, bps, k_max, store, io)
    }

    /// Builds without the space check; size grows as `r²·k_max`.
    pub fn build_oversized(ds: &Dataset, bps: BreakpointSet, k_max: usize, mut store: S, io: &mut IoStats) -> Result<Self> {
        check_k_max(k_max)?;
        if bps.t_end() != ds.t_end() {
            return Err(Error::Parameter("breakpoints do not end at the dataset's T".into()));
        }
        let ps = store.page_size();
        let m = ds.m();
        let pts = bps.points();
        let gaps = pts.len() - 1;
        let gm = gap_masses(ds, pts);

        let mut writer = ListWriter::new(ps);
        let mut locs: Vec<Vec<ListLoc>> = Vec::with_capacity(gaps);
        let mut run = vec![0.0; m];
        for j in 0..gaps {
            run.fill(0.0);
            let mut row = Vec::with_capacity(gaps - j);
            for g in j..gaps {
                for (acc, x) in run.iter_mut().zip(&gm[g * m..(g + 1) * m]) {
                    *acc += x;
                }
                row.push(writer.push(&mut store, &top_list(&run, k_max), io)?);
            }
            locs.push(row);
        }
        writer.flush(&mut store, io)?;

        let mut roots = Vec::with_capacity(gaps);
        for (j, row) in locs.iter().enumerate() {
            let entries = row.iter().enumerate().map(|(d, loc)| (pts[j + 1 + d], loc.to_bytes()));
            roots.push(BTree::bulk_load(&mut store, LOC, entries, io)?.root());
        }
        let top = BTree::bulk_load(&mut store, 4, roots.iter().enumerate().map(|(j, r)| (pts[j], r.0.to_le_bytes())), io)?;
        let lists = (gaps * (gaps + 1) / 2) as u64;
        let mut idx = Self { store, common: Common { m, k_max, bps }, top, lists };
        idx.seal(io)?;
        Ok(idx)
    }

    pub fn open(store: S, io: &mut IoStats) -> Result<Self> {
        let (h, meta) = open_index(&store, IndexKind::Query1, io)?;
        let mut r = ByteReader::new(&meta);
        let common = Common::decode(&mut r)?;
        let top = BTree::decode(&mut r)?;
        Ok(Self { store, common, top, lists: h.entry_count })
    }

    fn seal(&mut self, io: &mut IoStats) -> Result<()> {
        let mut w = ByteWriter::new();
        self.common.encode(&mut w);
        self.top.encode(&mut w);
        seal_index(&mut self.store, IndexKind::Query1, LOC, self.top.root(), self.lists, &w.finish(), None, io)
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

    /// Number of stored lists, `C(r, 2)` for `r` breakpoints.
    pub fn list_count(&self) -> u64 {
        self.lists
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_store(self) -> S {
        self.store
    }

    /// First `k` entries of the list for `[b_j, b_{j'}]` by breakpoint index.
    pub fn list(&self, j: usize, j2: usize, k: usize, io: &mut IoStats) -> Result<Vec<Scored>> {
        let pts = self.common.bps.points();
        if !(j < j2 && j2 < pts.len()) {
            return Err(Error::Parameter(format!("no list for breakpoint pair ({j}, {j2})")));
        }
        Ok(self.lookup(pts[j], pts[j2], k, io)?.expect("pair is not degenerate").2)
    }

    /// Snaps `[t1, t2]` and reads the top `k` of its list; `None` when the
    /// snapped interval is empty.
    pub fn lookup(&self, t1: f64, t2: f64, k: usize, io: &mut IoStats) -> Result<Option<(f64, f64, Vec<Scored>)>> {
        let cur = self.top.seek_geq(&self.store, t1, io)?;
        let Some((b1, v)) = cur.entry() else { return Ok(None) };
        if t2 <= b1 {
            return Ok(None);
        }
        let lower = BTree::reader(self.store.page_size(), LOC, PageId(get_u32(v, 0)))?;
        let cur = lower.seek_geq(&self.store, t2, io)?;
        let (b2, loc) = cur.entry().ok_or_else(|| Error::Corrupt(format!("no breakpoint at or after {t2}")))?;
        Ok(Some((b1, b2, read_list(&self.store, ListLoc::from_bytes(loc), k, io)?)))
    }
}

impl<S: PageStore> TopKQuery for Query1Index<S> {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer> {
        check_query(q, self.k_max(), self.common.bps.t_end())?;
        match self.lookup(q.t1(), q.t2(), q.k, io)? {
            None => Ok(zeros_by_id(self.m(), q.k)),
            Some((_, _, list)) => {
                let entries = list
                    .into_iter()
                    .map(|e| Ok(Scored::new(e.object, apply_aggregate(e.score, q)?)))
                    .collect::<Result<_>>()?;
                Ok(RankedAnswer { entries })
            }
        }
    }
}
