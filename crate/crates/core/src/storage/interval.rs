//! Static external interval tree for stabbing queries.
//!
//! Each inner node splits its range into at most 64 slabs by boundaries
//! drawn from endpoint quantiles. An interval that stays inside one slab is
//! pushed to that slab's child; one that crosses a boundary is kept at the
//! node in three lists:
//!
//! - the left list of its first slab, sorted by `lo` ascending,
//! - the right list of its last slab, sorted by `hi` descending,
//! - the middle list of its first slab, sorted by last slab descending, when
//!   it fully covers at least one slab in between.
//!
//! A stab at `t` walks one root-to-leaf path and, at each node, reads only
//! list prefixes that are reported, so the cost is `O(log_B N + K/B)` pages
//! for `K` hits plus a page per non-empty list touched. Small nodes keep
//! their intervals inline in the node page.
//!
//! Intervals are half-open `[lo, hi)` unless flagged closed. Appended
//! intervals go to an in-memory tail that is scanned on every stab and
//! folded into a rebuilt tree once it grows past a quarter of the size.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::codec::{get_f64, get_u16, get_u32, put_f64, put_u16, put_u32, ByteReader, ByteWriter};
use super::{IoStats, PageId, PageStore};
use crate::error::{Error, Result};

/// Writes a slot's per-list summary into a node page.
type SlotMeta<'a> = dyn Fn(&[usize], &mut [u8], usize) + 'a;

const LEAF: u8 = 1;
const INNER: u8 = 2;
const HDR: usize = 16;
const SLAB_BYTES: usize = 8 + 4 + 16 + 12 + 16;
const MAX_FANOUT: usize = 64;
const CLOSED: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub lo: f64,
    pub hi: f64,
    /// Whether `hi` itself belongs to the interval.
    pub closed: bool,
    pub value: Vec<u8>,
}

impl IntervalRecord {
    pub fn new(lo: f64, hi: f64, closed: bool, value: Vec<u8>) -> Self {
        Self { lo, hi, closed, value }
    }

    pub fn contains(&self, t: f64) -> bool {
        contains(self.lo, self.hi, self.closed, t)
    }
}

#[inline]
fn contains(lo: f64, hi: f64, closed: bool, t: f64) -> bool {
    lo <= t && (t < hi || closed && t == hi)
}

/// Where a stored record lives, for in-place flag updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordLoc {
    Page { page: PageId, off: u16 },
    Tail(u32),
}

/// A record reported by [`IntervalTree::stab`].
#[derive(Debug, Clone, Copy)]
pub struct Hit<'a> {
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
    pub value: &'a [u8],
    pub loc: RecordLoc,
}

/// Old-to-new record locations produced by a rebuild.
#[derive(Debug, Clone, Default)]
pub struct Remap {
    pairs: Vec<(RecordLoc, RecordLoc)>,
}

impl Remap {
    pub fn get(&self, old: RecordLoc) -> Option<RecordLoc> {
        self.pairs.binary_search_by(|p| p.0.cmp(&old)).ok().map(|i| self.pairs[i].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTree {
    width: usize,
    page_size: usize,
    fanout: usize,
    root: PageId,
    node_first: PageId,
    node_count: u32,
    heap_first: PageId,
    heap_records: u32,
    stored: u64,
    tail: Vec<IntervalRecord>,
}

struct Geometry {
    width: usize,
    rec: usize,
    leaf_cap: usize,
    heap_cap: usize,
    fanout: usize,
}

impl Geometry {
    fn new(page_size: usize, width: usize) -> Result<Self> {
        let rec = 17 + width;
        let leaf_cap = (page_size - HDR) / rec;
        let fanout = ((page_size - HDR + 8) / SLAB_BYTES).min(MAX_FANOUT);
        if leaf_cap < 2 || fanout < 2 {
            return Err(Error::Parameter(format!("value width {width} too large for {page_size}-byte pages")));
        }
        Ok(Self { width, rec, leaf_cap, heap_cap: page_size / rec, fanout })
    }
}

/// Byte offsets of the per-slab arrays in an inner node with `f` slabs.
struct InnerLayout {
    bounds: usize,
    children: usize,
    left: usize,
    mid: usize,
    right: usize,
}

impl InnerLayout {
    fn new(f: usize) -> Self {
        let bounds = HDR;
        let children = bounds + 8 * (f - 1);
        let left = children + 4 * f;
        let mid = left + 16 * f;
        let right = mid + 12 * f;
        Self { bounds, children, left, mid, right }
    }
}

enum Plan {
    Leaf(Vec<usize>),
    Inner {
        bounds: Vec<f64>,
        children: Vec<Option<usize>>,
        left: Vec<Vec<usize>>,
        mid: Vec<Vec<usize>>,
        right: Vec<Vec<usize>>,
    },
}

/// Slab of `x` when `x` is a left end: number of bounds `<= x`.
fn slab_of(bounds: &[f64], x: f64) -> usize {
    bounds.partition_point(|&b| b <= x)
}

/// Last slab an interval reaches into.
fn last_slab(bounds: &[f64], hi: f64, closed: bool) -> usize {
    if closed {
        bounds.partition_point(|&b| b <= hi)
    } else {
        bounds.partition_point(|&b| b < hi)
    }
}

fn write_record(buf: &mut [u8], off: usize, r: &IntervalRecord) {
    put_f64(buf, off, r.lo);
    put_f64(buf, off + 8, r.hi);
    buf[off + 16] = if r.closed { CLOSED } else { 0 };
    buf[off + 17..off + 17 + r.value.len()].copy_from_slice(&r.value);
}

fn read_record(buf: &[u8], off: usize, width: usize) -> (f64, f64, bool, &[u8]) {
    (get_f64(buf, off), get_f64(buf, off + 8), buf[off + 16] & CLOSED != 0, &buf[off + 17..off + 17 + width])
}

/// Reads heap records sequentially, re-reading a page only when the
/// record moves off the current one.
struct HeapReader {
    buf: Vec<u8>,
    page: PageId,
}

impl HeapReader {
    fn new(page_size: usize) -> Self {
        Self { buf: vec![0u8; page_size], page: PageId::NONE }
    }

    fn at<S: PageStore>(&mut self, store: &S, tree: &IntervalTree, g: &Geometry, idx: u32, io: &mut IoStats) -> Result<(usize, PageId)> {
        let page = PageId(tree.heap_first.0 + idx / g.heap_cap as u32);
        if page != self.page {
            store.read(page, &mut self.buf, io)?;
            self.page = page;
        }
        Ok(((idx as usize % g.heap_cap) * g.rec, page))
    }
}

impl IntervalTree {
    pub fn empty(page_size: usize, width: usize) -> Result<Self> {
        let g = Geometry::new(page_size, width)?;
        Ok(Self {
            width,
            page_size,
            fanout: g.fanout,
            root: PageId::NONE,
            node_first: PageId::NONE,
            node_count: 0,
            heap_first: PageId::NONE,
            heap_records: 0,
            stored: 0,
            tail: Vec::new(),
        })
    }

    /// Builds the tree over `records`; returns it with the location of each
    /// input record, in input order.
    pub fn build<S: PageStore>(
        store: &mut S,
        width: usize,
        records: &[IntervalRecord],
        io: &mut IoStats,
    ) -> Result<(Self, Vec<RecordLoc>)> {
        let ps = store.page_size();
        let g = Geometry::new(ps, width)?;
        for r in records {
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo >= r.hi {
                return Err(Error::InvalidInterval { lo: r.lo, hi: r.hi });
            }
            if r.value.len() != width {
                return Err(Error::Parameter(format!("value of {} bytes, expected {width}", r.value.len())));
            }
        }
        let mut tree = Self::empty(ps, width)?;
        if records.is_empty() {
            return Ok((tree, Vec::new()));
        }
        let plan = Self::plan(&g, records);

        let node_first = store.allocate_run(plan.len() as u32)?;
        let heap_total: usize = plan
            .iter()
            .map(|p| match p {
                Plan::Leaf(_) => 0,
                Plan::Inner { left, mid, right, .. } => {
                    left.iter().chain(mid).chain(right).map(Vec::len).sum::<usize>()
                }
            })
            .sum();
        let heap_pages = heap_total.div_ceil(g.heap_cap) as u32;
        let heap_first = if heap_pages > 0 { store.allocate_run(heap_pages)? } else { PageId::NONE };
        tree.root = node_first;
        tree.node_first = node_first;
        tree.node_count = plan.len() as u32;
        tree.heap_first = heap_first;
        tree.heap_records = heap_total as u32;
        tree.stored = records.len() as u64;

        let mut locs = vec![RecordLoc::Tail(u32::MAX); records.len()];
        let mut heap_buf = vec![0u8; ps];
        let mut heap_next = 0u32;
        let mut page = vec![0u8; ps];
        for (pi, node) in plan.iter().enumerate() {
            let id = PageId(node_first.0 + pi as u32);
            page.fill(0);
            match node {
                Plan::Leaf(items) => {
                    page[0] = LEAF;
                    put_u16(&mut page, 2, items.len() as u16);
                    for (s, &i) in items.iter().enumerate() {
                        let off = HDR + s * g.rec;
                        write_record(&mut page, off, &records[i]);
                        locs[i] = RecordLoc::Page { page: id, off: off as u16 };
                    }
                }
                Plan::Inner { bounds, children, left, mid, right } => {
                    let f = children.len();
                    let lay = InnerLayout::new(f);
                    page[0] = INNER;
                    put_u16(&mut page, 2, bounds.len() as u16);
                    for (i, b) in bounds.iter().enumerate() {
                        put_f64(&mut page, lay.bounds + 8 * i, *b);
                    }
                    for (s, c) in children.iter().enumerate() {
                        let cid = c.map_or(PageId::NONE, |c| PageId(node_first.0 + c as u32));
                        put_u32(&mut page, lay.children + 4 * s, cid.0);
                    }
                    let mut emit = |items: &[usize], page: &mut [u8], desc: usize, meta: &SlotMeta| -> Result<()> {
                        put_u32(page, desc, heap_next);
                        put_u32(page, desc + 4, items.len() as u32);
                        meta(items, page, desc + 8);
                        for &i in items {
                            let slot = heap_next as usize % g.heap_cap;
                            let hp = PageId(heap_first.0 + heap_next / g.heap_cap as u32);
                            write_record(&mut heap_buf, slot * g.rec, &records[i]);
                            locs[i] = RecordLoc::Page { page: hp, off: (slot * g.rec) as u16 };
                            heap_next += 1;
                            if (heap_next as usize).is_multiple_of(g.heap_cap) {
                                store.write(hp, &heap_buf, io)?;
                                heap_buf.fill(0);
                            }
                        }
                        Ok(())
                    };
                    for (s, items) in left.iter().enumerate().take(f) {
                        emit(items, &mut page, lay.left + 16 * s, &|items, p, off| {
                            put_f64(p, off, items.first().map_or(f64::INFINITY, |&i| records[i].lo));
                        })?;
                    }
                    for (s, items) in mid.iter().enumerate().take(f) {
                        emit(items, &mut page, lay.mid + 12 * s, &|items, p, off| {
                            let b = items.first().map_or(0, |&i| last_slab(bounds, records[i].hi, records[i].closed));
                            put_u32(p, off, b as u32);
                        })?;
                    }
                    for (s, items) in right.iter().enumerate().take(f) {
                        emit(items, &mut page, lay.right + 16 * s, &|items, p, off| {
                            put_f64(p, off, items.first().map_or(f64::NEG_INFINITY, |&i| records[i].hi));
                        })?;
                    }
                }
            }
            store.write(id, &page, io)?;
        }
        if !(heap_next as usize).is_multiple_of(g.heap_cap) {
            store.write(PageId(heap_first.0 + heap_next / g.heap_cap as u32), &heap_buf, io)?;
        }
        Ok((tree, locs))
    }

    fn plan(g: &Geometry, records: &[IntervalRecord]) -> Vec<Plan> {
        let mut plan: Vec<Plan> = Vec::new();
        let mut work: Vec<(usize, Vec<usize>)> = Vec::new();
        plan.push(Plan::Leaf(Vec::new()));
        work.push((0, (0..records.len()).collect()));
        let mut ends: Vec<f64> = Vec::new();
        while let Some((slot, items)) = work.pop() {
            if items.len() <= g.leaf_cap {
                plan[slot] = Plan::Leaf(items);
                continue;
            }
            ends.clear();
            for &i in &items {
                ends.push(records[i].lo);
                ends.push(records[i].hi);
            }
            ends.sort_unstable_by(f64::total_cmp);
            let (lo, hi) = (ends[0], ends[ends.len() - 1]);
            let f = g.fanout;
            let mut bounds: Vec<f64> = (1..f).map(|q| ends[q * ends.len() / f]).collect();
            bounds.dedup();
            if !bounds.iter().any(|&b| lo < b && b < hi) {
                // a boundary strictly inside the span guarantees every child shrinks
                bounds.push(lo + (hi - lo) / 2.0);
                bounds.sort_unstable_by(f64::total_cmp);
                bounds.dedup();
            }
            let nslabs = bounds.len() + 1;
            let mut child_items: Vec<Vec<usize>> = vec![Vec::new(); nslabs];
            let mut left: Vec<Vec<usize>> = vec![Vec::new(); nslabs];
            let mut mid: Vec<Vec<usize>> = vec![Vec::new(); nslabs];
            let mut right: Vec<Vec<usize>> = vec![Vec::new(); nslabs];
            for &i in &items {
                let r = &records[i];
                let a = slab_of(&bounds, r.lo);
                let b = last_slab(&bounds, r.hi, r.closed);
                if a == b {
                    child_items[a].push(i);
                } else {
                    left[a].push(i);
                    right[b].push(i);
                    if b > a + 1 {
                        mid[a].push(i);
                    }
                }
            }
            for l in &mut left {
                l.sort_by(|&x, &y| records[x].lo.total_cmp(&records[y].lo));
            }
            for r in &mut right {
                r.sort_by(|&x, &y| records[y].hi.total_cmp(&records[x].hi));
            }
            for m in &mut mid {
                m.sort_by_cached_key(|&x| core::cmp::Reverse(last_slab(&bounds, records[x].hi, records[x].closed)));
            }
            let mut children = vec![None; nslabs];
            for (s, items) in child_items.into_iter().enumerate() {
                if !items.is_empty() {
                    children[s] = Some(plan.len());
                    plan.push(Plan::Leaf(Vec::new()));
                    work.push((plan.len() - 1, items));
                }
            }
            plan[slot] = Plan::Inner { bounds, children, left, mid, right };
        }
        plan
    }

    /// Reports every record containing `t`.
    pub fn stab<S, F>(&self, store: &S, t: f64, io: &mut IoStats, mut f: F) -> Result<()>
    where
        S: PageStore,
        F: FnMut(Hit<'_>),
    {
        let g = Geometry::new(self.page_size, self.width)?;
        let mut page = vec![0u8; self.page_size];
        let mut heap = HeapReader::new(self.page_size);
        let mut node = self.root;
        while !node.is_none() {
            store.read(node, &mut page, io)?;
            match page[0] {
                LEAF => {
                    for s in 0..get_u16(&page, 2) as usize {
                        let off = HDR + s * g.rec;
                        let (lo, hi, closed, value) = read_record(&page, off, g.width);
                        if contains(lo, hi, closed, t) {
                            f(Hit { lo, hi, closed, value, loc: RecordLoc::Page { page: node, off: off as u16 } });
                        }
                    }
                    break;
                }
                INNER => {}
                k => return Err(Error::Corrupt(format!("page {} has interval node kind {k}", node.0))),
            }
            let nb = get_u16(&page, 2) as usize;
            let lay = InnerLayout::new(nb + 1);
            let bounds: Vec<f64> = (0..nb).map(|i| get_f64(&page, lay.bounds + 8 * i)).collect();
            let j = slab_of(&bounds, t);

            let (start, len) = (get_u32(&page, lay.left + 16 * j), get_u32(&page, lay.left + 16 * j + 4));
            if len > 0 && get_f64(&page, lay.left + 16 * j + 8) <= t {
                for idx in start..start + len {
                    let (off, hp) = heap.at(store, self, &g, idx, io)?;
                    let (lo, hi, closed, value) = read_record(&heap.buf, off, g.width);
                    if lo > t {
                        break;
                    }
                    f(Hit { lo, hi, closed, value, loc: RecordLoc::Page { page: hp, off: off as u16 } });
                }
            }
            for a in 0..j {
                let d = lay.mid + 12 * a;
                let (start, len) = (get_u32(&page, d), get_u32(&page, d + 4));
                if len == 0 || get_u32(&page, d + 8) as usize <= j {
                    continue;
                }
                for idx in start..start + len {
                    let (off, hp) = heap.at(store, self, &g, idx, io)?;
                    let (lo, hi, closed, value) = read_record(&heap.buf, off, g.width);
                    if last_slab(&bounds, hi, closed) <= j {
                        break;
                    }
                    f(Hit { lo, hi, closed, value, loc: RecordLoc::Page { page: hp, off: off as u16 } });
                }
            }
            let d = lay.right + 16 * j;
            let (start, len) = (get_u32(&page, d), get_u32(&page, d + 4));
            if len > 0 && get_f64(&page, d + 8) >= t {
                for idx in start..start + len {
                    let (off, hp) = heap.at(store, self, &g, idx, io)?;
                    let (lo, hi, closed, value) = read_record(&heap.buf, off, g.width);
                    if hi < t {
                        break;
                    }
                    if contains(lo, hi, closed, t) {
                        f(Hit { lo, hi, closed, value, loc: RecordLoc::Page { page: hp, off: off as u16 } });
                    }
                }
            }
            node = PageId(get_u32(&page, lay.children + 4 * j));
        }
        for (i, r) in self.tail.iter().enumerate() {
            if r.contains(t) {
                f(Hit { lo: r.lo, hi: r.hi, closed: r.closed, value: &r.value, loc: RecordLoc::Tail(i as u32) });
            }
        }
        Ok(())
    }

    /// Adds a record to the in-memory tail.
    pub fn push_tail(&mut self, r: IntervalRecord) -> Result<RecordLoc> {
        if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo >= r.hi {
            return Err(Error::InvalidInterval { lo: r.lo, hi: r.hi });
        }
        if r.value.len() != self.width {
            return Err(Error::Parameter(format!("value of {} bytes, expected {}", r.value.len(), self.width)));
        }
        self.tail.push(r);
        Ok(RecordLoc::Tail(self.tail.len() as u32 - 1))
    }

    /// Sets whether the record at `loc` includes its right end.
    pub fn set_closed<S: PageStore>(&mut self, store: &mut S, loc: RecordLoc, closed: bool, io: &mut IoStats) -> Result<()> {
        match loc {
            RecordLoc::Tail(i) => {
                let r = self.tail.get_mut(i as usize).ok_or_else(|| Error::Corrupt(format!("no tail record {i}")))?;
                r.closed = closed;
            }
            RecordLoc::Page { page, off } => {
                let mut buf = vec![0u8; self.page_size];
                store.read(page, &mut buf, io)?;
                let flag = &mut buf[off as usize + 16];
                *flag = if closed { *flag | CLOSED } else { *flag & !CLOSED };
                store.write(page, &buf, io)?;
            }
        }
        Ok(())
    }

    pub fn tail_len(&self) -> usize {
        self.tail.len()
    }

    /// True once the tail is large enough that a rebuild pays off.
    pub fn needs_rebuild(&self) -> bool {
        let g = Geometry::new(self.page_size, self.width).expect("validated at construction");
        self.tail.len() >= (4 * g.leaf_cap).max(self.stored as usize / 4)
    }

    /// Every record (stored and tail) with its location.
    pub fn records<S: PageStore>(&self, store: &S, io: &mut IoStats) -> Result<Vec<(RecordLoc, IntervalRecord)>> {
        let g = Geometry::new(self.page_size, self.width)?;
        let mut out = Vec::with_capacity(self.len());
        let mut page = vec![0u8; self.page_size];
        let rec = |buf: &[u8], off: usize| {
            let (lo, hi, closed, value) = read_record(buf, off, g.width);
            IntervalRecord::new(lo, hi, closed, value.to_vec())
        };
        for n in 0..self.node_count {
            let id = PageId(self.node_first.0 + n);
            store.read(id, &mut page, io)?;
            if page[0] == LEAF {
                for s in 0..get_u16(&page, 2) as usize {
                    let off = HDR + s * g.rec;
                    out.push((RecordLoc::Page { page: id, off: off as u16 }, rec(&page, off)));
                }
            }
        }
        for idx in 0..self.heap_records {
            let hp = PageId(self.heap_first.0 + idx / g.heap_cap as u32);
            if (idx as usize).is_multiple_of(g.heap_cap) {
                store.read(hp, &mut page, io)?;
            }
            let off = (idx as usize % g.heap_cap) * g.rec;
            out.push((RecordLoc::Page { page: hp, off: off as u16 }, rec(&page, off)));
        }
        for (i, r) in self.tail.iter().enumerate() {
            out.push((RecordLoc::Tail(i as u32), r.clone()));
        }
        Ok(out)
    }

    /// Folds the tail into a freshly built tree on new pages.
    pub fn rebuild<S: PageStore>(&mut self, store: &mut S, io: &mut IoStats) -> Result<Remap> {
        let all = self.records(store, io)?;
        let (olds, recs): (Vec<RecordLoc>, Vec<IntervalRecord>) = all.into_iter().unzip();
        let (tree, news) = Self::build(store, self.width, &recs, io)?;
        *self = tree;
        let mut pairs: Vec<(RecordLoc, RecordLoc)> = olds.into_iter().zip(news).collect();
        pairs.sort_unstable_by_key(|p| p.0);
        Ok(Remap { pairs })
    }

    pub fn len(&self) -> usize {
        self.stored as usize + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn page_count(&self) -> u64 {
        let g = Geometry::new(self.page_size, self.width).expect("validated at construction");
        self.node_count as u64 + (self.heap_records as usize).div_ceil(g.heap_cap) as u64
    }

    pub fn root(&self) -> PageId {
        self.root
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.width as u32)
            .u32(self.page_size as u32)
            .u32(self.root.0)
            .u32(self.node_first.0)
            .u32(self.node_count)
            .u32(self.heap_first.0)
            .u32(self.heap_records)
            .u64(self.stored)
            .u64(self.tail.len() as u64);
        for r in &self.tail {
            w.f64(r.lo).f64(r.hi).u8(r.closed as u8).bytes(&r.value);
        }
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let width = r.u32()? as usize;
        let page_size = r.u32()? as usize;
        let mut t = Self::empty(page_size, width)?;
        t.root = PageId(r.u32()?);
        t.node_first = PageId(r.u32()?);
        t.node_count = r.u32()?;
        t.heap_first = PageId(r.u32()?);
        t.heap_records = r.u32()?;
        t.stored = r.u64()?;
        let n = r.len()?;
        for _ in 0..n {
            let (lo, hi, closed) = (r.f64()?, r.f64()?, r.u8()? != 0);
            t.tail.push(IntervalRecord::new(lo, hi, closed, r.bytes()?.to_vec()));
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::MemStore;
    use proptest::prelude::*;

    fn rec(lo: f64, hi: f64, closed: bool, id: u32) -> IntervalRecord {
        IntervalRecord::new(lo, hi, closed, id.to_le_bytes().to_vec())
    }

    fn stab_ids(s: &MemStore, t: &IntervalTree, x: f64) -> Vec<u32> {
        let mut out = vec![];
        t.stab(s, x, &mut IoStats::default(), |h| out.push(u32::from_le_bytes(h.value.try_into().unwrap()))).unwrap();
        out.sort_unstable();
        out
    }

    fn oracle(recs: &[IntervalRecord], x: f64) -> Vec<u32> {
        let mut out: Vec<u32> = recs
            .iter()
            .filter(|r| r.contains(x))
            .map(|r| u32::from_le_bytes(r.value[..].try_into().unwrap()))
            .collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn half_open_partition() {
        let mut s = MemStore::default();
        let recs = [rec(0.0, 2.0, false, 1), rec(2.0, 5.0, false, 2), rec(5.0, 10.0, true, 3)];
        let (t, _) = IntervalTree::build(&mut s, 4, &recs, &mut IoStats::default()).unwrap();
        assert_eq!(stab_ids(&s, &t, 2.0), vec![2]);
        assert_eq!(stab_ids(&s, &t, 0.0), vec![1]);
        assert_eq!(stab_ids(&s, &t, 10.0), vec![3]);
        assert!(stab_ids(&s, &t, 10.5).is_empty());
    }

    #[test]
    fn empty_and_invalid() {
        let mut s = MemStore::default();
        let (t, locs) = IntervalTree::build(&mut s, 4, &[], &mut IoStats::default()).unwrap();
        assert!(t.is_empty() && locs.is_empty());
        assert!(stab_ids(&s, &t, 1.0).is_empty());
        let bad = [rec(3.0, 3.0, false, 1)];
        assert_eq!(
            IntervalTree::build(&mut s, 4, &bad, &mut IoStats::default()).unwrap_err(),
            Error::InvalidInterval { lo: 3.0, hi: 3.0 }
        );
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn large_random_matches_linear_scan() {
        let mut seed = 7;
        let recs: Vec<IntervalRecord> = (0..100_000u32)
            .map(|i| {
                let lo = (lcg(&mut seed) * 1000.0).floor();
                let w = if i % 10 == 0 { lcg(&mut seed) * 800.0 } else { lcg(&mut seed) * 5.0 };
                rec(lo, lo + w.max(0.5), i % 7 == 0, i)
            })
            .collect();
        let mut s = MemStore::default();
        let (t, _) = IntervalTree::build(&mut s, 4, &recs, &mut IoStats::default()).unwrap();
        for p in 0..1000 {
            let x = if p % 3 == 0 { (lcg(&mut seed) * 1010.0).floor() } else { lcg(&mut seed) * 1010.0 };
            assert_eq!(stab_ids(&s, &t, x), oracle(&recs, x), "probe {x}");
        }
    }

    #[test]
    fn partitions_stab_once_per_object() {
        // 300 objects, each a partition of [0, 100] into random pieces
        let mut seed = 11;
        let mut recs = vec![];
        for o in 0..300u32 {
            let mut cuts: Vec<f64> = (0..40).map(|_| lcg(&mut seed) * 100.0).collect();
            cuts.push(0.0);
            cuts.push(100.0);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                recs.push(rec(w[0], w[1], w[1] == 100.0, o));
            }
        }
        let mut s = MemStore::default();
        let (t, _) = IntervalTree::build(&mut s, 4, &recs, &mut IoStats::default()).unwrap();
        for i in 0..=200 {
            let x = i as f64 * 0.5;
            let ids = stab_ids(&s, &t, x);
            assert_eq!(ids, (0..300).collect::<Vec<_>>(), "t = {x}");
        }
    }

    #[test]
    fn stab_is_deterministic() {
        let recs: Vec<IntervalRecord> = (0..5000u32).map(|i| rec(i as f64, i as f64 + 37.0, false, i)).collect();
        let mut s = MemStore::default();
        let (t, _) = IntervalTree::build(&mut s, 4, &recs, &mut IoStats::default()).unwrap();
        let run = || {
            let mut io = IoStats::default();
            for x in [3.0, 100.5, 2500.0, 4999.0] {
                t.stab(&s, x, &mut io, |_| {}).unwrap();
            }
            io
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn tail_flags_and_rebuild() {
        let mut s = MemStore::new(512).unwrap();
        let mut io = IoStats::default();
        let recs: Vec<IntervalRecord> = (0..200u32).map(|i| rec(i as f64, i as f64 + 1.0, i == 199, i)).collect();
        let (mut t, locs) = IntervalTree::build(&mut s, 4, &recs, &mut io).unwrap();
        assert_eq!(stab_ids(&s, &t, 200.0), vec![199]);
        t.set_closed(&mut s, locs[199], false, &mut io).unwrap();
        assert!(stab_ids(&s, &t, 200.0).is_empty());
        let loc = t.push_tail(rec(200.0, 201.0, true, 200)).unwrap();
        assert_eq!(stab_ids(&s, &t, 200.0), vec![200]);
        assert_eq!(stab_ids(&s, &t, 201.0), vec![200]);
        t.set_closed(&mut s, loc, false, &mut io).unwrap();
        assert!(stab_ids(&s, &t, 201.0).is_empty());
        let before: Vec<Vec<u32>> = (0..=402).map(|i| stab_ids(&s, &t, i as f64 * 0.5)).collect();
        let remap = t.rebuild(&mut s, &mut io).unwrap();
        assert_eq!(t.tail_len(), 0);
        assert_eq!(t.len(), 201);
        let after: Vec<Vec<u32>> = (0..=402).map(|i| stab_ids(&s, &t, i as f64 * 0.5)).collect();
        assert_eq!(before, after);
        let moved = remap.get(loc).unwrap();
        t.set_closed(&mut s, moved, true, &mut io).unwrap();
        assert_eq!(stab_ids(&s, &t, 201.0), vec![200]);
    }

    #[test]
    fn handle_round_trip() {
        let mut s = MemStore::default();
        let recs: Vec<IntervalRecord> = (0..1000u32).map(|i| rec(i as f64, i as f64 + 3.0, false, i)).collect();
        let (mut t, _) = IntervalTree::build(&mut s, 4, &recs, &mut IoStats::default()).unwrap();
        t.push_tail(rec(5.0, 6.0, true, 9999)).unwrap();
        let mut w = ByteWriter::new();
        t.encode(&mut w);
        let bytes = w.finish();
        assert_eq!(IntervalTree::decode(&mut ByteReader::new(&bytes)).unwrap(), t);
    }

    fn arb_records() -> impl Strategy<Value = Vec<IntervalRecord>> {
        prop::collection::vec((0u32..200, 1u32..60, any::<bool>()), 0..1500).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (lo, w, c))| rec(lo as f64 * 0.5, (lo + w) as f64 * 0.5, c, i as u32))
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn stab_equals_linear_filter(recs in arb_records(), probes in prop::collection::vec(-2i32..260, 1..40)) {
            let mut s = MemStore::new(512).unwrap();
            let (t, _) = IntervalTree::build(&mut s, 4, &recs, &mut IoStats::default()).unwrap();
            for p in probes {
                let x = p as f64 * 0.5;
                prop_assert_eq!(stab_ids(&s, &t, x), oracle(&recs, x));
            }
        }
    }
}
