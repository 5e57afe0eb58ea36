//! Disk-resident B+-tree over `f64` keys with fixed-width opaque values.
//!
//! Leaves are doubly linked. An inner node with `c` children stores `c - 1`
//! separators, separator `i` being the largest key below child `i`, so a
//! descent always lands in the leaf holding the first key `>= x` and a point
//! search costs exactly [`BTree::depth`] page reads.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::codec::{get_f64, get_u16, get_u32, put_f64, put_u16, put_u32, ByteReader, ByteWriter};
use super::{IoStats, PageId, PageStore};
use crate::error::{Error, Result};

const LEAF: u8 = 1;
const INNER: u8 = 2;
const HDR: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct BTree {
    width: usize,
    page_size: usize,
    root: PageId,
    depth: u32,
    len: u64,
    leaves: u64,
    pages: u64,
    first_leaf: PageId,
    max_key: f64,
    /// Page ids along the rightmost root-to-leaf path.
    right_path: Vec<PageId>,
}

fn leaf_cap(page_size: usize, width: usize) -> usize {
    (page_size - HDR) / (8 + width)
}

fn inner_cap(page_size: usize) -> usize {
    (page_size - HDR + 8) / 12
}

struct Layout {
    width: usize,
    leaf_cap: usize,
    inner_cap: usize,
}

impl Layout {
    fn new(page_size: usize, width: usize) -> Result<Self> {
        let leaf_cap = leaf_cap(page_size, width);
        if leaf_cap < 2 {
            return Err(Error::Parameter(format!("value width {width} too large for {page_size}-byte pages")));
        }
        Ok(Self { width, leaf_cap, inner_cap: inner_cap(page_size) })
    }

    fn entry_off(&self, i: usize) -> usize {
        HDR + i * (8 + self.width)
    }

    fn child_off(&self, i: usize) -> usize {
        HDR + 4 * i
    }

    fn sep_off(&self, i: usize) -> usize {
        HDR + 4 * self.inner_cap + 8 * i
    }
}

fn count(buf: &[u8]) -> usize {
    get_u16(buf, 2) as usize
}

fn set_count(buf: &mut [u8], n: usize) {
    put_u16(buf, 2, n as u16);
}

fn init_leaf(buf: &mut [u8], prev: PageId, next: PageId) {
    buf.fill(0);
    buf[0] = LEAF;
    put_u32(buf, 4, prev.0);
    put_u32(buf, 8, next.0);
}

fn init_inner(buf: &mut [u8]) {
    buf.fill(0);
    buf[0] = INNER;
}

fn prev_of(buf: &[u8]) -> PageId {
    PageId(get_u32(buf, 4))
}

fn next_of(buf: &[u8]) -> PageId {
    PageId(get_u32(buf, 8))
}

impl BTree {
    pub fn empty(page_size: usize, width: usize) -> Result<Self> {
        Layout::new(page_size, width)?;
        Ok(Self {
            width,
            page_size,
            root: PageId::NONE,
            depth: 0,
            len: 0,
            leaves: 0,
            pages: 0,
            first_leaf: PageId::NONE,
            max_key: f64::NEG_INFINITY,
            right_path: Vec::new(),
        })
    }

    /// A handle from just the root, for `seek_geq` and cursor walks.
    pub fn reader(page_size: usize, width: usize, root: PageId) -> Result<Self> {
        let mut t = Self::empty(page_size, width)?;
        t.root = root;
        Ok(t)
    }

    /// Bulk loads entries given in non-decreasing key order, filling every
    /// leaf except possibly the last.
    pub fn bulk_load<S, I, V>(store: &mut S, width: usize, entries: I, io: &mut IoStats) -> Result<Self>
    where
        S: PageStore,
        I: IntoIterator<Item = (f64, V)>,
        V: AsRef<[u8]>,
    {
        let ps = store.page_size();
        let lay = Layout::new(ps, width)?;
        let mut tree = Self::empty(ps, width)?;
        let mut buf = vec![0u8; ps];
        let mut level: Vec<(f64, PageId)> = Vec::new();
        let mut cur = PageId::NONE;
        let mut n = 0usize;
        let mut last = f64::NEG_INFINITY;
        for (pos, (key, value)) in entries.into_iter().enumerate() {
            let value = value.as_ref();
            if value.len() != width {
                return Err(Error::Parameter(format!("value of {} bytes, expected {width}", value.len())));
            }
            if key.is_nan() || key < last {
                return Err(Error::Unsorted { position: pos });
            }
            if cur.is_none() {
                cur = store.allocate()?;
                init_leaf(&mut buf, PageId::NONE, PageId::NONE);
                tree.first_leaf = cur;
            } else if n == lay.leaf_cap {
                let next = store.allocate()?;
                put_u32(&mut buf, 8, next.0);
                set_count(&mut buf, n);
                store.write(cur, &buf, io)?;
                level.push((last, cur));
                init_leaf(&mut buf, cur, PageId::NONE);
                cur = next;
                n = 0;
            }
            let off = lay.entry_off(n);
            put_f64(&mut buf, off, key);
            buf[off + 8..off + 8 + width].copy_from_slice(value);
            n += 1;
            last = key;
            tree.len += 1;
        }
        if cur.is_none() {
            return Ok(tree);
        }
        set_count(&mut buf, n);
        store.write(cur, &buf, io)?;
        level.push((last, cur));
        tree.leaves = level.len() as u64;
        tree.pages = tree.leaves;
        tree.max_key = last;
        let mut path = vec![cur];
        let mut depth = 1;
        while level.len() > 1 {
            let mut up = Vec::with_capacity(level.len().div_ceil(lay.inner_cap));
            for group in level.chunks(lay.inner_cap) {
                let id = store.allocate()?;
                init_inner(&mut buf);
                for (i, &(max, child)) in group.iter().enumerate() {
                    put_u32(&mut buf, lay.child_off(i), child.0);
                    if i + 1 < group.len() {
                        put_f64(&mut buf, lay.sep_off(i), max);
                    }
                }
                set_count(&mut buf, group.len());
                store.write(id, &buf, io)?;
                up.push((group[group.len() - 1].0, id));
            }
            tree.pages += up.len() as u64;
            path.push(up[up.len() - 1].1);
            level = up;
            depth += 1;
        }
        path.reverse();
        tree.root = level[0].1;
        tree.depth = depth;
        tree.right_path = path;
        Ok(tree)
    }

    /// Appends an entry whose key is at least the current maximum.
    pub fn append<S: PageStore>(&mut self, store: &mut S, key: f64, value: &[u8], io: &mut IoStats) -> Result<()> {
        let lay = Layout::new(self.page_size, self.width)?;
        if value.len() != self.width {
            return Err(Error::Parameter(format!("value of {} bytes, expected {}", value.len(), self.width)));
        }
        if key.is_nan() || key < self.max_key {
            return Err(Error::OutOfOrderAppend { key, max: self.max_key });
        }
        let mut buf = vec![0u8; self.page_size];
        let write_entry = |buf: &mut [u8], i: usize| {
            let off = lay.entry_off(i);
            put_f64(buf, off, key);
            buf[off + 8..off + 8 + lay.width].copy_from_slice(value);
            set_count(buf, i + 1);
        };
        if self.root.is_none() {
            let id = store.allocate()?;
            init_leaf(&mut buf, PageId::NONE, PageId::NONE);
            write_entry(&mut buf, 0);
            store.write(id, &buf, io)?;
            *self = Self { root: id, depth: 1, len: 1, leaves: 1, pages: 1, first_leaf: id, max_key: key, right_path: vec![id], ..self.clone() };
            return Ok(());
        }
        let d = self.depth as usize;
        let leaf = self.right_path[d - 1];
        store.read(leaf, &mut buf, io)?;
        let n = count(&buf);
        if n < lay.leaf_cap {
            write_entry(&mut buf, n);
            store.write(leaf, &buf, io)?;
        } else {
            let fresh = store.allocate()?;
            put_u32(&mut buf, 8, fresh.0);
            store.write(leaf, &buf, io)?;
            init_leaf(&mut buf, leaf, PageId::NONE);
            write_entry(&mut buf, 0);
            store.write(fresh, &buf, io)?;
            self.leaves += 1;
            self.pages += 1;
            self.right_path[d - 1] = fresh;
            // hook the new leaf into the rightmost spine, splitting full nodes
            let sep = self.max_key;
            let mut child = fresh;
            let mut placed = false;
            for lvl in (0..d - 1).rev() {
                let node = self.right_path[lvl];
                store.read(node, &mut buf, io)?;
                let c = count(&buf);
                if c < lay.inner_cap {
                    put_f64(&mut buf, lay.sep_off(c - 1), sep);
                    put_u32(&mut buf, lay.child_off(c), child.0);
                    set_count(&mut buf, c + 1);
                    store.write(node, &buf, io)?;
                    placed = true;
                    break;
                }
                let id = store.allocate()?;
                init_inner(&mut buf);
                put_u32(&mut buf, lay.child_off(0), child.0);
                set_count(&mut buf, 1);
                store.write(id, &buf, io)?;
                self.pages += 1;
                self.right_path[lvl] = id;
                child = id;
            }
            if !placed {
                let id = store.allocate()?;
                init_inner(&mut buf);
                put_u32(&mut buf, lay.child_off(0), self.root.0);
                put_u32(&mut buf, lay.child_off(1), child.0);
                put_f64(&mut buf, lay.sep_off(0), sep);
                set_count(&mut buf, 2);
                store.write(id, &buf, io)?;
                self.pages += 1;
                self.root = id;
                self.depth += 1;
                self.right_path.insert(0, id);
            }
        }
        self.len += 1;
        self.max_key = key;
        Ok(())
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Levels from root to leaves inclusive; 0 for an empty tree.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> u64 {
        self.leaves
    }

    pub fn page_count(&self) -> u64 {
        self.pages
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn root(&self) -> PageId {
        self.root
    }

    pub fn max_key(&self) -> Option<f64> {
        (self.len > 0).then_some(self.max_key)
    }

    pub fn leaf_capacity(&self) -> usize {
        leaf_cap(self.page_size, self.width)
    }

    pub fn fanout(&self) -> usize {
        inner_cap(self.page_size)
    }

    /// Positions a cursor on the first entry with key `>= key` (past the end
    /// when there is none).
    pub fn seek_geq<S: PageStore>(&self, store: &S, key: f64, io: &mut IoStats) -> Result<Cursor> {
        let lay = Layout::new(self.page_size, self.width)?;
        let mut cur = Cursor::detached(self);
        if self.root.is_none() {
            return Ok(cur);
        }
        let mut page = self.root;
        loop {
            store.read(page, &mut cur.buf, io)?;
            match cur.buf[0] {
                LEAF => break,
                INNER => {
                    let c = count(&cur.buf);
                    let mut lo = 0;
                    let mut hi = c - 1;
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        if get_f64(&cur.buf, lay.sep_off(mid)) < key {
                            lo = mid + 1;
                        } else {
                            hi = mid;
                        }
                    }
                    page = PageId(get_u32(&cur.buf, lay.child_off(lo)));
                }
                k => return Err(Error::Corrupt(format!("page {} has node kind {k}", page.0))),
            }
        }
        cur.page = page;
        let n = count(&cur.buf);
        let (mut lo, mut hi) = (0, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if get_f64(&cur.buf, lay.entry_off(mid)) < key {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        cur.pos = lo as isize;
        Ok(cur)
    }

    /// Cursor on the first entry.
    pub fn seek_first<S: PageStore>(&self, store: &S, io: &mut IoStats) -> Result<Cursor> {
        let mut cur = Cursor::detached(self);
        if self.first_leaf.is_none() {
            return Ok(cur);
        }
        cur.load(store, self.first_leaf, io)?;
        cur.pos = 0;
        Ok(cur)
    }

    /// Calls `f` on every entry with `from <= key <= until`, in key order.
    pub fn range_scan<S, F>(&self, store: &S, from: f64, until: f64, io: &mut IoStats, mut f: F) -> Result<()>
    where
        S: PageStore,
        F: FnMut(f64, &[u8]),
    {
        if from > until {
            return Ok(());
        }
        let mut cur = self.seek_geq(store, from, io)?;
        while let Some((k, v)) = cur.entry() {
            if k > until {
                break;
            }
            f(k, v);
            cur.advance(store, io)?;
        }
        Ok(())
    }

    /// Every entry in key order; for tests and rebuilds.
    pub fn collect<S: PageStore>(&self, store: &S, io: &mut IoStats) -> Result<Vec<(f64, Vec<u8>)>> {
        let mut out = Vec::with_capacity(self.len as usize);
        let mut cur = self.seek_first(store, io)?;
        while let Some((k, v)) = cur.entry() {
            out.push((k, v.to_vec()));
            cur.advance(store, io)?;
        }
        Ok(out)
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.width as u32)
            .u32(self.page_size as u32)
            .u32(self.root.0)
            .u32(self.depth)
            .u64(self.len)
            .u64(self.leaves)
            .u64(self.pages)
            .u32(self.first_leaf.0)
            .f64(self.max_key)
            .u32(self.right_path.len() as u32);
        for p in &self.right_path {
            w.u32(p.0);
        }
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let width = r.u32()? as usize;
        let page_size = r.u32()? as usize;
        Layout::new(page_size, width)?;
        let mut t = Self::empty(page_size, width)?;
        t.root = PageId(r.u32()?);
        t.depth = r.u32()?;
        t.len = r.u64()?;
        t.leaves = r.u64()?;
        t.pages = r.u64()?;
        t.first_leaf = PageId(r.u32()?);
        t.max_key = r.f64()?;
        let n = r.u32()?;
        if n != t.depth {
            return Err(Error::Corrupt("B+-tree spine length differs from depth".into()));
        }
        t.right_path = (0..n).map(|_| r.u32().map(PageId)).collect::<Result<_>>()?;
        Ok(t)
    }
}

/// Position inside the leaf level; holds a copy of the current leaf page.
#[derive(Debug, Clone)]
pub struct Cursor {
    buf: Vec<u8>,
    page: PageId,
    width: usize,
    /// -1 before the first entry of the leaf, `count` past its last.
    pos: isize,
}

impl Cursor {
    fn detached(tree: &BTree) -> Self {
        Self { buf: vec![0u8; tree.page_size], page: PageId::NONE, width: tree.width, pos: 0 }
    }

    fn load<S: PageStore>(&mut self, store: &S, page: PageId, io: &mut IoStats) -> Result<()> {
        store.read(page, &mut self.buf, io)?;
        if self.buf[0] != LEAF {
            return Err(Error::Corrupt(format!("page {} is not a leaf", page.0)));
        }
        self.page = page;
        Ok(())
    }

    fn count(&self) -> isize {
        if self.page.is_none() {
            0
        } else {
            count(&self.buf) as isize
        }
    }

    pub fn entry(&self) -> Option<(f64, &[u8])> {
        if self.pos < 0 || self.pos >= self.count() {
            return None;
        }
        let off = HDR + self.pos as usize * (8 + self.width);
        Some((get_f64(&self.buf, off), &self.buf[off + 8..off + 8 + self.width]))
    }

    pub fn key(&self) -> Option<f64> {
        self.entry().map(|e| e.0)
    }

    /// Moves to the next entry; false once past the last one.
    pub fn advance<S: PageStore>(&mut self, store: &S, io: &mut IoStats) -> Result<bool> {
        if self.page.is_none() {
            return Ok(false);
        }
        if self.pos + 1 < self.count() {
            self.pos += 1;
            return Ok(true);
        }
        let next = next_of(&self.buf);
        if next.is_none() {
            self.pos = self.count();
            return Ok(false);
        }
        self.load(store, next, io)?;
        self.pos = 0;
        Ok(self.count() > 0)
    }

    /// Moves to the previous entry; false once before the first one.
    pub fn retreat<S: PageStore>(&mut self, store: &S, io: &mut IoStats) -> Result<bool> {
        if self.page.is_none() {
            return Ok(false);
        }
        if self.pos > 0 {
            self.pos = (self.pos - 1).min(self.count() - 1);
            return Ok(self.pos >= 0);
        }
        let prev = prev_of(&self.buf);
        if prev.is_none() {
            self.pos = -1;
            return Ok(false);
        }
        self.load(store, prev, io)?;
        self.pos = self.count() - 1;
        Ok(self.pos >= 0)
    }
}
