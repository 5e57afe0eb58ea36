//! Top-k lists packed into pages. A list never straddles a page boundary
//! unless it is longer than a page, in which case it starts on a fresh run.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ObjectId;
use crate::rank::Scored;
use crate::storage::codec::{get_f64, get_u32, put_f64, put_u32};
use crate::storage::{IoStats, PageId, PageStore};

pub(crate) const ENTRY: usize = 12;
pub(crate) const LOC: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ListLoc {
    pub page: PageId,
    pub off: u32,
    pub len: u32,
}

impl ListLoc {
    pub fn to_bytes(self) -> [u8; LOC] {
        let mut b = [0u8; LOC];
        put_u32(&mut b, 0, self.page.0);
        put_u32(&mut b, 4, self.off);
        put_u32(&mut b, 8, self.len);
        b
    }

    pub fn from_bytes(b: &[u8]) -> Self {
        Self { page: PageId(get_u32(b, 0)), off: get_u32(b, 4), len: get_u32(b, 8) }
    }
}

pub(crate) struct ListWriter {
    buf: Vec<u8>,
    page: PageId,
    used: usize,
}

impl ListWriter {
    pub fn new(page_size: usize) -> Self {
        Self { buf: vec![0u8; page_size], page: PageId::NONE, used: 0 }
    }

    pub fn push<S: PageStore>(&mut self, store: &mut S, list: &[Scored], io: &mut IoStats) -> Result<ListLoc> {
        let ps = self.buf.len();
        let bytes = list.len() * ENTRY;
        if bytes == 0 {
            return Ok(ListLoc { page: PageId::NONE, off: 0, len: 0 });
        }
        if bytes > ps {
            self.flush(store, io)?;
            let n = bytes.div_ceil(ps);
            let first = store.allocate_run(n as u32)?;
            let mut page = vec![0u8; ps];
            for (p, chunk) in list.chunks(ps / ENTRY).enumerate() {
                page.fill(0);
                for (i, e) in chunk.iter().enumerate() {
                    put_entry(&mut page, i * ENTRY, e);
                }
                store.write(PageId(first.0 + p as u32), &page, io)?;
            }
            return Ok(ListLoc { page: first, off: 0, len: list.len() as u32 });
        }
        if self.page.is_none() || self.used + bytes > ps {
            self.flush(store, io)?;
            self.page = store.allocate()?;
        }
        let off = self.used;
        for (i, e) in list.iter().enumerate() {
            put_entry(&mut self.buf, off + i * ENTRY, e);
        }
        self.used += bytes;
        Ok(ListLoc { page: self.page, off: off as u32, len: list.len() as u32 })
    }

    pub fn flush<S: PageStore>(&mut self, store: &mut S, io: &mut IoStats) -> Result<()> {
        if !self.page.is_none() {
            store.write(self.page, &self.buf, io)?;
            self.buf.fill(0);
            self.page = PageId::NONE;
            self.used = 0;
        }
        Ok(())
    }
}

fn put_entry(buf: &mut [u8], off: usize, e: &Scored) {
    put_u32(buf, off, e.object.0);
    put_f64(buf, off + 4, e.score);
}

/// Reads the first `k` entries of a list, touching only the pages they
/// occupy.
pub(crate) fn read_list<S: PageStore>(store: &S, loc: ListLoc, k: usize, io: &mut IoStats) -> Result<Vec<Scored>> {
    let take = k.min(loc.len as usize);
    let mut out = Vec::with_capacity(take);
    if take == 0 {
        return Ok(out);
    }
    let ps = store.page_size();
    let per_page = ps / ENTRY;
    let mut buf = vec![0u8; ps];
    let mut page = loc.page.0;
    let mut slot = 0;
    store.read(PageId(page), &mut buf, io)?;
    for _ in 0..take {
        let off = if loc.len as usize * ENTRY > ps {
            if slot == per_page {
                page += 1;
                slot = 0;
                store.read(PageId(page), &mut buf, io)?;
            }
            slot * ENTRY
        } else {
            loc.off as usize + slot * ENTRY
        };
        if off + ENTRY > ps {
            return Err(Error::Corrupt("list runs past its page".into()));
        }
        out.push(Scored::new(ObjectId(get_u32(&buf, off)), get_f64(&buf, off + 4)));
        slot += 1;
    }
    Ok(out)
}
