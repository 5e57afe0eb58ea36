//! Paged block storage with explicit IO accounting.
//!
//! Structures never touch bytes directly: they read and write whole pages
//! through a [`PageStore`], and every page access is charged to an
//! [`IoStats`] owned by the caller. There is no cache, so counts reflect the
//! access path of an operation exactly.

mod btree;
pub(crate) mod codec;
mod header;
mod interval;

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::AddAssign;

use crate::error::{Error, Result};

pub use btree::{BTree, Cursor};
pub use codec::{ByteReader, ByteWriter};
pub use header::{IndexHeader, IndexKind, MAGIC, VERSION};
pub use interval::{IntervalRecord, IntervalTree, RecordLoc, Remap};

pub const DEFAULT_PAGE_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PageId(pub u32);

impl PageId {
    pub const NONE: PageId = PageId(u32::MAX);

    pub fn is_none(self) -> bool {
        self == Self::NONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IoStats {
    pub reads: u64,
    pub writes: u64,
}

impl IoStats {
    pub fn total(&self) -> u64 {
        self.reads + self.writes
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

impl AddAssign for IoStats {
    fn add_assign(&mut self, rhs: Self) {
        self.reads += rhs.reads;
        self.writes += rhs.writes;
    }
}

/// Fixed-size pages addressed by [`PageId`]. Page 0 is reserved for the
/// index header.
pub trait PageStore {
    fn page_size(&self) -> usize;

    fn page_count(&self) -> u32;

    /// Appends `n` zeroed pages and returns the first; the run is contiguous.
    fn allocate_run(&mut self, n: u32) -> Result<PageId>;

    /// Reads page `id` into `buf` (exactly one page long).
    fn read(&self, id: PageId, buf: &mut [u8], io: &mut IoStats) -> Result<()>;

    fn write(&mut self, id: PageId, buf: &[u8], io: &mut IoStats) -> Result<()>;

    fn allocate(&mut self) -> Result<PageId> {
        self.allocate_run(1)
    }
}

impl<S: PageStore + ?Sized> PageStore for &mut S {
    fn page_size(&self) -> usize {
        (**self).page_size()
    }
    fn page_count(&self) -> u32 {
        (**self).page_count()
    }
    fn allocate_run(&mut self, n: u32) -> Result<PageId> {
        (**self).allocate_run(n)
    }
    fn read(&self, id: PageId, buf: &mut [u8], io: &mut IoStats) -> Result<()> {
        (**self).read(id, buf, io)
    }
    fn write(&mut self, id: PageId, buf: &[u8], io: &mut IoStats) -> Result<()> {
        (**self).write(id, buf, io)
    }
}

/// In-memory page store.
#[derive(Debug, Clone)]
pub struct MemStore {
    page_size: usize,
    pages: Vec<Box<[u8]>>,
}

impl MemStore {
    pub fn new(page_size: usize) -> Result<Self> {
        check_page_size(page_size)?;
        Ok(Self { page_size, pages: vec![vec![0u8; page_size].into_boxed_slice()] })
    }

    /// Reassembles a store from a raw page image.
    pub fn from_bytes(page_size: usize, bytes: &[u8]) -> Result<Self> {
        check_page_size(page_size)?;
        if bytes.is_empty() || !bytes.len().is_multiple_of(page_size) {
            return Err(Error::Corrupt("image is not a whole number of pages".into()));
        }
        let pages = bytes.chunks(page_size).map(Box::from).collect();
        Ok(Self { page_size, pages })
    }

    pub fn pages(&self) -> impl Iterator<Item = &[u8]> {
        self.pages.iter().map(|p| &p[..])
    }
}

impl Default for MemStore {
    fn default() -> Self {
        Self::new(DEFAULT_PAGE_SIZE).expect("default page size is valid")
    }
}

pub fn check_page_size(page_size: usize) -> Result<()> {
    if !(256..=1 << 20).contains(&page_size) {
        return Err(Error::Parameter(alloc::format!("page size {page_size} outside [256, 1 MiB]")));
    }
    Ok(())
}

impl PageStore for MemStore {
    fn page_size(&self) -> usize {
        self.page_size
    }

    fn page_count(&self) -> u32 {
        self.pages.len() as u32
    }

    fn allocate_run(&mut self, n: u32) -> Result<PageId> {
        let first = self.pages.len();
        if first as u64 + n as u64 >= u32::MAX as u64 {
            return Err(Error::Capacity("page id space exhausted".into()));
        }
        self.pages.resize_with(first + n as usize, || vec![0u8; self.page_size].into_boxed_slice());
        Ok(PageId(first as u32))
    }

    fn read(&self, id: PageId, buf: &mut [u8], io: &mut IoStats) -> Result<()> {
        let page = self.pages.get(id.0 as usize).ok_or(Error::PageOutOfRange(id.0))?;
        buf.copy_from_slice(page);
        io.reads += 1;
        Ok(())
    }

    fn write(&mut self, id: PageId, buf: &[u8], io: &mut IoStats) -> Result<()> {
        let page = self.pages.get_mut(id.0 as usize).ok_or(Error::PageOutOfRange(id.0))?;
        page.copy_from_slice(buf);
        io.writes += 1;
        Ok(())
    }
}

/// Writes `bytes` into a fresh contiguous run of pages; returns the first
/// page (or [`PageId::NONE`] when empty).
pub fn write_blob<S: PageStore>(store: &mut S, bytes: &[u8], io: &mut IoStats) -> Result<PageId> {
    if bytes.is_empty() {
        return Ok(PageId::NONE);
    }
    let ps = store.page_size();
    let n = bytes.len().div_ceil(ps) as u32;
    let first = store.allocate_run(n)?;
    let mut buf = vec![0u8; ps];
    for (i, chunk) in bytes.chunks(ps).enumerate() {
        buf.fill(0);
        buf[..chunk.len()].copy_from_slice(chunk);
        store.write(PageId(first.0 + i as u32), &buf, io)?;
    }
    Ok(first)
}

pub fn read_blob<S: PageStore>(store: &S, first: PageId, len: usize, io: &mut IoStats) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return Ok(out);
    }
    let ps = store.page_size();
    let mut buf = vec![0u8; ps];
    let mut page = first.0;
    while out.len() < len {
        store.read(PageId(page), &mut buf, io)?;
        let take = (len - out.len()).min(ps);
        out.extend_from_slice(&buf[..take]);
        page += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_access_is_counted() {
        let mut s = MemStore::new(512).unwrap();
        let mut io = IoStats::default();
        let p = s.allocate().unwrap();
        assert_eq!(p, PageId(1));
        let mut buf = vec![7u8; 512];
        s.write(p, &buf, &mut io).unwrap();
        buf.fill(0);
        s.read(p, &mut buf, &mut io).unwrap();
        assert_eq!(buf[100], 7);
        assert_eq!(io, IoStats { reads: 1, writes: 1 });
        assert!(s.read(PageId(9), &mut buf, &mut io).is_err());
    }

    #[test]
    fn blob_round_trip() {
        let mut s = MemStore::new(256).unwrap();
        let mut io = IoStats::default();
        let bytes: Vec<u8> = (0..1000u32).map(|i| (i % 251) as u8).collect();
        let first = write_blob(&mut s, &bytes, &mut io).unwrap();
        assert_eq!(io.writes, 4);
        let back = read_blob(&s, first, bytes.len(), &mut io).unwrap();
        assert_eq!(back, bytes);
        let img: Vec<u8> = s.pages().flatten().copied().collect();
        let again = MemStore::from_bytes(256, &img).unwrap();
        assert_eq!(read_blob(&again, first, bytes.len(), &mut io).unwrap(), bytes);
    }
}
