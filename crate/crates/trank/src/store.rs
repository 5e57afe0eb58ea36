//! Page store over a regular file.

use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::Path;

use trank_core::storage::{check_page_size, IoStats, PageId, PageStore};
use trank_core::Error;

/// Pages of a file, read and written with positioned IO. Page 0 is the
/// index header, as with [`MemStore`](trank_core::MemStore).
#[derive(Debug)]
pub struct FileStore {
    file: File,
    page_size: usize,
    pages: u32,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

impl FileStore {
    /// Creates (or truncates) `path` with an empty header page.
    pub fn create(path: &Path, page_size: usize) -> trank_core::Result<Self> {
        check_page_size(page_size)?;
        let file = OpenOptions::new().read(true).write(true).create(true).truncate(true).open(path).map_err(io_err)?;
        file.set_len(page_size as u64).map_err(io_err)?;
        Ok(Self { file, page_size, pages: 1 })
    }

    /// Opens an existing index file, taking the page size from its header.
    pub fn open(path: &Path) -> trank_core::Result<Self> {
        let file = OpenOptions::new().read(true).write(true).open(path).map_err(io_err)?;
        let mut head = [0u8; 12];
        file.read_exact_at(&mut head, 0).map_err(io_err)?;
        if head[..4] != trank_core::storage::MAGIC {
            return Err(Error::Corrupt(format!("{} is not a trank file", path.display())));
        }
        let page_size = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        check_page_size(page_size)?;
        let len = file.metadata().map_err(io_err)?.len();
        if len % page_size as u64 != 0 {
            return Err(Error::Corrupt("file is not a whole number of pages".into()));
        }
        Ok(Self { file, page_size, pages: (len / page_size as u64) as u32 })
    }

    pub fn sync(&self) -> trank_core::Result<()> {
        self.file.sync_all().map_err(io_err)
    }
}

impl PageStore for FileStore {
    fn page_size(&self) -> usize {
        self.page_size
    }

    fn page_count(&self) -> u32 {
        self.pages
    }

    fn allocate_run(&mut self, n: u32) -> trank_core::Result<PageId> {
        let first = self.pages;
        let end = first as u64 + n as u64;
        if end >= u32::MAX as u64 {
            return Err(Error::Capacity("page id space exhausted".into()));
        }
        self.file.set_len(end * self.page_size as u64).map_err(io_err)?;
        self.pages = end as u32;
        Ok(PageId(first))
    }

    fn read(&self, id: PageId, buf: &mut [u8], io: &mut IoStats) -> trank_core::Result<()> {
        if id.0 >= self.pages {
            return Err(Error::PageOutOfRange(id.0));
        }
        self.file.read_exact_at(buf, id.0 as u64 * self.page_size as u64).map_err(io_err)?;
        io.reads += 1;
        Ok(())
    }

    fn write(&mut self, id: PageId, buf: &[u8], io: &mut IoStats) -> trank_core::Result<()> {
        if id.0 >= self.pages {
            return Err(Error::PageOutOfRange(id.0));
        }
        self.file.write_all_at(buf, id.0 as u64 * self.page_size as u64).map_err(io_err)?;
        io.writes += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use trank_core::exact::Exact3;
    use trank_core::{QuerySpec, TopKQuery};

    #[test]
    fn exact3_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ex3");
        let ds = crate::eval::synth::SynthProfile::new(crate::eval::synth::ValueModel::RandomWalkPositive, 12, 20, 3).generate();
        let mut io = IoStats::default();
        let q = QuerySpec::sum(5, 10.0, ds.t_end() / 2.0).unwrap();
        let want = {
            let e = Exact3::build(&ds, FileStore::create(&path, 512).unwrap(), &mut io).unwrap();
            e.store().sync().unwrap();
            e.query(&q, &mut io).unwrap()
        };
        let e = Exact3::open(FileStore::open(&path).unwrap(), &mut io).unwrap();
        assert_eq!(e.query(&q, &mut io).unwrap(), want);
        assert!(FileStore::open(&dir.path().join("missing")).is_err());
        let mut store = FileStore::create(&path, 512).unwrap();
        let mut buf = vec![0u8; 512];
        assert_eq!(store.read(PageId(3), &mut buf, &mut io), Err(Error::PageOutOfRange(3)));
        let p = store.allocate().unwrap();
        buf[7] = 9;
        store.write(p, &buf, &mut io).unwrap();
        let mut back = vec![0u8; 512];
        store.read(p, &mut back, &mut io).unwrap();
        assert_eq!(back, buf);
    }
}
