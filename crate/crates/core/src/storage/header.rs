use alloc::format;
use alloc::string::String;
use alloc::vec;

use super::codec::{get_u16, get_u32, get_u64, put_u16, put_u32, put_u64};
use super::{IoStats, PageId, PageStore};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TRNK";
pub const VERSION: u16 = 1;

const COMPANION_OFF: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Exact1,
    Exact2,
    Exact3,
    Query1,
    Query2,
}

impl IndexKind {
    pub fn tag(self) -> &'static str {
        match self {
            IndexKind::Exact1 => "EX1",
            IndexKind::Exact2 => "EX2",
            IndexKind::Exact3 => "EX3",
            IndexKind::Query1 => "Q1",
            IndexKind::Query2 => "Q2",
        }
    }

    fn code(self) -> u8 {
        match self {
            IndexKind::Exact1 => 1,
            IndexKind::Exact2 => 2,
            IndexKind::Exact3 => 3,
            IndexKind::Query1 => 4,
            IndexKind::Query2 => 5,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            1 => IndexKind::Exact1,
            2 => IndexKind::Exact2,
            3 => IndexKind::Exact3,
            4 => IndexKind::Query1,
            5 => IndexKind::Query2,
            _ => return Err(Error::Corrupt(format!("unknown index kind {c}"))),
        })
    }
}

/// Contents of page 0 of every index file.
///
/// Layout (little-endian): magic, version u16, kind u8, pad, page_size u32,
/// entry_width u32, root u32, entry_count u64, meta_page u32, meta_len u64,
/// then a length-prefixed companion path at byte 48.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexHeader {
    pub kind: IndexKind,
    pub page_size: u32,
    pub entry_width: u32,
    pub root: PageId,
    pub entry_count: u64,
    pub meta_page: PageId,
    pub meta_len: u64,
    /// Path of a companion index this one depends on, if any.
    pub companion: Option<String>,
}

impl IndexHeader {
    pub fn write<S: PageStore>(&self, store: &mut S, io: &mut IoStats) -> Result<()> {
        let ps = store.page_size();
        let mut buf = vec![0u8; ps];
        buf[..4].copy_from_slice(&MAGIC);
        put_u16(&mut buf, 4, VERSION);
        buf[6] = self.kind.code();
        put_u32(&mut buf, 8, self.page_size);
        put_u32(&mut buf, 12, self.entry_width);
        put_u32(&mut buf, 16, self.root.0);
        put_u64(&mut buf, 20, self.entry_count);
        put_u32(&mut buf, 28, self.meta_page.0);
        put_u64(&mut buf, 32, self.meta_len);
        let comp = self.companion.as_deref().unwrap_or("").as_bytes();
        if COMPANION_OFF + 2 + comp.len() > ps || comp.len() > u16::MAX as usize {
            return Err(Error::Parameter("companion path too long for header page".into()));
        }
        put_u16(&mut buf, COMPANION_OFF, comp.len() as u16);
        buf[COMPANION_OFF + 2..COMPANION_OFF + 2 + comp.len()].copy_from_slice(comp);
        store.write(PageId(0), &buf, io)
    }

    pub fn read<S: PageStore>(store: &S, io: &mut IoStats) -> Result<Self> {
        let mut buf = vec![0u8; store.page_size()];
        store.read(PageId(0), &mut buf, io)?;
        Self::decode(&buf)
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        if buf.len() < COMPANION_OFF + 2 || buf[..4] != MAGIC {
            return Err(Error::Corrupt("missing TRNK magic".into()));
        }
        let version = get_u16(buf, 4);
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported index version {version}")));
        }
        let n = get_u16(buf, COMPANION_OFF) as usize;
        let comp = buf
            .get(COMPANION_OFF + 2..COMPANION_OFF + 2 + n)
            .ok_or_else(|| Error::Corrupt("companion path overruns header".into()))?;
        let companion = match n {
            0 => None,
            _ => Some(String::from_utf8(comp.to_vec()).map_err(|_| Error::Corrupt("companion path not UTF-8".into()))?),
        };
        Ok(Self {
            kind: IndexKind::from_code(buf[6])?,
            page_size: get_u32(buf, 8),
            entry_width: get_u32(buf, 12),
            root: PageId(get_u32(buf, 16)),
            entry_count: get_u64(buf, 20),
            meta_page: PageId(get_u32(buf, 28)),
            meta_len: get_u64(buf, 32),
            companion,
        })
    }

    /// Checks that the header describes an index of `kind` for this store.
    pub fn expect<S: PageStore>(&self, kind: IndexKind, store: &S) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Corrupt(format!("expected a {} index, found {}", kind.tag(), self.kind.tag())));
        }
        if self.page_size as usize != store.page_size() {
            return Err(Error::Corrupt(format!(
                "header page size {} differs from store page size {}",
                self.page_size,
                store.page_size()
            )));
        }
        Ok(())
    }
}
