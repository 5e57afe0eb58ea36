//! The eight index methods behind one type, plus their files on disk.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trank_core::approx::{build_breakpoints, dyadic_alpha, Appx2Plus, Query1Index, Query2Index, Resolution};
use trank_core::breakpoints::{BreakpointSet, Method};
use trank_core::exact::{Exact1, Exact2, Exact3};
use trank_core::storage::{IndexHeader, IndexKind, DEFAULT_PAGE_SIZE};
use trank_core::{Dataset, IoStats, PageStore, QuerySpec, RankedAnswer, TopKQuery};

use crate::store::FileStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Exact1,
    Exact2,
    Exact3,
    /// BP1 breakpoints, QUERY1 lists.
    Appx1b,
    /// BP1 breakpoints, QUERY2 lists.
    Appx2b,
    /// BP2 breakpoints, QUERY1 lists.
    Appx1,
    /// BP2 breakpoints, QUERY2 lists.
    Appx2,
    /// BP2 breakpoints, QUERY2 candidates re-scored by EXACT2.
    Appx2plus,
}

impl MethodTag {
    pub const ALL: [MethodTag; 8] = [
        MethodTag::Exact1,
        MethodTag::Exact2,
        MethodTag::Exact3,
        MethodTag::Appx1b,
        MethodTag::Appx2b,
        MethodTag::Appx1,
        MethodTag::Appx2,
        MethodTag::Appx2plus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodTag::Exact1 => "exact1",
            MethodTag::Exact2 => "exact2",
            MethodTag::Exact3 => "exact3",
            MethodTag::Appx1b => "appx1b",
            MethodTag::Appx2b => "appx2b",
            MethodTag::Appx1 => "appx1",
            MethodTag::Appx2 => "appx2",
            MethodTag::Appx2plus => "appx2plus",
        }
    }

    pub fn is_exact(self) -> bool {
        self.breakpoint_method().is_none()
    }

    pub fn breakpoint_method(self) -> Option<Method> {
        match self {
            MethodTag::Exact1 | MethodTag::Exact2 | MethodTag::Exact3 => None,
            MethodTag::Appx1b | MethodTag::Appx2b => Some(Method::Bp1),
            _ => Some(Method::Bp2),
        }
    }
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildParams {
    /// Required for approximate methods.
    pub resolution: Option<Resolution>,
    pub k_max: usize,
    pub page_size: usize,
    /// Build QUERY1 even when `r² ≥ N` or `r·k_max ≥ N`.
    pub oversized: bool,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self { resolution: None, k_max: 200, page_size: DEFAULT_PAGE_SIZE, oversized: false }
    }
}

#[derive(Debug, Clone)]
pub enum AnyIndex<S> {
    Exact1(Exact1<S>),
    Exact2(Exact2<S>),
    Exact3(Exact3<S>),
    Query1(Query1Index<S>),
    Query2(Query2Index<S>),
    Plus(Appx2Plus<S, S>),
}

impl<S: PageStore> AnyIndex<S> {
    /// Builds `tag` into `main`; APPX2+ also builds its EXACT2 companion into
    /// the store `companion` returns.
    pub fn build(
        ds: &Dataset,
        tag: MethodTag,
        params: &BuildParams,
        main: S,
        companion: impl FnOnce() -> Result<S>,
        io: &mut IoStats,
    ) -> Result<Self> {
        let Some(method) = tag.breakpoint_method() else {
            return Ok(match tag {
                MethodTag::Exact1 => AnyIndex::Exact1(Exact1::build(ds, main, io)?),
                MethodTag::Exact2 => AnyIndex::Exact2(Exact2::build(ds, main, io)?),
                _ => AnyIndex::Exact3(Exact3::build(ds, main, io)?),
            });
        };
        let res = params
            .resolution
            .ok_or_else(|| Error::Usage(format!("{tag} needs a resolution (epsilon or a breakpoint target)")))?;
        let bps = build_breakpoints(ds, method, res)?;
        let k_max = params.k_max;
        Ok(match tag {
            MethodTag::Appx1b | MethodTag::Appx1 if params.oversized => {
                AnyIndex::Query1(Query1Index::build_oversized(ds, bps, k_max, main, io)?)
            }
            MethodTag::Appx1b | MethodTag::Appx1 => AnyIndex::Query1(Query1Index::build(ds, bps, k_max, main, io)?),
            MethodTag::Appx2b | MethodTag::Appx2 => AnyIndex::Query2(Query2Index::build(ds, bps, k_max, main, io)?),
            _ => {
                let q2 = Query2Index::build(ds, bps, k_max, main, io)?;
                AnyIndex::Plus(Appx2Plus::new(q2, Exact2::build(ds, companion()?, io)?)?)
            }
        })
    }

    pub fn tag(&self) -> MethodTag {
        let bp1 = self.breakpoints().is_some_and(|b| b.method == Method::Bp1);
        match self {
            AnyIndex::Exact1(_) => MethodTag::Exact1,
            AnyIndex::Exact2(_) => MethodTag::Exact2,
            AnyIndex::Exact3(_) => MethodTag::Exact3,
            AnyIndex::Query1(_) if bp1 => MethodTag::Appx1b,
            AnyIndex::Query1(_) => MethodTag::Appx1,
            AnyIndex::Query2(_) if bp1 => MethodTag::Appx2b,
            AnyIndex::Query2(_) => MethodTag::Appx2,
            AnyIndex::Plus(_) => MethodTag::Appx2plus,
        }
    }

    pub fn breakpoints(&self) -> Option<&BreakpointSet> {
        match self {
            AnyIndex::Query1(i) => Some(i.breakpoints()),
            AnyIndex::Query2(i) => Some(i.breakpoints()),
            AnyIndex::Plus(i) => Some(i.query2.breakpoints()),
            _ => None,
        }
    }

    pub fn k_max(&self) -> Option<usize> {
        match self {
            AnyIndex::Query1(i) => Some(i.k_max()),
            AnyIndex::Query2(i) => Some(i.k_max()),
            AnyIndex::Plus(i) => Some(i.query2.k_max()),
            _ => None,
        }
    }

    /// Pages over all stores, header pages included.
    pub fn pages(&self) -> u64 {
        let p = |s: &S| s.page_count() as u64;
        match self {
            AnyIndex::Exact1(i) => p(i.store()),
            AnyIndex::Exact2(i) => p(i.store()),
            AnyIndex::Exact3(i) => p(i.store()),
            AnyIndex::Query1(i) => p(i.store()),
            AnyIndex::Query2(i) => p(i.store()),
            AnyIndex::Plus(i) => p(i.query2.store()) + p(i.exact2.store()),
        }
    }

    /// `(ε, α)` this index promises on non-negative data; exact methods give
    /// `(0, 1)`.
    pub fn guarantee(&self) -> (f64, f64) {
        match (self, self.breakpoints()) {
            (AnyIndex::Query1(_), Some(b)) => (b.epsilon, 1.0),
            (_, Some(b)) => (b.epsilon, dyadic_alpha(b.len())),
            _ => (0.0, 1.0),
        }
    }
}

impl<S: PageStore> TopKQuery for AnyIndex<S> {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> trank_core::Result<RankedAnswer> {
        match self {
            AnyIndex::Exact1(i) => i.query(q, io),
            AnyIndex::Exact2(i) => i.query(q, io),
            AnyIndex::Exact3(i) => i.query(q, io),
            AnyIndex::Query1(i) => i.query(q, io),
            AnyIndex::Query2(i) => i.query(q, io),
            AnyIndex::Plus(i) => i.query(q, io),
        }
    }
}

/// Where the EXACT2 companion of an APPX2+ index lives.
pub fn companion_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".ex2");
    path.with_file_name(name)
}

/// Builds `tag` into a file at `path` (plus `path.ex2` for APPX2+).
/// Nothing is left at `path` (or its companion) if the build fails.
pub fn build_file(ds: &Dataset, tag: MethodTag, params: &BuildParams, path: &Path, io: &mut IoStats) -> Result<AnyIndex<FileStore>> {
    let comp = companion_path(path);
    let built = build_file_inner(ds, tag, params, path, &comp, io);
    if built.is_err() {
        let _ = std::fs::remove_file(path);
        if tag == MethodTag::Appx2plus {
            let _ = std::fs::remove_file(&comp);
        }
    }
    built
}

fn build_file_inner(
    ds: &Dataset,
    tag: MethodTag,
    params: &BuildParams,
    path: &Path,
    comp: &Path,
    io: &mut IoStats,
) -> Result<AnyIndex<FileStore>> {
    let main = FileStore::create(path, params.page_size)?;
    let idx = AnyIndex::build(ds, tag, params, main, || Ok(FileStore::create(comp, params.page_size)?), io)?;
    let idx = match idx {
        AnyIndex::Plus(p) => {
            let mut store = p.query2.into_store();
            let mut h = IndexHeader::read(&store, io)?;
            h.companion = comp.file_name().map(|n| n.to_string_lossy().into_owned());
            h.write(&mut store, io)?;
            AnyIndex::Plus(Appx2Plus::new(Query2Index::open(store, io)?, p.exact2)?)
        }
        other => other,
    };
    match &idx {
        AnyIndex::Exact1(i) => i.store().sync()?,
        AnyIndex::Exact2(i) => i.store().sync()?,
        AnyIndex::Exact3(i) => i.store().sync()?,
        AnyIndex::Query1(i) => i.store().sync()?,
        AnyIndex::Query2(i) => i.store().sync()?,
        AnyIndex::Plus(i) => {
            i.query2.store().sync()?;
            i.exact2.store().sync()?;
        }
    }
    Ok(idx)
}

/// Opens an index file of any kind. A companion path is resolved relative
/// to the index file's directory.
pub fn open_file(path: &Path, io: &mut IoStats) -> Result<AnyIndex<FileStore>> {
    let store = FileStore::open(path)?;
    let h = IndexHeader::read(&store, io)?;
    Ok(match h.kind {
        IndexKind::Exact1 => AnyIndex::Exact1(Exact1::open(store, io)?),
        IndexKind::Exact2 => AnyIndex::Exact2(Exact2::open(store, io)?),
        IndexKind::Exact3 => AnyIndex::Exact3(Exact3::open(store, io)?),
        IndexKind::Query1 => AnyIndex::Query1(Query1Index::open(store, io)?),
        IndexKind::Query2 => {
            let q2 = Query2Index::open(store, io)?;
            match h.companion {
                None => AnyIndex::Query2(q2),
                Some(c) => {
                    let cpath = path.parent().unwrap_or(Path::new("")).join(c);
                    let ex2 = FileStore::open(&cpath)
                        .map_err(|e| Error::Format(format!("companion {}: {e}", cpath.display())))?;
                    AnyIndex::Plus(Appx2Plus::new(q2, Exact2::open(ex2, io)?)?)
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth::{SynthProfile, ValueModel};
    use trank_core::eval::same_ranking;
    use trank_core::model::brute_force_topk;
    use trank_core::MemStore;

    fn params(res: Resolution) -> BuildParams {
        BuildParams { resolution: Some(res), k_max: 10, page_size: 1024, oversized: false }
    }

    #[test]
    fn every_tag_round_trips_through_files() {
        let ds = SynthProfile::new(ValueModel::RandomWalkPositive, 20, 60, 8).generate();
        let dir = tempfile::tempdir().unwrap();
        let mut io = IoStats::default();
        let q = QuerySpec::sum(5, 1000.0, 6000.0).unwrap();
        for tag in MethodTag::ALL {
            let path = dir.path().join(tag.name());
            let built = build_file(&ds, tag, &params(Resolution::Breakpoints(20)), &path, &mut io).unwrap();
            assert_eq!(built.tag(), tag);
            let want = built.query(&q, &mut io).unwrap();
            let opened = open_file(&path, &mut io).unwrap();
            assert_eq!(opened.tag(), tag);
            assert_eq!(opened.query(&q, &mut io).unwrap(), want);
            assert_eq!(opened.pages(), built.pages());
            if tag.is_exact() {
                let truth = brute_force_topk(&ds, &q).unwrap();
                let score = |o| ds.polyline(o).unwrap().integral(q.t1(), q.t2());
                same_ranking(&want, &truth, score).unwrap();
            }
        }
        assert!(companion_path(&dir.path().join("appx2plus")).exists());
    }

    #[test]
    fn approximate_needs_resolution_and_capacity() {
        let ds = SynthProfile::new(ValueModel::RandomWalkPositive, 5, 4, 1).generate();
        let mut io = IoStats::default();
        let mem = || Ok(MemStore::new(1024)?);
        let none = BuildParams { resolution: None, ..params(Resolution::Epsilon(0.1)) };
        assert!(matches!(AnyIndex::build(&ds, MethodTag::Appx2, &none, MemStore::new(1024).unwrap(), mem, &mut io), Err(Error::Usage(_))));
        let big = params(Resolution::Epsilon(0.1));
        let err = AnyIndex::build(&ds, MethodTag::Appx1, &big, MemStore::new(1024).unwrap(), mem, &mut io).unwrap_err();
        assert!(matches!(err, Error::Core(trank_core::Error::Capacity(_))), "{err}");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("appx1");
        assert!(build_file(&ds, MethodTag::Appx1, &big, &path, &mut io).is_err());
        assert!(!path.exists());
        let ok = BuildParams { oversized: true, ..big };
        assert!(AnyIndex::build(&ds, MethodTag::Appx1, &ok, MemStore::new(1024).unwrap(), mem, &mut io).is_ok());
    }

    #[test]
    fn guarantees_per_kind() {
        let ds = SynthProfile::new(ValueModel::RandomWalkPositive, 5, 40, 1).generate();
        let mut io = IoStats::default();
        let mem = || Ok(MemStore::new(1024)?);
        let p = params(Resolution::Breakpoints(9));
        let q1 = AnyIndex::build(&ds, MethodTag::Appx1b, &p, MemStore::new(1024).unwrap(), mem, &mut io).unwrap();
        assert_eq!(q1.guarantee(), (0.125, 1.0));
        let q2 = AnyIndex::build(&ds, MethodTag::Appx2b, &p, MemStore::new(1024).unwrap(), mem, &mut io).unwrap();
        assert_eq!(q2.guarantee(), (0.125, 8.0));
        let ex = AnyIndex::build(&ds, MethodTag::Exact3, &p, MemStore::new(1024).unwrap(), mem, &mut io).unwrap();
        assert_eq!(ex.guarantee(), (0.0, 1.0));
    }
}
