use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::query2::Appx2Plus;
use super::{check_k_max, check_query, Query1Index, Query2Index};
use crate::breakpoints::{
    build_breakpoints1, build_breakpoints2_efficient, epsilon_for_target, BreakpointSet, Method,
};
use crate::error::{Error, Result};
use crate::exact::{Exact2, Extents};
use crate::model::{abs_trapezoid, rank_scores, Aggregate, Dataset, ObjectId, QuerySpec, Segment};
use crate::rank::{RankedAnswer, TopKQuery};
use crate::storage::{IoStats, PageStore};

/// How fine the breakpoints are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    Epsilon(f64),
    /// At most this many breakpoints, both ends included.
    Breakpoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMethod {
    Query1,
    Query2,
    /// QUERY2 candidates re-scored with EXACT2.
    Query2Plus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxConfig {
    pub breakpoints: Method,
    pub query: QueryMethod,
    pub resolution: Resolution,
    pub k_max: usize,
    /// Enforce QUERY1's `r² < N`, `r·k_max < N` space limit.
    pub check_capacity: bool,
}

/// Builds breakpoints of the given kind. For a target count, BP1 uses
/// `ε = 1/(r - 1)` and BP2 searches for the largest count not above `r`.
pub fn build_breakpoints(ds: &Dataset, method: Method, resolution: Resolution) -> Result<BreakpointSet> {
    let build = |e: f64| match method {
        Method::Bp1 => build_breakpoints1(ds, e),
        Method::Bp2 => build_breakpoints2_efficient(ds, e),
    };
    match resolution {
        Resolution::Epsilon(e) => build(e),
        Resolution::Breakpoints(r) if r < 2 => Err(Error::Parameter("need at least two breakpoints".into())),
        Resolution::Breakpoints(r) => match method {
            Method::Bp1 => build(1.0 / (r - 1) as f64),
            Method::Bp2 => epsilon_for_target(r, build).map(|(_, b)| b),
        },
    }
}

#[derive(Debug, Clone)]
enum Built<S> {
    Q1(Query1Index<S>),
    Q2(Query2Index<S>),
    Plus(Appx2Plus<S, S>),
}

impl<S: PageStore> Built<S> {
    fn breakpoints(&self) -> &BreakpointSet {
        match self {
            Built::Q1(i) => i.breakpoints(),
            Built::Q2(i) => i.breakpoints(),
            Built::Plus(i) => i.query2.breakpoints(),
        }
    }

    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer> {
        match self {
            Built::Q1(i) => i.query(q, io),
            Built::Q2(i) => i.query(q, io),
            Built::Plus(i) => i.query(q, io),
        }
    }
}

/// An approximate index that accepts appends.
///
/// Appended segments go to a tail that queries scan linearly and add
/// exactly. Once the appended absolute mass reaches the mass the index was
/// built over (the total has doubled), everything is rebuilt, so `τ` tracks
/// `ε` times the current mass.
pub struct ApproxEngine<S, F> {
    cfg: ApproxConfig,
    factory: F,
    ds: Dataset,
    built: Built<S>,
    ext: Extents,
    tail: Vec<Segment>,
    tail_mass: f64,
    build_mass: f64,
    rebuilds: u32,
}

impl<S: PageStore, F: FnMut() -> Result<S>> ApproxEngine<S, F> {
    /// Builds over `ds`, taking fresh page stores from `factory`.
    pub fn build(ds: Dataset, cfg: ApproxConfig, mut factory: F, io: &mut IoStats) -> Result<Self> {
        check_k_max(cfg.k_max)?;
        let built = Self::build_index(&ds, &cfg, &mut factory, io)?;
        Ok(Self {
            cfg,
            factory,
            ext: Extents::of(&ds),
            build_mass: ds.total_mass(crate::model::MassMode::Absolute),
            ds,
            built,
            tail: Vec::new(),
            tail_mass: 0.0,
            rebuilds: 0,
        })
    }

    fn build_index(ds: &Dataset, cfg: &ApproxConfig, factory: &mut F, io: &mut IoStats) -> Result<Built<S>> {
        let bps = build_breakpoints(ds, cfg.breakpoints, cfg.resolution)?;
        Ok(match cfg.query {
            QueryMethod::Query1 if cfg.check_capacity => Built::Q1(Query1Index::build(ds, bps, cfg.k_max, factory()?, io)?),
            QueryMethod::Query1 => Built::Q1(Query1Index::build_oversized(ds, bps, cfg.k_max, factory()?, io)?),
            QueryMethod::Query2 => Built::Q2(Query2Index::build(ds, bps, cfg.k_max, factory()?, io)?),
            QueryMethod::Query2Plus => {
                let q2 = Query2Index::build(ds, bps, cfg.k_max, factory()?, io)?;
                Built::Plus(Appx2Plus::new(q2, Exact2::build(ds, factory()?, io)?)?)
            }
        })
    }

    /// Appends a segment continuing its object; returns whether this
    /// triggered a rebuild.
    pub fn append(&mut self, seg: Segment, io: &mut IoStats) -> Result<bool> {
        self.ext.check_append(&seg)?;
        self.ds.push_segment(seg)?;
        self.ext.record(&seg);
        self.tail.push(seg);
        self.tail_mass += abs_trapezoid(seg.t_r - seg.t_l, seg.v_l, seg.v_r);
        if self.tail_mass < self.build_mass {
            return Ok(false);
        }
        self.rebuild(io)?;
        Ok(true)
    }

    /// Rebuilds over the current dataset and clears the tail.
    pub fn rebuild(&mut self, io: &mut IoStats) -> Result<()> {
        self.built = Self::build_index(&self.ds, &self.cfg, &mut self.factory, io)?;
        self.build_mass = self.ds.total_mass(crate::model::MassMode::Absolute);
        self.tail.clear();
        self.tail_mass = 0.0;
        self.rebuilds += 1;
        Ok(())
    }

    pub fn rebuilds(&self) -> u32 {
        self.rebuilds
    }

    pub fn tail_len(&self) -> usize {
        self.tail.len()
    }

    /// Absolute mass appended since the last build.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Absolute mass the current index was built over.
    pub fn build_mass(&self) -> f64 {
        self.build_mass
    }

    pub fn breakpoints(&self) -> &BreakpointSet {
        self.built.breakpoints()
    }

    pub fn dataset(&self) -> &Dataset {
        &self.ds
    }

    pub fn config(&self) -> &ApproxConfig {
        &self.cfg
    }
}

impl<S: PageStore, F: FnMut() -> Result<S>> TopKQuery for ApproxEngine<S, F> {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer> {
        if self.tail.is_empty() {
            return self.built.query(q, io);
        }
        check_query(q, self.cfg.k_max, self.ext.t_end)?;
        let (t1, t2) = (q.t1(), q.t2());
        let t_built = self.built.breakpoints().t_end();
        let mut sums: BTreeMap<ObjectId, f64> = self.ext.ids().map(|o| (o, 0.0)).collect();
        if t1 < t_built {
            let part = QuerySpec::new(q.k, t1, t2.min(t_built), Aggregate::Sum)?;
            for e in self.built.query(&part, io)?.entries {
                sums.insert(e.object, e.score);
            }
        }
        for s in &self.tail {
            let v = s.integral(t1.max(s.t_l), t2.min(s.t_r));
            *sums.entry(s.object).or_insert(0.0) += v;
        }
        rank_scores(sums, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::d0;
    use crate::model::{brute_force_topk, Vertex};
    use crate::storage::MemStore;

    fn cfg(query: QueryMethod) -> ApproxConfig {
        ApproxConfig { breakpoints: Method::Bp2, query, resolution: Resolution::Epsilon(0.1), k_max: 3, check_capacity: false }
    }

    #[test]
    fn target_counts() {
        let ds = crate::exact::tests::mixed(30, 40, 2);
        let b = build_breakpoints(&ds, Method::Bp1, Resolution::Breakpoints(21)).unwrap();
        assert_eq!(b.len(), 21);
        let b = build_breakpoints(&ds, Method::Bp2, Resolution::Breakpoints(21)).unwrap();
        assert!(b.len() <= 21 && b.len() >= 18, "{}", b.len());
        assert!(build_breakpoints(&ds, Method::Bp2, Resolution::Breakpoints(1)).is_err());
    }

    #[test]
    fn tail_then_single_rebuild() {
        for method in [QueryMethod::Query1, QueryMethod::Query2, QueryMethod::Query2Plus] {
            let mut io = IoStats::default();
            let ds = d0();
            let mass = ds.total_mass(crate::model::MassMode::Absolute);
            let mut e = ApproxEngine::build(ds.clone(), cfg(method), || MemStore::new(512), &mut io).unwrap();
            let before = e.query(&QuerySpec::sum(3, 0.0, 10.0).unwrap(), &mut io).unwrap();

            let mut shadow = ds.clone();
            let mut rebuilt = 0;
            let mut t = 10.0;
            while shadow.total_mass(crate::model::MassMode::Absolute) < 2.0 * mass + 20.0 {
                for id in 1..=3 {
                    let seg = shadow.append(ObjectId(id), Vertex::new(t + 1.0, shadow.polyline(ObjectId(id)).unwrap().last().v)).unwrap();
                    let flag = e.append(seg, &mut io).unwrap();
                    rebuilt += flag as u32;
                    if !flag && rebuilt == 0 {
                        let q = QuerySpec::sum(3, 0.0, 10.0).unwrap();
                        assert_eq!(e.query(&q, &mut io).unwrap(), before);
                        let q = QuerySpec::sum(3, 10.0, t + 1.0).unwrap();
                        let got = e.query(&q, &mut io).unwrap();
                        crate::exact::tests::assert_same(&got, &brute_force_topk(&shadow, &q).unwrap(), &shadow, &q);
                    }
                }
                t += 1.0;
            }
            assert_eq!(rebuilt, 1, "{method:?}");
            assert_eq!(e.rebuilds(), 1);
            assert!(e.breakpoints().t_end() > 10.0);
            assert!(e.append(Segment { t_l: 1.0, t_r: 2.0, v_l: 0.0, v_r: 0.0, object: ObjectId(1) }, &mut io).is_err());
        }
    }

    #[test]
    fn capacity_is_enforced_when_asked() {
        let mut io = IoStats::default();
        let c = ApproxConfig { check_capacity: true, ..cfg(QueryMethod::Query1) };
        assert!(matches!(ApproxEngine::build(d0(), c, || MemStore::new(512), &mut io), Err(Error::Capacity(_))));
    }
}
