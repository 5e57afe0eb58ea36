//! Ranked answers and bounded top-k selection.
//!
//! Every query path returns a [`RankedAnswer`]: entries ordered by descending
//! score, ties broken by ascending object id.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Result;
use crate::model::{ObjectId, QuerySpec};
use crate::storage::IoStats;

/// Anything that answers top-k queries while charging page accesses.
pub trait TopKQuery {
    fn query(&self, q: &QuerySpec, io: &mut IoStats) -> Result<RankedAnswer>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub object: ObjectId,
    pub score: f64,
}

impl Scored {
    pub fn new(object: ObjectId, score: f64) -> Self {
        Self { object, score }
    }
}

/// Rank order: `Less` means `a` ranks ahead of `b`.
pub fn rank_order(a: &Scored, b: &Scored) -> Ordering {
    b.score.total_cmp(&a.score).then(a.object.cmp(&b.object))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedAnswer {
    pub entries: Vec<Scored>,
}

impl RankedAnswer {
    /// Sorts `entries` into rank order and keeps the first `k`.
    pub fn from_unsorted(mut entries: Vec<Scored>, k: usize) -> Self {
        if entries.len() > k {
            entries.select_nth_unstable_by(k, rank_order);
            entries.truncate(k);
        }
        entries.sort_unstable_by(rank_order);
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.entries.iter().map(|e| e.object)
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.score)
    }

    /// Checks the ordering, uniqueness and length invariants.
    pub fn is_well_formed(&self, k: usize) -> bool {
        if self.entries.len() > k {
            return false;
        }
        let ordered = self
            .entries
            .windows(2)
            .all(|w| rank_order(&w[0], &w[1]) == Ordering::Less);
        let mut ids: Vec<ObjectId> = self.objects().collect();
        ids.sort_unstable();
        ordered && ids.windows(2).all(|w| w[0] != w[1])
    }
}

#[derive(Debug, Clone, Copy)]
struct Worst(Scored);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    // heap top = the entry ranked last
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

/// Keeps the `k` best entries seen so far.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k.min(1 << 16) + 1) }
    }

    pub fn push(&mut self, entry: Scored) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(Worst(entry));
        } else if let Some(mut top) = self.heap.peek_mut() {
            if rank_order(&entry, &top.0) == Ordering::Less {
                *top = Worst(entry);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn into_answer(self) -> RankedAnswer {
        let mut entries: Vec<Scored> = self.heap.into_iter().map(|w| w.0).collect();
        entries.sort_unstable_by(rank_order);
        RankedAnswer { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: u32, score: f64) -> Scored {
        Scored::new(ObjectId(id), score)
    }

    #[test]
    fn keeps_best_k_with_id_tiebreak() {
        let mut top = TopK::new(3);
        for e in [s(4, 1.0), s(2, 5.0), s(3, 5.0), s(1, 0.5), s(5, 2.0)] {
            top.push(e);
        }
        let ans = top.into_answer();
        assert_eq!(ans.entries, vec![s(2, 5.0), s(3, 5.0), s(5, 2.0)]);
        assert!(ans.is_well_formed(3));
    }

    #[test]
    fn equal_scores_prefer_small_ids() {
        let mut top = TopK::new(2);
        for id in (1..=6).rev() {
            top.push(s(id, 0.0));
        }
        let ids: Vec<u32> = top.into_answer().objects().map(|o| o.0).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn from_unsorted_matches_heap() {
        let entries: Vec<Scored> = (1..50).map(|i| s(i, ((i * 37) % 11) as f64)).collect();
        let mut top = TopK::new(7);
        entries.iter().for_each(|e| top.push(*e));
        assert_eq!(RankedAnswer::from_unsorted(entries, 7), top.into_answer());
    }

    #[test]
    fn zero_k_is_empty() {
        let mut top = TopK::new(0);
        top.push(s(1, 1.0));
        assert!(top.into_answer().is_empty());
    }
}
