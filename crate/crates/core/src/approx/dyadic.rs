use alloc::vec::Vec;

/// Dyadic intervals over `gaps` elementary gaps, seen as a segment tree.
///
/// Level `ℓ` holds `⌈gaps / 2^ℓ⌉` nodes; node `h` of level `ℓ` covers gaps
/// `h·2^ℓ .. min((h+1)·2^ℓ, gaps)` (gap `g` is `[b_g, b_{g+1}]`). The top
/// level has a single node spanning everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicTree {
    gaps: usize,
    levels: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DyadicNode {
    pub level: u32,
    pub index: usize,
}

impl DyadicTree {
    pub fn new(gaps: usize) -> Self {
        assert!(gaps >= 1, "a dyadic tree needs at least one gap");
        Self { gaps, levels: ceil_log2(gaps) + 1 }
    }

    pub fn gaps(&self) -> usize {
        self.gaps
    }

    /// Number of levels, `⌈log₂ gaps⌉ + 1`.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn width(&self, level: u32) -> usize {
        self.gaps.div_ceil(1 << level)
    }

    /// Total node count over all levels.
    pub fn node_count(&self) -> usize {
        (0..self.levels).map(|l| self.width(l)).sum()
    }

    /// Dense position of a node, level by level from the leaves.
    pub fn position(&self, n: DyadicNode) -> usize {
        (0..n.level).map(|l| self.width(l)).sum::<usize>() + n.index
    }

    /// Gap range `[lo, hi)` covered by `n`.
    pub fn span(&self, n: DyadicNode) -> (usize, usize) {
        let lo = n.index << n.level;
        (lo, (lo + (1 << n.level)).min(self.gaps))
    }

    /// Disjoint nodes whose spans union to gaps `[lo, hi)`; empty when
    /// `lo == hi`. Uses at most `max(1, 2⌈log₂ gaps⌉)` nodes.
    pub fn decompose(&self, lo: usize, hi: usize) -> Vec<DyadicNode> {
        assert!(lo <= hi && hi <= self.gaps, "gap range {lo}..{hi} outside 0..{}", self.gaps);
        let mut out = Vec::new();
        let mut pos = lo;
        while pos < hi {
            let mut level = 0;
            while level + 1 < self.levels {
                let l = level + 1;
                let aligned = pos & ((1usize << l) - 1) == 0;
                if !aligned || (pos + (1 << l)).min(self.gaps) > hi {
                    break;
                }
                level = l;
            }
            let n = DyadicNode { level, index: pos >> level };
            pos = self.span(n).1;
            out.push(n);
        }
        out
    }
}

pub(crate) fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        let t = DyadicTree::new(8);
        let d = t.decompose(1, 7);
        let spans: Vec<_> = d.iter().map(|&n| t.span(n)).collect();
        assert_eq!(spans, vec![(1, 2), (2, 4), (4, 6), (6, 7)]);
        assert_eq!(t.decompose(0, 8), vec![DyadicNode { level: 3, index: 0 }]);
        assert_eq!(t.decompose(5, 6), vec![DyadicNode { level: 0, index: 5 }]);
        assert!(t.decompose(3, 3).is_empty());
        assert_eq!(t.node_count(), 15);
        assert_eq!(DyadicTree::new(1).decompose(0, 1).len(), 1);
    }

    #[test]
    fn positions_are_dense() {
        for gaps in 1..40 {
            let t = DyadicTree::new(gaps);
            let mut seen = vec![false; t.node_count()];
            for level in 0..t.levels() {
                for index in 0..t.width(level) {
                    let p = t.position(DyadicNode { level, index });
                    assert!(!seen[p]);
                    seen[p] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
            assert_eq!(t.width(t.levels() - 1), 1);
            assert!(t.node_count() < 2 * (gaps + 1) + ceil_log2(gaps + 1) as usize);
        }
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!([1, 2, 3, 4, 5, 8, 9].map(ceil_log2), [0, 1, 2, 2, 3, 3, 4]);
    }
}
