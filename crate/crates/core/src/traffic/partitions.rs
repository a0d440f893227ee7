//! Set partitions of vertex sets and their restricted variants.
//!
//! Partitions are enumerated through restricted-growth strings, so every
//! partition of an n-set appears exactly once and the stream is ordered
//! deterministically. Enumerators refuse (rather than truncate) when the
//! vertex count exceeds the configured cap, since Bell numbers explode.

use super::{ColoredComponent, GraphMonomial};
use crate::error::{CoreError, Result};

/// Hard default on the size of vertex sets whose partitions we enumerate.
pub const DEFAULT_PARTITION_CAP: usize = 10;

/// A set partition of `{0, .., n-1}`. Blocks are sorted internally and by
/// smallest element, so equal partitions compare equal structurally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
    /// block_index[v] = index of the block containing v.
    block_index: Vec<usize>,
}

impl VertexPartition {
    /// The all-singletons partition.
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            blocks: (0..n).map(|v| vec![v]).collect(),
            block_index: (0..n).collect(),
        }
    }

    /// Build from explicit blocks; they must be disjoint, nonempty, and cover
    /// `{0, .., n-1}`.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut sorted: Vec<Vec<usize>> = Vec::with_capacity(blocks.len());
        for mut block in blocks {
            if block.is_empty() {
                return Err(CoreError::Param("empty block in partition".into()));
            }
            block.sort_unstable();
            for &v in &block {
                if v >= n {
                    return Err(CoreError::Param(format!("vertex {v} out of range")));
                }
                if seen[v] {
                    return Err(CoreError::Param(format!("vertex {v} appears twice")));
                }
                seen[v] = true;
            }
            sorted.push(block);
        }
        if seen.iter().any(|&s| !s) {
            return Err(CoreError::Param("partition does not cover the vertex set".into()));
        }
        sorted.sort_by_key(|b| b[0]);
        let mut block_index = vec![0; n];
        for (k, block) in sorted.iter().enumerate() {
            for &v in block {
                block_index[v] = k;
            }
        }
        Ok(Self { n, blocks: sorted, block_index })
    }

    /// Build from a restricted-growth string: `rgs[v]` is the block of v and
    /// each new block id is one past the largest id seen so far.
    fn from_rgs(rgs: &[usize]) -> Self {
        let n_blocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); n_blocks];
        for (v, &b) in rgs.iter().enumerate() {
            blocks[b].push(v);
        }
        Self { n: rgs.len(), blocks, block_index: rgs.to_vec() }
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.block_index[v]
    }

    pub fn is_identity(&self) -> bool {
        self.blocks.len() == self.n
    }
}

/// Stream of every set partition of an n-set, in restricted-growth order.
#[derive(Debug)]
pub struct PartitionIter {
    rgs: Vec<usize>,
    max_prefix: Vec<usize>,
    done: bool,
}

impl Iterator for PartitionIter {
    type Item = VertexPartition;

    fn next(&mut self) -> Option<VertexPartition> {
        if self.done {
            return None;
        }
        let out = VertexPartition::from_rgs(&self.rgs);
        // Advance: find the rightmost position that can still grow.
        let n = self.rgs.len();
        let mut i = n;
        loop {
            if i == 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] <= self.max_prefix[i] {
                self.rgs[i] += 1;
                // Positions to the right reset to block 0; their prefix max
                // is now fixed by everything up to and including position i.
                let m = self.max_prefix[i].max(self.rgs[i]);
                for k in i + 1..n {
                    self.rgs[k] = 0;
                    self.max_prefix[k] = m;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Enumerate every set partition of an n-set (count = n-th Bell number).
/// Refuses when `n` exceeds `cap`.
pub fn enumerate_partitions(n: usize, cap: usize) -> Result<PartitionIter> {
    if n == 0 {
        return Err(CoreError::Param("cannot partition an empty vertex set".into()));
    }
    if n > cap {
        return Err(CoreError::CapExceeded(format!(
            "partition enumeration for {n} vertices exceeds cap {cap}"
        )));
    }
    Ok(PartitionIter { rgs: vec![0; n], max_prefix: vec![0; n], done: false })
}

/// Bell numbers via the Bell-triangle recurrence; independent oracle for the
/// partition stream's count.
pub fn bell_number(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("row nonempty"));
        for &v in &row {
            let last = *next.last().expect("next nonempty");
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// Partitions of a monomial's vertices whose blocks contain at most one
/// vertex from each colored component. The all-singletons partition is
/// included exactly when `include_identity` is set.
pub fn enumerate_amalgamations(
    g: &GraphMonomial,
    components: &[ColoredComponent],
    include_identity: bool,
    cap: usize,
) -> Result<Vec<VertexPartition>> {
    let n = g.graph.n_vertices();
    // membership[v] = sorted component ids containing v (at most one per label).
    let mut membership: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, comp) in components.iter().enumerate() {
        for &v in &comp.vertices {
            membership[v].push(c);
        }
    }
    let mut out = Vec::new();
    for pi in enumerate_partitions(n, cap)? {
        if !include_identity && pi.is_identity() {
            continue;
        }
        let admissible = pi.blocks().iter().all(|block| {
            let mut seen: Vec<usize> = Vec::new();
            for &v in block {
                for &c in &membership[v] {
                    if seen.contains(&c) {
                        return false;
                    }
                    seen.push(c);
                }
            }
            true
        });
        if admissible {
            out.push(pi);
        }
    }
    Ok(out)
}

/// Merge amalgamations between two disjoint vertex sets: partitions of
/// `{0,..,n1+n2-1}` (second set shifted by n1) whose blocks are singletons or
/// cross pairs, with at least one cross pair. These are exactly the nonempty
/// partial matchings between the two sides.
pub fn merge_amalgamations(n1: usize, n2: usize) -> Vec<VertexPartition> {
    let n = n1 + n2;
    let mut out = Vec::new();
    for matching in partial_matchings(n1, n2) {
        if matching.is_empty() {
            continue;
        }
        out.push(matching_to_partition(n, n1, &matching));
    }
    out
}

/// Amalgamations of a glued monomial `h . h2` whose blocks take at most one
/// vertex from each of the two factors; the identified root belongs to both,
/// so it always stays a singleton. Uses `glue_at_root`'s vertex layout and
/// includes the all-singletons partition.
pub fn cross_amalgamations(h: &GraphMonomial, h2: &GraphMonomial) -> Vec<VertexPartition> {
    let n1 = h.graph.n_vertices();
    let n2 = h2.graph.n_vertices();
    let n = n1 + n2 - 1;
    // Non-root vertices of each side, in glued ids.
    let side1: Vec<usize> = (0..n1).filter(|&v| v != h.v_in).collect();
    let side2: Vec<usize> = (n1..n).collect();
    let mut out = Vec::new();
    for matching in partial_matchings(side1.len(), side2.len()) {
        let pairs: Vec<(usize, usize)> =
            matching.iter().map(|&(i, j)| (side1[i], side2[j])).collect();
        let mut in_pair = vec![false; n];
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for &(u, w) in &pairs {
            in_pair[u] = true;
            in_pair[w] = true;
            blocks.push(vec![u, w]);
        }
        for v in 0..n {
            if !in_pair[v] {
                blocks.push(vec![v]);
            }
        }
        out.push(VertexPartition::from_blocks(n, blocks).expect("matching blocks are disjoint"));
    }
    out
}

/// All partial matchings between `{0,..,n1-1}` and `{0,..,n2-1}`, the empty
/// matching first.
pub fn partial_matchings(n1: usize, n2: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut used = vec![false; n2];
    let mut current = Vec::new();
    fn recurse(
        v: usize,
        n1: usize,
        n2: usize,
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if v == n1 {
            out.push(current.clone());
            return;
        }
        // v stays unmatched...
        recurse(v + 1, n1, n2, used, current, out);
        // ...or pairs with any unused partner.
        for w in 0..n2 {
            if !used[w] {
                used[w] = true;
                current.push((v, w));
                recurse(v + 1, n1, n2, used, current, out);
                current.pop();
                used[w] = false;
            }
        }
    }
    recurse(0, n1, n2, &mut used, &mut current, &mut out);
    out
}

fn matching_to_partition(n: usize, shift: usize, matching: &[(usize, usize)]) -> VertexPartition {
    let mut in_pair = vec![false; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &(u, w) in matching {
        in_pair[u] = true;
        in_pair[shift + w] = true;
        blocks.push(vec![u, shift + w]);
    }
    for v in 0..n {
        if !in_pair[v] {
            blocks.push(vec![v]);
        }
    }
    VertexPartition::from_blocks(n, blocks).expect("matching blocks are disjoint")
}
