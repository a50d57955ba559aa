//! Function Merkle hash trees: one per subdomain, over the sorted function
//! list bracketed by the MIN and MAX sentinels.
//!
//! Layers are built left to right, pairing neighbours; an odd trailing node
//! is carried unchanged into the next layer. Links between nodes are
//! positional: the parent of `(layer, i)` is `(layer + 1, i / 2)` and its
//! sibling is `i ^ 1` when that index exists.

use thiserror::Error;

use crate::hash::{CountingHasher, Digest};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FmhTree {
    layers: Vec<Vec<Digest>>,
}

/// Position of a co-path digest relative to the path it completes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoSide {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoPathEntry {
    pub side: CoSide,
    pub digest: Digest,
}

/// A node handle with its parent/child links resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FmhNode {
    pub layer: usize,
    pub index: usize,
    pub h: Digest,
    pub parent: Option<(usize, usize)>,
    pub left: Option<(usize, usize)>,
    pub right: Option<(usize, usize)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FoldError {
    #[error("leaf range {first}..={last} does not fit {count} leaves")]
    BadRange {
        first: usize,
        last: usize,
        count: usize,
    },
    #[error("expected {expected} leaf digests, got {got}")]
    LeafCount { expected: usize, got: usize },
    #[error("co-path is missing an entry")]
    MissingEntry,
    #[error("co-path entry has the wrong side")]
    WrongSide,
    #[error("co-path has {0} unused entries")]
    Trailing(usize),
}

impl FmhTree {
    /// Builds the tree from leaf digests (MIN, records ascending, MAX).
    pub fn from_leaves(leaves: Vec<Digest>, hasher: &CountingHasher<'_>) -> Self {
        assert!(!leaves.is_empty(), "an FMH tree needs at least one leaf");
        let mut layers = vec![leaves];
        while layers.last().map_or(0, Vec::len) > 1 {
            let prev = layers.last().unwrap();
            let next: Vec<Digest> = prev
                .chunks(2)
                .map(|pair| match pair {
                    [l, r] => hasher.combine(l, r),
                    [carried] => *carried,
                    _ => unreachable!(),
                })
                .collect();
            layers.push(next);
        }
        FmhTree { layers }
    }

    pub fn root(&self) -> Digest {
        self.layers.last().unwrap()[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.layers[0].len()
    }

    pub fn leaf(&self, index: usize) -> Digest {
        self.layers[0][index]
    }

    pub fn height(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<Digest>] {
        &self.layers
    }

    /// Count of nodes with two children.
    pub fn internal_count(&self) -> usize {
        self.layers.iter().map(|l| l.len() / 2).sum()
    }

    pub fn node(&self, layer: usize, index: usize) -> FmhNode {
        let len = self.layers[layer].len();
        assert!(index < len);
        let parent = (layer + 1 < self.layers.len()).then_some((layer + 1, index / 2));
        let (left, right) = if layer == 0 {
            (None, None)
        } else {
            let below = self.layers[layer - 1].len();
            let l = 2 * index;
            if l + 1 < below {
                (Some((layer - 1, l)), Some((layer - 1, l + 1)))
            } else {
                // Carried node: same node one layer down.
                (Some((layer - 1, l)), None)
            }
        };
        FmhNode {
            layer,
            index,
            h: self.layers[layer][index],
            parent,
            left,
            right,
        }
    }

    /// Sibling digests needed to recompute the root from leaves `first..=last`.
    ///
    /// These are the siblings met while walking from both boundary leaves up
    /// to the root, skipping siblings that lie inside the range itself.
    pub fn range_proof(&self, first: usize, last: usize) -> Vec<CoPathEntry> {
        assert!(first <= last && last < self.leaf_count());
        let mut out = Vec::new();
        let (mut lo, mut hi) = (first, last);
        for layer in &self.layers[..self.layers.len() - 1] {
            if lo % 2 == 1 {
                out.push(CoPathEntry {
                    side: CoSide::Left,
                    digest: layer[lo - 1],
                });
            }
            if hi % 2 == 0 && hi + 1 < layer.len() {
                out.push(CoPathEntry {
                    side: CoSide::Right,
                    digest: layer[hi + 1],
                });
            }
            lo /= 2;
            hi /= 2;
        }
        out
    }

    /// Nodes touched when walking both boundary paths to the root.
    pub fn path_nodes(&self, first: usize, last: usize) -> usize {
        let (mut lo, mut hi) = (first, last);
        let mut n = 0;
        for _ in 0..self.layers.len() {
            n += if lo == hi { 1 } else { 2 };
            lo /= 2;
            hi /= 2;
        }
        n
    }
}

/// Recomputes the root from a contiguous run of leaf digests and its co-path.
pub fn fold_range(
    hasher: &CountingHasher<'_>,
    leaf_count: usize,
    first: usize,
    leaves: &[Digest],
    proof: &[CoPathEntry],
) -> Result<Digest, FoldError> {
    if leaves.is_empty() || first + leaves.len() > leaf_count {
        return Err(FoldError::BadRange {
            first,
            last: first + leaves.len().saturating_sub(1),
            count: leaf_count,
        });
    }
    let mut lo = first;
    let mut hi = first + leaves.len() - 1;
    let mut count = leaf_count;
    let mut cur: Vec<Digest> = leaves.to_vec();
    let mut entries = proof.iter();
    while count > 1 {
        if lo % 2 == 1 {
            let e = entries.next().ok_or(FoldError::MissingEntry)?;
            if e.side != CoSide::Left {
                return Err(FoldError::WrongSide);
            }
            cur.insert(0, e.digest);
            lo -= 1;
        }
        if hi.is_multiple_of(2) && hi + 1 < count {
            let e = entries.next().ok_or(FoldError::MissingEntry)?;
            if e.side != CoSide::Right {
                return Err(FoldError::WrongSide);
            }
            cur.push(e.digest);
            hi += 1;
        }
        cur = cur
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => hasher.combine(l, r),
                [carried] => *carried,
                _ => unreachable!(),
            })
            .collect();
        lo /= 2;
        hi /= 2;
        count = count.div_ceil(2);
    }
    let rest = entries.count();
    if rest > 0 {
        return Err(FoldError::Trailing(rest));
    }
    Ok(cur[0])
}
