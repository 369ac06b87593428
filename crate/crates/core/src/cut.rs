//! Cut selection over forbidden join chains.
//!
//! The greedy rule sorts edges once by (security count descending, number of
//! attributes on both endpoints ascending, edge id ascending) and walks that
//! list, taking an edge whenever it still lies on an unmarked chain. The exact
//! oracle searches subsets by increasing size and is meant for small inputs.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::fdg::{EdgeId, EdgeKind, Fdg};
use crate::joinchain::ChainFamily;
use crate::schema::AttributeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeScore {
    pub edge: EdgeId,
    pub security_count: usize,
    pub side_attr_count: usize,
}

/// Selected edges in selection order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CutSet {
    pub edges: Vec<EdgeId>,
}

impl CutSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.contains(&e)
    }

    pub fn sorted(&self) -> Vec<EdgeId> {
        let mut v = self.edges.clone();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{edges} distinct edges exceed the oracle bound of {bound}")]
    TooManyEdges { edges: usize, bound: usize },
    #[error("chain #{0} is empty and cannot be hit")]
    EmptyChain(usize),
}

/// Every chain of every family, in family order.
pub fn family_chains(families: &[ChainFamily]) -> Vec<Vec<EdgeId>> {
    families.iter().flat_map(|f| f.edge_sets()).collect()
}

/// Per-edge chain membership counts, one entry per FDG edge in id order.
pub fn security_counts<C: AsRef<[EdgeId]>>(chains: &[C], fdg: &Fdg) -> Vec<EdgeScore> {
    let mut counts = vec![0usize; fdg.edge_count()];
    for c in chains {
        for e in c.as_ref() {
            counts[e.index()] += 1;
        }
    }
    fdg.edge_ids()
        .map(|e| {
            let edge = fdg.edge(e);
            EdgeScore {
                edge: e,
                security_count: counts[e.index()],
                side_attr_count: fdg.vertex(edge.src).attrs.len() + fdg.vertex(edge.dst).attrs.len(),
            }
        })
        .collect()
}

/// Greedy hitting set over chains of `u32` elements.
///
/// `order` lists candidate elements in priority order. An element is taken
/// iff it lies on some chain not yet hit. Returns the picks in order.
pub fn greedy_hitting_set(chains: &[Vec<u32>], order: &[u32]) -> Vec<u32> {
    let max = chains.iter().flatten().copied().max().map_or(0, |m| m as usize + 1);
    let mut member_of: Vec<Vec<usize>> = vec![Vec::new(); max];
    for (i, c) in chains.iter().enumerate() {
        for &e in c {
            member_of[e as usize].push(i);
        }
    }
    let mut marked = vec![false; chains.len()];
    let mut picked = Vec::new();
    for &e in order {
        let Some(on) = member_of.get(e as usize) else {
            continue;
        };
        if on.iter().any(|&c| !marked[c]) {
            picked.push(e);
            for &c in on {
                marked[c] = true;
            }
        }
    }
    picked
}

/// Edge processing order of the greedy cut. Union edges are excluded.
pub fn greedy_order<C: AsRef<[EdgeId]>>(chains: &[C], fdg: &Fdg) -> Vec<EdgeScore> {
    let mut scores: Vec<EdgeScore> = security_counts(chains, fdg)
        .into_iter()
        .filter(|s| s.security_count > 0 && fdg.edge(s.edge).kind != EdgeKind::Union)
        .collect();
    scores.sort_by_key(|s| (Reverse(s.security_count), s.side_attr_count, s.edge));
    scores
}

pub fn greedy_cut<C: AsRef<[EdgeId]>>(chains: &[C], fdg: &Fdg) -> CutSet {
    let order: Vec<u32> = greedy_order(chains, fdg).iter().map(|s| s.edge.0).collect();
    let raw: Vec<Vec<u32>> = chains
        .iter()
        .map(|c| c.as_ref().iter().map(|e| e.0).collect())
        .collect();
    CutSet {
        edges: greedy_hitting_set(&raw, &order).into_iter().map(EdgeId).collect(),
    }
}

pub fn greedy_cut_families(families: &[ChainFamily], fdg: &Fdg) -> CutSet {
    greedy_cut(&family_chains(families), fdg)
}

pub fn is_hitting_set<C: AsRef<[EdgeId]>>(cut: &CutSet, chains: &[C]) -> bool {
    let s: BTreeSet<EdgeId> = cut.edges.iter().copied().collect();
    chains.iter().all(|c| c.as_ref().iter().any(|e| s.contains(e)))
}

/// Minimum-cardinality hitting set, lexicographically least among the
/// minimum ones (comparing sorted element lists).
pub fn minimum_hitting_set(chains: &[Vec<u32>], bound: usize) -> Result<Vec<u32>, OracleError> {
    if let Some(i) = chains.iter().position(|c| c.is_empty()) {
        return Err(OracleError::EmptyChain(i));
    }
    let universe: Vec<u32> = chains
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = universe.len();
    if n > bound || n > 63 {
        return Err(OracleError::TooManyEdges { edges: n, bound });
    }
    let masks: Vec<u64> = chains
        .iter()
        .map(|c| {
            c.iter()
                .map(|e| 1u64 << universe.binary_search(e).unwrap())
                .fold(0, |a, b| a | b)
        })
        .collect();
    for k in 0..=n {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let m = idx.iter().fold(0u64, |a, &i| a | 1 << i);
            if masks.iter().all(|c| c & m != 0) {
                return Ok(idx.iter().map(|&i| universe[i]).collect());
            }
            let mut j = k;
            let advanced = loop {
                if j == 0 {
                    break false;
                }
                j -= 1;
                if idx[j] < n - k + j {
                    idx[j] += 1;
                    for t in j + 1..k {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break true;
                }
            };
            if !advanced {
                break;
            }
        }
    }
    unreachable!("the full universe hits every non-empty chain")
}

/// Exact minimum cut over all chains, ignoring union edges.
pub fn minimum_cut_oracle<C: AsRef<[EdgeId]>>(
    chains: &[C],
    fdg: &Fdg,
    bound: usize,
) -> Result<CutSet, OracleError> {
    let raw: Vec<Vec<u32>> = chains
        .iter()
        .map(|c| {
            c.as_ref()
                .iter()
                .filter(|e| fdg.edge(**e).kind != EdgeKind::Union)
                .map(|e| e.0)
                .collect()
        })
        .collect();
    Ok(CutSet {
        edges: minimum_hitting_set(&raw, bound)?.into_iter().map(EdgeId).collect(),
    })
}

/// Endpoint attribute unions of the cut edges, deduplicated in cut order.
pub fn edges_to_forbidden_sets(cut: &CutSet, fdg: &Fdg) -> Vec<AttributeSet> {
    let mut seen = BTreeSet::new();
    cut.edges
        .iter()
        .map(|&e| fdg.edge_attrs(e))
        .filter(|s| seen.insert(s.clone()))
        .collect()
}
