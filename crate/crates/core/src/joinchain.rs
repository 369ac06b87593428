//! Join chain enumeration.
//!
//! A join chain for a target set is the union of one simple path per target,
//! all starting at a shared ancestor vertex. Paths are found by DFS on the
//! reversed graph starting from each target, so every vertex reached from all
//! targets is a common ancestor. A target is its own ancestor through the
//! empty path.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::fdg::{EdgeId, Fdg, VertexId};
use crate::schema::{AttrId, AttributeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathLimits {
    pub max_paths_per_target: usize,
    /// Maximum number of edges on a path. `None` means the vertex count.
    pub max_path_length: Option<usize>,
}

impl Default for PathLimits {
    fn default() -> Self {
        Self {
            max_paths_per_target: 10_000,
            max_path_length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplePaths {
    /// End vertex to the paths reaching it, as edge sequences from the start.
    pub by_end: BTreeMap<VertexId, Vec<Vec<EdgeId>>>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JoinChain {
    /// Sorted, duplicate-free.
    pub edges: Vec<EdgeId>,
    pub ancestor: VertexId,
    pub targets: AttributeSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainFamily {
    pub source_set: AttributeSet,
    pub chains: Vec<JoinChain>,
    pub truncated: bool,
}

impl ChainFamily {
    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn edge_sets(&self) -> Vec<Vec<EdgeId>> {
        self.chains.iter().map(|c| c.edges.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("target attribute #{0} is not a vertex of the graph")]
    UnknownTarget(u32),
    #[error("empty target set")]
    EmptyTargets,
}

/// All simple paths from `start` in `graph`, keyed by end vertex. The start
/// itself is recorded with one empty path.
pub fn enumerate_simple_paths(graph: &Fdg, start: VertexId, limits: &PathLimits) -> SimplePaths {
    let max_len = limits.max_path_length.unwrap_or(graph.vertex_count());
    let budget = limits.max_paths_per_target.saturating_mul(graph.vertex_count().max(1));
    let mut out = SimplePaths {
        by_end: BTreeMap::from([(start, vec![Vec::new()])]),
        truncated: false,
    };
    let mut on_path = vec![false; graph.vertex_count()];
    on_path[start.index()] = true;
    let mut path = Vec::new();
    let mut recorded = 1usize;
    dfs(graph, start, &mut on_path, &mut path, max_len, limits, budget, &mut recorded, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    graph: &Fdg,
    v: VertexId,
    on_path: &mut [bool],
    path: &mut Vec<EdgeId>,
    max_len: usize,
    limits: &PathLimits,
    budget: usize,
    recorded: &mut usize,
    out: &mut SimplePaths,
) {
    if path.len() >= max_len {
        if !graph.out_edges(v).iter().all(|e| on_path[graph.edge(*e).dst.index()]) {
            out.truncated = true;
        }
        return;
    }
    for &e in graph.out_edges(v) {
        let w = graph.edge(e).dst;
        if on_path[w.index()] {
            continue;
        }
        if *recorded >= budget {
            out.truncated = true;
            return;
        }
        path.push(e);
        let list = out.by_end.entry(w).or_default();
        if list.len() < limits.max_paths_per_target {
            list.push(path.clone());
            *recorded += 1;
        } else {
            out.truncated = true;
        }
        on_path[w.index()] = true;
        dfs(graph, w, on_path, path, max_len, limits, budget, recorded, out);
        on_path[w.index()] = false;
        path.pop();
    }
}

fn target_vertices(fdg: &Fdg, targets: &AttributeSet) -> Result<Vec<VertexId>, ChainError> {
    if targets.is_empty() {
        return Err(ChainError::EmptyTargets);
    }
    targets
        .iter()
        .map(|a: AttrId| fdg.attr_vertex(a).ok_or(ChainError::UnknownTarget(a.0)))
        .collect()
}

/// Vertices from which every target is reachable (a target counts for itself).
pub fn common_ancestors(fdg: &Fdg, targets: &AttributeSet) -> Result<Vec<VertexId>, ChainError> {
    let tv = target_vertices(fdg, targets)?;
    let rev = fdg.reverse_graph();
    let mut common: Option<BTreeSet<VertexId>> = None;
    for t in tv {
        let mut r = rev.reachable_from(t);
        r.insert(t);
        common = Some(match common {
            None => r,
            Some(c) => c.intersection(&r).copied().collect(),
        });
    }
    Ok(common.unwrap_or_default().into_iter().collect())
}

fn bitset(edges: &[EdgeId], words: usize) -> Vec<u64> {
    let mut b = vec![0u64; words];
    for e in edges {
        b[e.index() / 64] |= 1 << (e.index() % 64);
    }
    b
}

fn bits_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

/// Drop duplicate edge sets (first wins) and every set that strictly
/// contains another. Input order is preserved among survivors.
pub fn minimal_edge_sets<T, F>(items: Vec<T>, edges_of: F, edge_count: usize) -> Vec<T>
where
    F: Fn(&T) -> &[EdgeId],
{
    let words = edge_count.div_ceil(64).max(1);
    let mut seen = BTreeSet::new();
    let items: Vec<T> = items
        .into_iter()
        .filter(|c| seen.insert(edges_of(c).to_vec()))
        .collect();
    let bits: Vec<Vec<u64>> = items.iter().map(|c| bitset(edges_of(c), words)).collect();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| edges_of(&items[i]).len());
    let mut keep = vec![false; items.len()];
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let len = edges_of(&items[i]).len();
        let dominated = kept
            .iter()
            .any(|&k| edges_of(&items[k]).len() < len && bits_subset(&bits[k], &bits[i]));
        if !dominated {
            keep[i] = true;
            kept.push(i);
        }
    }
    items
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// Enumerate the join chains of `targets`.
pub fn join_chains(
    fdg: &Fdg,
    targets: &AttributeSet,
    limits: &PathLimits,
) -> Result<ChainFamily, ChainError> {
    let tv = target_vertices(fdg, targets)?;
    let rev = fdg.reverse_graph();
    let mut truncated = false;
    let per_target: Vec<SimplePaths> = tv
        .iter()
        .map(|&t| {
            let p = enumerate_simple_paths(&rev, t, limits);
            truncated |= p.truncated;
            p
        })
        .collect();

    let mut ancestors: BTreeSet<VertexId> = per_target[0].by_end.keys().copied().collect();
    for p in &per_target[1..] {
        ancestors.retain(|v| p.by_end.contains_key(v));
    }

    let mut candidates: Vec<JoinChain> = Vec::new();
    for &anc in &ancestors {
        let lists: Vec<&Vec<Vec<EdgeId>>> = per_target.iter().map(|p| &p.by_end[&anc]).collect();
        let mut idx = vec![0usize; lists.len()];
        let mut produced = 0usize;
        loop {
            if produced >= limits.max_paths_per_target {
                truncated = true;
                break;
            }
            let edges: BTreeSet<EdgeId> = lists
                .iter()
                .zip(&idx)
                .flat_map(|(l, &i)| l[i].iter().copied())
                .collect();
            candidates.push(JoinChain {
                edges: edges.into_iter().collect(),
                ancestor: anc,
                targets: targets.clone(),
            });
            produced += 1;
            let mut k = lists.len();
            let exhausted = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < lists[k].len() {
                    break false;
                }
                idx[k] = 0;
            };
            if exhausted {
                break;
            }
        }
    }

    let chains = minimal_edge_sets(candidates, |c| &c.edges, fdg.edge_count());
    Ok(ChainFamily {
        source_set: targets.clone(),
        chains,
        truncated,
    })
}
