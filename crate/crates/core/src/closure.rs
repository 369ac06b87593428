//! FD normalization, attribute-set closure and identifiers.

use std::collections::BTreeSet;

use crate::schema::{AttrId, AttributeSet, FunctionalDependency};

/// A single decomposed dependency `lhs -> rhs`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimpleFd {
    pub lhs: AttributeSet,
    pub rhs: AttrId,
    pub probabilistic: bool,
}

/// FDs with singleton right-hand sides.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecomposedFdSet {
    pub fds: Vec<SimpleFd>,
    /// Index of the input FD each entry was split from.
    pub origin: Vec<usize>,
}

impl DecomposedFdSet {
    pub fn len(&self) -> usize {
        self.fds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fds.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SimpleFd> {
        self.fds.iter()
    }

    /// Keep only FDs whose attributes all lie inside `scope`.
    pub fn restricted_to(&self, scope: &AttributeSet) -> DecomposedFdSet {
        let mut out = DecomposedFdSet::default();
        for (fd, &o) in self.fds.iter().zip(&self.origin) {
            if scope.contains(fd.rhs) && fd.lhs.is_subset(scope) {
                out.fds.push(fd.clone());
                out.origin.push(o);
            }
        }
        out
    }
}

/// Split every FD into singleton-rhs FDs, dropping duplicates and reflexive
/// parts. The first occurrence keeps its origin.
pub fn decompose_fds(fds: &[FunctionalDependency]) -> DecomposedFdSet {
    let mut seen = BTreeSet::new();
    let mut out = DecomposedFdSet::default();
    for (i, fd) in fds.iter().enumerate() {
        for y in fd.rhs.iter() {
            if fd.lhs.contains(y) || !seen.insert((fd.lhs.clone(), y)) {
                continue;
            }
            out.fds.push(SimpleFd {
                lhs: fd.lhs.clone(),
                rhs: y,
                probabilistic: fd.probabilistic,
            });
            out.origin.push(i);
        }
    }
    out
}

/// Armstrong closure of `start`.
pub fn attribute_closure(start: &AttributeSet, fds: &DecomposedFdSet) -> AttributeSet {
    let mut closed: BTreeSet<AttrId> = start.iter().collect();
    let mut used = vec![false; fds.fds.len()];
    loop {
        let mut changed = false;
        for (i, fd) in fds.fds.iter().enumerate() {
            if used[i] || !fd.lhs.iter().all(|a| closed.contains(&a)) {
                continue;
            }
            used[i] = true;
            changed |= closed.insert(fd.rhs);
        }
        if !changed {
            break;
        }
    }
    closed.into_iter().collect()
}

/// Candidates that determine `attr` without containing it.
pub fn identifiers_of(
    attr: AttrId,
    fds: &DecomposedFdSet,
    candidates: &[AttributeSet],
) -> Vec<AttributeSet> {
    candidates
        .iter()
        .filter(|c| !c.contains(attr) && attribute_closure(c, fds).contains(attr))
        .cloned()
        .collect()
}

/// Minimal subsets `X` of `within` (with `attr ∉ X`) whose closure contains
/// `attr`. Exhaustive over subsets; `within` is expected to be small.
pub fn minimal_identifiers(
    attr: AttrId,
    fds: &DecomposedFdSet,
    within: &AttributeSet,
) -> Vec<AttributeSet> {
    let pool: Vec<AttrId> = within.iter().filter(|a| *a != attr).collect();
    assert!(pool.len() < 32, "identifier search over {} attributes", pool.len());
    let mut masks: Vec<u32> = (0..1u32 << pool.len()).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut found: Vec<u32> = Vec::new();
    for m in masks {
        if found.iter().any(|f| f & m == *f) {
            continue;
        }
        let set: AttributeSet = (0..pool.len())
            .filter(|i| m >> i & 1 == 1)
            .map(|i| pool[i])
            .collect();
        if attribute_closure(&set, fds).contains(attr) {
            found.push(m);
        }
    }
    let mut out: Vec<AttributeSet> = found
        .into_iter()
        .map(|m| {
            (0..pool.len())
                .filter(|i| m >> i & 1 == 1)
                .map(|i| pool[i])
                .collect()
        })
        .collect();
    out.sort();
    out
}
