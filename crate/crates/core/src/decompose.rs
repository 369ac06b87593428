//! Maximal-fragment decomposition of relations.
//!
//! The maximal subsets of a relation that contain no forbidden set are the
//! complements of the minimal transversals of the forbidden sets that fit in
//! the relation, so the power set is never built.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{minimal_identifiers, DecomposedFdSet, SimpleFd};
use crate::schema::{AttrId, AttributeSet, Relation, Schema};

pub const DEFAULT_WIDTH_BOUND: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fragment {
    pub name: String,
    pub source: String,
    pub attrs: AttributeSet,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecomposedSchema {
    pub fragments: Vec<Fragment>,
    pub new_forbidden: Vec<AttributeSet>,
    pub lost_dependencies: Vec<SimpleFd>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("relation `{relation}` has {width} attributes, above the width bound of {bound}")]
    TooWide {
        relation: String,
        width: usize,
        bound: usize,
    },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid JSON: {0}")]
    Json(String),
}

fn to_mask(set: &AttributeSet, attrs: &[AttrId]) -> Option<u64> {
    set.iter().try_fold(0u64, |m, a| {
        attrs.binary_search(&a).ok().map(|i| m | 1 << i)
    })
}

/// Minimal transversals of `edges` (Berge's algorithm).
pub fn minimal_transversals(edges: &[u64]) -> Vec<u64> {
    let mut trs: Vec<u64> = vec![0];
    for &e in edges {
        let mut next: Vec<u64> = Vec::new();
        for &t in &trs {
            if t & e != 0 {
                next.push(t);
            } else {
                let mut bits = e;
                while bits != 0 {
                    let b = bits & bits.wrapping_neg();
                    next.push(t | b);
                    bits ^= b;
                }
            }
        }
        next.sort_by_key(|m| (m.count_ones(), *m));
        next.dedup();
        let mut minimal: Vec<u64> = Vec::with_capacity(next.len());
        for m in next {
            if !minimal.iter().any(|k| k & m == *k) {
                minimal.push(m);
            }
        }
        trs = minimal;
    }
    trs
}

/// Maximal subsets of `attrs` containing none of `forbidden`, sorted.
pub fn maximal_fragments(
    attrs: &AttributeSet,
    forbidden: &[AttributeSet],
) -> Vec<AttributeSet> {
    let ids = attrs.as_slice();
    let edges: Vec<u64> = forbidden.iter().filter_map(|f| to_mask(f, ids)).collect();
    let full = if ids.len() == 64 { u64::MAX } else { (1u64 << ids.len()) - 1 };
    let mut out: Vec<AttributeSet> = minimal_transversals(&edges)
        .into_iter()
        .map(|t| {
            let keep = full & !t;
            (0..ids.len()).filter(|i| keep >> i & 1 == 1).map(|i| ids[i]).collect()
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn name_fragments(relation: &Relation, parts: Vec<AttributeSet>) -> Vec<Fragment> {
    if parts.len() == 1 && parts[0] == relation.attributes {
        return vec![Fragment {
            name: relation.name.clone(),
            source: relation.name.clone(),
            attrs: relation.attributes.clone(),
        }];
    }
    parts
        .into_iter()
        .enumerate()
        .map(|(i, attrs)| Fragment {
            name: format!("{}{}", relation.name, i + 1),
            source: relation.name.clone(),
            attrs,
        })
        .collect()
}

fn check_width(relation: &Relation, bound: usize) -> Result<(), DecomposeError> {
    let width = relation.attributes.len();
    if width > bound || width > 64 {
        return Err(DecomposeError::TooWide {
            relation: relation.name.clone(),
            width,
            bound,
        });
    }
    Ok(())
}

/// Maximal fragments of one relation under `forbidden`.
pub fn decompose_relation(
    relation: &Relation,
    forbidden: &[AttributeSet],
    width_bound: usize,
) -> Result<Vec<Fragment>, DecomposeError> {
    check_width(relation, width_bound)?;
    Ok(name_fragments(relation, maximal_fragments(&relation.attributes, forbidden)))
}

/// Decompose every relation under `forbidden`, recording lost FDs.
pub fn decompose_schema(
    schema: &Schema,
    forbidden: &[AttributeSet],
    fds: &DecomposedFdSet,
    width_bound: usize,
) -> Result<DecomposedSchema, DecomposeError> {
    let mut fragments = Vec::new();
    for r in &schema.relations {
        fragments.extend(decompose_relation(r, forbidden, width_bound)?);
    }
    let lost_dependencies = lost_dependencies(schema, &fragments, fds);
    Ok(DecomposedSchema {
        fragments,
        new_forbidden: forbidden.to_vec(),
        lost_dependencies,
    })
}

/// Baseline decomposition that also separates every forbidden attribute from
/// each of its identifiers inside the relation.
pub fn strong_cut_decompose(
    schema: &Schema,
    forbidden: &[AttributeSet],
    fds: &DecomposedFdSet,
    width_bound: usize,
) -> Result<DecomposedSchema, DecomposeError> {
    let sensitive: BTreeSet<AttrId> = forbidden.iter().flat_map(|f| f.iter()).collect();
    let mut fragments = Vec::new();
    let mut added: Vec<AttributeSet> = Vec::new();
    for r in &schema.relations {
        check_width(r, width_bound)?;
        let mut sets: Vec<AttributeSet> = forbidden
            .iter()
            .filter(|f| f.is_subset(&r.attributes))
            .cloned()
            .collect();
        for a in r.attributes.iter().filter(|a| sensitive.contains(a)) {
            for x in minimal_identifiers(a, fds, &r.attributes) {
                let v = x.union(&AttributeSet::singleton(a));
                if !added.contains(&v) && !forbidden.contains(&v) {
                    added.push(v.clone());
                }
                sets.push(v);
            }
        }
        fragments.extend(name_fragments(r, maximal_fragments(&r.attributes, &sets)));
    }
    let mut new_forbidden = forbidden.to_vec();
    new_forbidden.extend(added);
    let lost_dependencies = lost_dependencies(schema, &fragments, fds);
    Ok(DecomposedSchema {
        fragments,
        new_forbidden,
        lost_dependencies,
    })
}

/// FDs whose attributes sat together in some relation but in none of that
/// relation's fragments.
pub fn lost_dependencies(
    schema: &Schema,
    fragments: &[Fragment],
    fds: &DecomposedFdSet,
) -> Vec<SimpleFd> {
    fds.iter()
        .filter(|fd| {
            let need = fd.lhs.union(&AttributeSet::singleton(fd.rhs));
            schema.relations.iter().any(|r| {
                need.is_subset(&r.attributes)
                    && !fragments
                        .iter()
                        .any(|f| f.source == r.name && need.is_subset(&f.attrs))
            })
        })
        .cloned()
        .collect()
}

pub fn dependency_loss(schema: &Schema, result: &DecomposedSchema, fds: &DecomposedFdSet) -> usize {
    lost_dependencies(schema, &result.fragments, fds).len()
}

// ---------------------------------------------------------------------------
// JSON and SQL output

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawFragment {
    pub name: String,
    pub source: String,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLostFd {
    pub lhs: Vec<String>,
    pub rhs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDecomposition {
    pub fragments: Vec<RawFragment>,
    pub new_forbidden: Vec<Vec<String>>,
    pub lost_fds: Vec<RawLostFd>,
}

impl DecomposedSchema {
    pub fn to_raw(&self, schema: &Schema) -> RawDecomposition {
        RawDecomposition {
            fragments: self
                .fragments
                .iter()
                .map(|f| RawFragment {
                    name: f.name.clone(),
                    source: f.source.clone(),
                    attributes: schema.names_of(&f.attrs),
                })
                .collect(),
            new_forbidden: self.new_forbidden.iter().map(|s| schema.names_of(s)).collect(),
            lost_fds: self
                .lost_dependencies
                .iter()
                .map(|fd| RawLostFd {
                    lhs: schema.names_of(&fd.lhs),
                    rhs: vec![schema.name(fd.rhs).to_string()],
                })
                .collect(),
        }
    }

    pub fn from_raw(raw: &RawDecomposition, schema: &Schema) -> Result<Self, DecomposeError> {
        let set = |names: &[String]| -> Result<AttributeSet, DecomposeError> {
            names
                .iter()
                .map(|n| schema.attr(n).ok_or_else(|| DecomposeError::UnknownAttribute(n.clone())))
                .collect()
        };
        let mut fragments = Vec::with_capacity(raw.fragments.len());
        for f in &raw.fragments {
            if schema.relation(&f.source).is_none() {
                return Err(DecomposeError::UnknownRelation(f.source.clone()));
            }
            fragments.push(Fragment {
                name: f.name.clone(),
                source: f.source.clone(),
                attrs: set(&f.attributes)?,
            });
        }
        let new_forbidden = raw
            .new_forbidden
            .iter()
            .map(|s| set(s))
            .collect::<Result<_, _>>()?;
        let mut lost_dependencies = Vec::new();
        for fd in &raw.lost_fds {
            let rhs = set(&fd.rhs)?;
            if rhs.len() != 1 {
                return Err(DecomposeError::Json("lost FD rhs must be a single attribute".into()));
            }
            let lhs = set(&fd.lhs)?;
            let rhs = rhs.as_slice()[0];
            let probabilistic = schema
                .fds
                .iter()
                .find(|f| f.lhs == lhs && f.rhs.contains(rhs))
                .is_some_and(|f| f.probabilistic);
            lost_dependencies.push(SimpleFd {
                lhs,
                rhs,
                probabilistic,
            });
        }
        Ok(DecomposedSchema {
            fragments,
            new_forbidden,
            lost_dependencies,
        })
    }

    /// One `CREATE VIEW` statement per fragment.
    pub fn to_sql(&self, schema: &Schema) -> String {
        let mut out = String::new();
        for f in &self.fragments {
            out.push_str(&format!(
                "CREATE VIEW {} AS SELECT {} FROM {};\n",
                f.name,
                schema.names_of(&f.attrs).join(", "),
                f.source
            ));
        }
        out
    }
}
