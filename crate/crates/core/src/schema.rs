//! Logical schema and privacy policy model.
//!
//! Attributes are identified by name across the whole schema: two relations
//! that both declare `A` share the same attribute. Names are interned into
//! dense [`AttrId`]s in lexicographic order, so every downstream structure
//! (vertex order, edge order, fragment order) is a pure function of the input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense attribute identifier. Ids follow the lexicographic order of names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrId(pub u32);

impl AttrId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Sorted, duplicate-free set of attributes.
///
/// Ordering is lexicographic over the member ids, which is the order used for
/// FDG vertices and for fragment listings.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeSet(Vec<AttrId>);

impl AttributeSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn singleton(attr: AttrId) -> Self {
        Self(vec![attr])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, attr: AttrId) -> bool {
        self.0.binary_search(&attr).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = AttrId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[AttrId] {
        &self.0
    }

    pub fn is_subset(&self, other: &AttributeSet) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut rest = other.0.iter();
        'outer: for a in &self.0 {
            for b in rest.by_ref() {
                if a == b {
                    continue 'outer;
                }
                if b > a {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn is_strict_subset(&self, other: &AttributeSet) -> bool {
        self.len() < other.len() && self.is_subset(other)
    }

    pub fn union(&self, other: &AttributeSet) -> AttributeSet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn difference(&self, other: &AttributeSet) -> AttributeSet {
        self.iter().filter(|a| !other.contains(*a)).collect()
    }

    pub fn intersection(&self, other: &AttributeSet) -> AttributeSet {
        self.iter().filter(|a| other.contains(*a)).collect()
    }

    pub fn without(&self, attr: AttrId) -> AttributeSet {
        self.iter().filter(|a| *a != attr).collect()
    }

    /// Attribute names in member order.
    pub fn names<'a>(&'a self, names: &'a [String]) -> Vec<&'a str> {
        self.iter().map(|a| names[a.index()].as_str()).collect()
    }

    /// Names concatenated without separator, e.g. `ABCD`.
    pub fn label(&self, names: &[String]) -> String {
        self.names(names).concat()
    }
}

impl FromIterator<AttrId> for AttributeSet {
    fn from_iter<I: IntoIterator<Item = AttrId>>(iter: I) -> Self {
        let mut v: Vec<AttrId> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl<'a> IntoIterator for &'a AttributeSet {
    type Item = AttrId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, AttrId>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionalDependency {
    pub lhs: AttributeSet,
    pub rhs: AttributeSet,
    pub probabilistic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKey {
    pub attributes: AttributeSet,
    pub references: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub attributes: AttributeSet,
    pub primary_key: AttributeSet,
    pub foreign_keys: Vec<ForeignKey>,
}

/// A validated logical schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    attributes: Vec<String>,
    index: BTreeMap<String, AttrId>,
    pub relations: Vec<Relation>,
    pub fds: Vec<FunctionalDependency>,
}

/// Forbidden (security dependent) and required attribute sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Policy {
    pub forbidden: Vec<AttributeSet>,
    pub required: Vec<AttributeSet>,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{location}: empty name")]
    EmptyName { location: String },
    #[error("duplicate relation name `{0}`")]
    DuplicateRelation(String),
    #[error("relation `{relation}`: duplicate attribute `{attribute}`")]
    DuplicateAttribute { relation: String, attribute: String },
    #[error("relation `{0}` has no attributes")]
    EmptyRelation(String),
    #[error("{location}: unknown attribute `{attribute}`")]
    UnknownAttribute { location: String, attribute: String },
    #[error("relation `{0}`: primary key is empty")]
    EmptyPrimaryKey(String),
    #[error("relation `{relation}`: key attribute `{attribute}` is not an attribute of the relation")]
    KeyNotSubset { relation: String, attribute: String },
    #[error("relation `{relation}`: foreign key references unknown relation `{references}`")]
    UnknownReference { relation: String, references: String },
    #[error("{location}: empty attribute set")]
    EmptySet { location: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("{location}: unknown attribute `{attribute}`")]
    UnknownAttribute { location: String, attribute: String },
    #[error("{location}: empty attribute set")]
    EmptySet { location: String },
    #[error("required set {required:?} uses attribute `{attribute}`, which a singleton forbidden set removes from the schema")]
    RequiredUsesRemoved { required: Vec<String>, attribute: String },
}

// ---------------------------------------------------------------------------
// JSON input format

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawForeignKey {
    pub attributes: Vec<String>,
    pub references: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRelation {
    pub name: String,
    pub attributes: Vec<String>,
    pub primary_key: Vec<String>,
    #[serde(default)]
    pub foreign_keys: Vec<RawForeignKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFd {
    pub lhs: Vec<String>,
    pub rhs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilistic: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    #[serde(default)]
    pub forbidden: Vec<Vec<String>>,
    #[serde(default)]
    pub required: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSchema {
    pub relations: Vec<RawRelation>,
    #[serde(default)]
    pub fds: Vec<RawFd>,
    #[serde(default)]
    pub policy: RawPolicy,
}

impl RawSchema {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("raw schema serializes")
    }
}

/// Parse a schema file and resolve both the schema and its policy.
pub fn load(text: &str) -> Result<(Schema, Policy), LoadError> {
    let raw = RawSchema::from_json(text)?;
    let schema = validate_schema(&raw)?;
    let policy = Policy::resolve(&raw.policy, &schema)?;
    Ok((schema, policy))
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

fn check_name(name: &str, location: impl FnOnce() -> String) -> Result<(), SchemaError> {
    if name.trim().is_empty() {
        return Err(SchemaError::EmptyName { location: location() });
    }
    Ok(())
}

/// Validate and intern a raw schema. The `policy` part of `raw` is ignored.
pub fn validate_schema(raw: &RawSchema) -> Result<Schema, SchemaError> {
    let mut rel_names = BTreeSet::new();
    let mut all_attrs = BTreeSet::new();
    for (ri, rel) in raw.relations.iter().enumerate() {
        check_name(&rel.name, || format!("relations[{ri}]"))?;
        if !rel_names.insert(rel.name.as_str()) {
            return Err(SchemaError::DuplicateRelation(rel.name.clone()));
        }
        if rel.attributes.is_empty() {
            return Err(SchemaError::EmptyRelation(rel.name.clone()));
        }
        let mut seen = BTreeSet::new();
        for a in &rel.attributes {
            check_name(a, || format!("relation `{}`", rel.name))?;
            if !seen.insert(a.as_str()) {
                return Err(SchemaError::DuplicateAttribute {
                    relation: rel.name.clone(),
                    attribute: a.clone(),
                });
            }
            all_attrs.insert(a.clone());
        }
    }

    let attributes: Vec<String> = all_attrs.into_iter().collect();
    let index: BTreeMap<String, AttrId> = attributes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), AttrId(i as u32)))
        .collect();
    let lookup = |names: &[String], location: &dyn Fn() -> String| -> Result<AttributeSet, SchemaError> {
        names
            .iter()
            .map(|n| {
                index.get(n).copied().ok_or_else(|| SchemaError::UnknownAttribute {
                    location: location(),
                    attribute: n.clone(),
                })
            })
            .collect()
    };

    let mut relations = Vec::with_capacity(raw.relations.len());
    for rel in &raw.relations {
        let loc = || format!("relation `{}`", rel.name);
        let attrs = lookup(&rel.attributes, &loc)?;
        if rel.primary_key.is_empty() {
            return Err(SchemaError::EmptyPrimaryKey(rel.name.clone()));
        }
        for k in &rel.primary_key {
            if !rel.attributes.contains(k) {
                return Err(SchemaError::KeyNotSubset {
                    relation: rel.name.clone(),
                    attribute: k.clone(),
                });
            }
        }
        let primary_key = lookup(&rel.primary_key, &loc)?;
        let mut foreign_keys = Vec::with_capacity(rel.foreign_keys.len());
        for fk in &rel.foreign_keys {
            if fk.attributes.is_empty() {
                return Err(SchemaError::EmptySet {
                    location: format!("relation `{}` foreign key", rel.name),
                });
            }
            for a in &fk.attributes {
                if !rel.attributes.contains(a) {
                    return Err(SchemaError::KeyNotSubset {
                        relation: rel.name.clone(),
                        attribute: a.clone(),
                    });
                }
            }
            if !rel_names.contains(fk.references.as_str()) {
                return Err(SchemaError::UnknownReference {
                    relation: rel.name.clone(),
                    references: fk.references.clone(),
                });
            }
            foreign_keys.push(ForeignKey {
                attributes: lookup(&fk.attributes, &loc)?,
                references: fk.references.clone(),
            });
        }
        relations.push(Relation {
            name: rel.name.clone(),
            attributes: attrs,
            primary_key,
            foreign_keys,
        });
    }

    let mut fds = Vec::with_capacity(raw.fds.len());
    for (i, fd) in raw.fds.iter().enumerate() {
        let loc = || format!("fds[{i}]");
        if fd.lhs.is_empty() || fd.rhs.is_empty() {
            return Err(SchemaError::EmptySet { location: loc() });
        }
        let lhs = lookup(&fd.lhs, &loc)?;
        let rhs = lookup(&fd.rhs, &loc)?.difference(&lhs);
        if rhs.is_empty() {
            continue;
        }
        fds.push(FunctionalDependency {
            lhs,
            rhs,
            probabilistic: fd.probabilistic.unwrap_or(false),
        });
    }

    Ok(Schema {
        attributes,
        index,
        relations,
        fds,
    })
}

impl Schema {
    /// Empty schema with no relations.
    pub fn empty() -> Self {
        validate_schema(&RawSchema::default()).expect("empty schema is valid")
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attributes
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn attr(&self, name: &str) -> Option<AttrId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, attr: AttrId) -> &str {
        &self.attributes[attr.index()]
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name == name)
    }

    /// Resolve attribute names into a set.
    pub fn set_of<S: AsRef<str>>(&self, names: &[S]) -> Option<AttributeSet> {
        names.iter().map(|n| self.attr(n.as_ref())).collect()
    }

    pub fn names_of(&self, set: &AttributeSet) -> Vec<String> {
        set.iter().map(|a| self.name(a).to_string()).collect()
    }

    pub fn to_raw(&self) -> RawSchema {
        RawSchema {
            relations: self
                .relations
                .iter()
                .map(|r| RawRelation {
                    name: r.name.clone(),
                    attributes: self.names_of(&r.attributes),
                    primary_key: self.names_of(&r.primary_key),
                    foreign_keys: r
                        .foreign_keys
                        .iter()
                        .map(|fk| RawForeignKey {
                            attributes: self.names_of(&fk.attributes),
                            references: fk.references.clone(),
                        })
                        .collect(),
                })
                .collect(),
            fds: self
                .fds
                .iter()
                .map(|fd| RawFd {
                    lhs: self.names_of(&fd.lhs),
                    rhs: self.names_of(&fd.rhs),
                    probabilistic: fd.probabilistic.then_some(true),
                })
                .collect(),
            policy: RawPolicy::default(),
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            writeln!(f, "{} = {{{}}}", r.name, self.names_of(&r.attributes).join(", "))?;
        }
        for fd in &self.fds {
            writeln!(
                f,
                "{} -> {}",
                fd.lhs.label(&self.attributes),
                fd.rhs.label(&self.attributes)
            )?;
        }
        Ok(())
    }
}

fn resolve_sets(
    sets: &[Vec<String>],
    schema: &Schema,
    what: &str,
) -> Result<Vec<AttributeSet>, PolicyError> {
    sets.iter()
        .enumerate()
        .map(|(i, names)| {
            let location = format!("policy.{what}[{i}]");
            if names.is_empty() {
                return Err(PolicyError::EmptySet { location });
            }
            names
                .iter()
                .map(|n| {
                    schema.attr(n).ok_or_else(|| PolicyError::UnknownAttribute {
                        location: location.clone(),
                        attribute: n.clone(),
                    })
                })
                .collect()
        })
        .collect()
}

fn dedup_sets(sets: Vec<AttributeSet>) -> Vec<AttributeSet> {
    let mut seen = BTreeSet::new();
    sets.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

impl Policy {
    pub fn resolve(raw: &RawPolicy, schema: &Schema) -> Result<Policy, PolicyError> {
        Ok(Policy {
            forbidden: resolve_sets(&raw.forbidden, schema, "forbidden")?,
            required: resolve_sets(&raw.required, schema, "required")?,
        })
    }

    pub fn to_raw(&self, schema: &Schema) -> RawPolicy {
        RawPolicy {
            forbidden: self.forbidden.iter().map(|s| schema.names_of(s)).collect(),
            required: self.required.iter().map(|s| schema.names_of(s)).collect(),
        }
    }
}

/// Result of [`preprocess_policy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub schema: Schema,
    pub policy: Policy,
    pub warnings: Vec<String>,
}

/// Remove singleton forbidden sets by deleting their attribute from the
/// schema, and deduplicate both policy lists.
///
/// Deleting attribute `x` projects it out of every relation, key and FD side.
/// An FD whose side becomes empty is dropped, as is a relation left without
/// attributes. Forbidden sets mentioning `x` can no longer be associated and
/// are dropped too. A required set mentioning `x` can never be satisfied, so
/// that case is an error.
pub fn preprocess_policy(schema: &Schema, policy: &Policy) -> Result<Preprocessed, PolicyError> {
    let mut warnings = Vec::new();
    let removed: BTreeSet<AttrId> = policy
        .forbidden
        .iter()
        .filter(|s| s.len() == 1)
        .map(|s| s.as_slice()[0])
        .collect();

    if removed.is_empty() {
        return Ok(Preprocessed {
            schema: schema.clone(),
            policy: Policy {
                forbidden: dedup_sets(policy.forbidden.clone()),
                required: dedup_sets(policy.required.clone()),
            },
            warnings,
        });
    }

    for req in &policy.required {
        if let Some(a) = req.iter().find(|a| removed.contains(a)) {
            return Err(PolicyError::RequiredUsesRemoved {
                required: schema.names_of(req),
                attribute: schema.name(a).to_string(),
            });
        }
    }

    let keep = |names: &[String]| -> Vec<String> {
        names
            .iter()
            .filter(|n| schema.attr(n).is_none_or(|a| !removed.contains(&a)))
            .cloned()
            .collect()
    };

    for a in &removed {
        warnings.push(format!(
            "singleton forbidden set {{{}}}: attribute removed from the schema",
            schema.name(*a)
        ));
    }

    let mut raw = schema.to_raw();
    let mut dropped_relations = BTreeSet::new();
    raw.relations.retain_mut(|rel| {
        rel.attributes = keep(&rel.attributes);
        if rel.attributes.is_empty() {
            warnings.push(format!("relation `{}` dropped: no attributes left", rel.name));
            dropped_relations.insert(rel.name.clone());
            return false;
        }
        rel.primary_key = keep(&rel.primary_key);
        if rel.primary_key.is_empty() {
            warnings.push(format!(
                "relation `{}`: primary key removed, using all remaining attributes",
                rel.name
            ));
            rel.primary_key = rel.attributes.clone();
        }
        true
    });
    for rel in &mut raw.relations {
        rel.foreign_keys.retain_mut(|fk| {
            fk.attributes = keep(&fk.attributes);
            !fk.attributes.is_empty() && !dropped_relations.contains(&fk.references)
        });
    }
    raw.fds.retain_mut(|fd| {
        fd.lhs = keep(&fd.lhs);
        fd.rhs = keep(&fd.rhs);
        !fd.lhs.is_empty() && !fd.rhs.is_empty()
    });

    let new_schema = validate_schema(&raw).expect("projection of a valid schema is valid");
    let remap = |set: &AttributeSet| -> AttributeSet {
        set.iter()
            .map(|a| new_schema.attr(schema.name(a)).expect("kept attribute"))
            .collect()
    };
    let mut forbidden = Vec::new();
    for f in &policy.forbidden {
        if f.len() == 1 {
            continue;
        }
        if f.iter().any(|a| removed.contains(&a)) {
            warnings.push(format!(
                "forbidden set {{{}}} dropped: one of its attributes was removed",
                schema.names_of(f).join(", ")
            ));
            continue;
        }
        forbidden.push(remap(f));
    }
    let required = policy.required.iter().map(remap).collect();

    Ok(Preprocessed {
        schema: new_schema,
        policy: Policy {
            forbidden: dedup_sets(forbidden),
            required: dedup_sets(required),
        },
        warnings,
    })
}
