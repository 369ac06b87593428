//! Secure decomposition of relational external schemas.
//!
//! Given a schema, its functional dependencies and a policy of forbidden and
//! required attribute sets, the crate builds a functional dependency graph,
//! enumerates the join chains that can associate each set, picks a cut that
//! breaks every forbidden chain while keeping a chain for each required set,
//! and splits relations into maximal fragments that avoid the resulting
//! forbidden co-occurrences.
//!
//! ```
//! use fdcut::{load, secure_decompose, PipelineOptions};
//!
//! let text = r#"{
//!   "relations": [{"name": "R", "attributes": ["A", "B", "C"], "primary_key": ["A"]}],
//!   "fds": [{"lhs": ["A"], "rhs": ["B", "C"]}],
//!   "policy": {"forbidden": [["B", "C"]]}
//! }"#;
//! let (schema, policy) = load(text).unwrap();
//! let report = secure_decompose(&schema, &policy, &PipelineOptions::default()).unwrap();
//! assert!(report.security_verified);
//! ```

pub mod bench;
pub mod closure;
pub mod consistency;
pub mod cut;
pub mod decompose;
pub mod fdg;
pub mod joinchain;
pub mod pipeline;
pub mod schema;

pub use closure::{attribute_closure, decompose_fds, identifiers_of, DecomposedFdSet, SimpleFd};
pub use consistency::{
    check, check_forbidden_first, check_required_first, reduce_3sat, validate_cut, CcInstance,
    ConsistencyResult, Literal, Strategy, ThreeSatFormula,
};
pub use cut::{
    edges_to_forbidden_sets, greedy_cut, minimum_cut_oracle, security_counts, CutSet, EdgeScore,
};
pub use decompose::{
    decompose_relation, dependency_loss, strong_cut_decompose, DecomposedSchema, Fragment,
};
pub use fdg::{build_fdg, export_dot, transitive_closure_pairs, EdgeId, EdgeKind, Fdg, VertexId};
pub use joinchain::{enumerate_simple_paths, join_chains, ChainFamily, JoinChain, PathLimits};
pub use pipeline::{secure_decompose, verify_decomposition, DecompositionReport, PipelineOptions};
pub use schema::{
    load, preprocess_policy, validate_schema, AttrId, AttributeSet, Policy, Schema,
};
