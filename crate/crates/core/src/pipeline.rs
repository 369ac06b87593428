//! End-to-end secure decomposition.
//!
//! schema → FDG → forbidden (and required) chains → cut → new forbidden sets
//! → maximal fragments → verification on the FDG rebuilt from the fragments.
//!
//! Cutting one edge per chain and splitting relations can leave an
//! association that the original FDG did not have as a chain through the cut
//! edge. For example, with `R = {A, B, C}`, `C -> B` and forbidden `{A, B}`,
//! the chain `ABC->A, ABC->B` is broken by cutting `ABC->A`, but the
//! resulting fragments `AC` and `BC` still associate `A` with `B` through
//! `C`. When verification fails, chains are recomputed on the fragment FDG,
//! cut again and added as further forbidden sets until the result verifies.
//! Every such round adds at least one set not yet forbidden, so the loop
//! terminates.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{decompose_fds, DecomposedFdSet};
use crate::consistency::{check, CcInstance, ConsistencyResult, Strategy, TimedOut};
use crate::cut::{edges_to_forbidden_sets, greedy_cut, CutSet};
use crate::decompose::{
    decompose_schema, DecomposeError, DecomposedSchema, Fragment, RawDecomposition,
    DEFAULT_WIDTH_BOUND,
};
use crate::fdg::{build_fdg, EdgeId, EdgeKind, Fdg};
use crate::joinchain::{common_ancestors, join_chains, ChainError, ChainFamily, PathLimits};
use crate::schema::{
    preprocess_policy, validate_schema, AttributeSet, Policy, PolicyError, RawFd, RawRelation,
    RawSchema, Schema,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub limits: PathLimits,
    pub strategy: Strategy,
    pub width_bound: usize,
    /// Re-cut on the fragment FDG until verification passes.
    pub refine: bool,
    pub timeout: Option<Duration>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            limits: PathLimits::default(),
            strategy: Strategy::Auto,
            width_bound: DEFAULT_WIDTH_BOUND,
            refine: true,
            timeout: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Chains(#[from] ChainError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    TimedOut(#[from] TimedOut),
}

#[derive(Debug, Clone)]
pub struct DecompositionReport {
    /// Schema after policy preprocessing; all sets below refer to it.
    pub schema: Schema,
    pub fdg: Fdg,
    pub result: DecomposedSchema,
    pub consistent: bool,
    pub consistency: Option<ConsistencyResult>,
    pub cut: CutSet,
    pub security_verified: bool,
    pub required_verified: Vec<(AttributeSet, bool)>,
    pub warnings: Vec<String>,
    pub refinement_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub secure: bool,
    pub required: Vec<(AttributeSet, bool)>,
}

/// FDs whose attributes all fall inside one fragment.
pub fn project_fds(fds: &DecomposedFdSet, fragments: &[Fragment]) -> DecomposedFdSet {
    let mut out = DecomposedFdSet::default();
    for (fd, &o) in fds.fds.iter().zip(&fds.origin) {
        let need = fd.lhs.union(&AttributeSet::singleton(fd.rhs));
        if fragments.iter().any(|f| need.is_subset(&f.attrs)) {
            out.fds.push(fd.clone());
            out.origin.push(o);
        }
    }
    out
}

pub fn fragment_fdg(schema: &Schema, fragments: &[Fragment]) -> Fdg {
    let fds = decompose_fds(&schema.fds);
    let sets: Vec<AttributeSet> = fragments.iter().map(|f| f.attrs.clone()).collect();
    Fdg::from_parts(schema.attribute_names(), &sets, &project_fds(&fds, fragments))
}

/// The fragments as a schema of their own, with the projected FDs. Primary
/// keys are the source key restricted to the fragment, or every attribute of
/// the fragment when nothing of the key survives.
pub fn fragment_schema(schema: &Schema, result: &DecomposedSchema) -> Schema {
    let fds = project_fds(&decompose_fds(&schema.fds), &result.fragments);
    let raw = RawSchema {
        relations: result
            .fragments
            .iter()
            .map(|f| {
                let key = schema
                    .relation(&f.source)
                    .map(|r| r.primary_key.intersection(&f.attrs))
                    .filter(|k| !k.is_empty())
                    .unwrap_or_else(|| f.attrs.clone());
                RawRelation {
                    name: f.name.clone(),
                    attributes: schema.names_of(&f.attrs),
                    primary_key: schema.names_of(&key),
                    foreign_keys: vec![],
                }
            })
            .collect(),
        fds: fds
            .iter()
            .map(|fd| RawFd {
                lhs: schema.names_of(&fd.lhs),
                rhs: vec![schema.name(fd.rhs).to_string()],
                probabilistic: fd.probabilistic.then_some(true),
            })
            .collect(),
        policy: Default::default(),
    };
    validate_schema(&raw).expect("fragments of a valid schema form a valid schema")
}

/// Check a decomposition on the FDG rebuilt from its fragments.
///
/// Secure iff no fragment holds a forbidden set and no forbidden set has a
/// common ancestor. A required set passes iff it has a common ancestor.
pub fn verify_decomposition(
    result: &DecomposedSchema,
    schema: &Schema,
    policy: &Policy,
) -> Verification {
    let g = fragment_fdg(schema, &result.fragments);
    let associable = |s: &AttributeSet| -> bool {
        common_ancestors(&g, s).map(|a| !a.is_empty()).unwrap_or(false)
    };
    let secure = policy.forbidden.iter().all(|f| {
        !result.fragments.iter().any(|fr| f.is_subset(&fr.attrs)) && !associable(f)
    });
    let required = policy.required.iter().map(|r| (r.clone(), associable(r))).collect();
    Verification { secure, required }
}

fn families(
    fdg: &Fdg,
    sets: &[AttributeSet],
    limits: &PathLimits,
    schema: &Schema,
    what: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<ChainFamily>, ChainError> {
    let mut out = Vec::with_capacity(sets.len());
    for s in sets {
        let fam = join_chains(fdg, s, limits)?;
        if fam.truncated {
            warnings.push(format!(
                "{what} set {{{}}}: path enumeration truncated at the configured limits",
                schema.names_of(s).join(", ")
            ));
        }
        out.push(fam);
    }
    Ok(out)
}

fn cc_instance(fdg: &Fdg, forbidden: &[ChainFamily], required: &[ChainFamily]) -> CcInstance {
    let labels = fdg.edge_ids().map(|e| fdg.edge_label(e)).collect();
    let weights = fdg
        .edges()
        .iter()
        .map(|e| fdg.vertex(e.src).attrs.len() + fdg.vertex(e.dst).attrs.len())
        .collect();
    let forb = forbidden
        .iter()
        .flat_map(|f| f.chains.iter())
        .map(|c| {
            c.edges
                .iter()
                .filter(|e| fdg.edge(**e).kind != EdgeKind::Union)
                .map(|e| e.0)
                .collect()
        })
        .collect();
    let req = required
        .iter()
        .map(|f| f.chains.iter().map(|c| c.edges.iter().map(|e| e.0).collect()).collect())
        .collect();
    CcInstance::new(labels, forb, req)
        .expect("edge ids are in range")
        .with_weights(weights)
}

fn add_new(target: &mut Vec<AttributeSet>, sets: Vec<AttributeSet>) -> usize {
    let mut added = 0;
    for s in sets {
        if !target.contains(&s) {
            target.push(s);
            added += 1;
        }
    }
    added
}

/// Compute a cut for the given families: through the consistency check when
/// there are required sets, greedily otherwise.
#[allow(clippy::too_many_arguments)]
fn choose_cut(
    fdg: &Fdg,
    forbidden: &[ChainFamily],
    required: &[ChainFamily],
    strategy: Strategy,
    deadline: Option<Instant>,
) -> Result<(CutSet, Option<ConsistencyResult>), TimedOut> {
    if required.is_empty() {
        let chains: Vec<Vec<EdgeId>> = forbidden.iter().flat_map(|f| f.edge_sets()).collect();
        return Ok((greedy_cut(&chains, fdg), None));
    }
    let inst = cc_instance(fdg, forbidden, required);
    let res = check(&inst, strategy, deadline)?;
    let cut = CutSet {
        edges: res.cut.clone().unwrap_or_default().into_iter().map(EdgeId).collect(),
    };
    Ok((cut, Some(res)))
}

pub fn secure_decompose(
    schema: &Schema,
    policy: &Policy,
    options: &PipelineOptions,
) -> Result<DecompositionReport, PipelineError> {
    let deadline = options.timeout.map(|t| Instant::now() + t);
    let pre = preprocess_policy(schema, policy)?;
    let schema = pre.schema;
    let policy = pre.policy;
    let mut warnings = pre.warnings;

    let fdg = build_fdg(&schema);
    let fds = decompose_fds(&schema.fds);
    let forb_fams = families(&fdg, &policy.forbidden, &options.limits, &schema, "forbidden", &mut warnings)?;
    let req_fams = families(&fdg, &policy.required, &options.limits, &schema, "required", &mut warnings)?;
    for (r, fam) in policy.required.iter().zip(&req_fams) {
        if fam.is_empty() {
            warnings.push(format!(
                "required set {{{}}} has no join chain in the original schema",
                schema.names_of(r).join(", ")
            ));
        }
    }

    let (cut, consistency) = choose_cut(&fdg, &forb_fams, &req_fams, options.strategy, deadline)?;
    if consistency.as_ref().is_some_and(|c| !c.consistent) {
        return Ok(DecompositionReport {
            schema,
            fdg,
            result: DecomposedSchema::default(),
            consistent: false,
            consistency,
            cut: CutSet::default(),
            security_verified: false,
            required_verified: policy.required.iter().map(|r| (r.clone(), false)).collect(),
            warnings,
            refinement_rounds: 0,
        });
    }

    let mut new_forbidden = edges_to_forbidden_sets(&cut, &fdg);
    let decompose = |extra: &[AttributeSet]| -> Result<DecomposedSchema, DecomposeError> {
        let mut all = policy.forbidden.clone();
        add_new(&mut all, extra.to_vec());
        let mut d = decompose_schema(&schema, &all, &fds, options.width_bound)?;
        d.new_forbidden = extra.to_vec();
        Ok(d)
    };
    let mut result = decompose(&new_forbidden)?;
    let mut verification = verify_decomposition(&result, &schema, &policy);
    let mut rounds = 0;

    while options.refine && !verification.secure {
        let g = fragment_fdg(&schema, &result.fragments);
        let mut scratch = Vec::new();
        let f2 = families(&g, &policy.forbidden, &options.limits, &schema, "forbidden", &mut scratch)?;
        let r2 = families(&g, &policy.required, &options.limits, &schema, "required", &mut scratch)?;
        let (mut extra_cut, cc) = choose_cut(&g, &f2, &r2, options.strategy, deadline)?;
        if cc.as_ref().is_some_and(|c| !c.consistent) {
            warnings.push(
                "refinement: required sets cannot all be kept on the fragment schema; cutting greedily"
                    .to_string(),
            );
            extra_cut = choose_cut(&g, &f2, &[], options.strategy, deadline)?.0;
        }
        if add_new(&mut new_forbidden, edges_to_forbidden_sets(&extra_cut, &g)) == 0 {
            warnings.push("refinement made no progress".to_string());
            break;
        }
        rounds += 1;
        result = decompose(&new_forbidden)?;
        verification = verify_decomposition(&result, &schema, &policy);
    }
    if rounds > 0 {
        warnings.push(format!(
            "{rounds} refinement round(s) were needed to break associations through the fragments"
        ));
    }
    if !verification.secure {
        warnings.push("security verification failed".to_string());
    }
    for (r, ok) in &verification.required {
        if !ok {
            warnings.push(format!(
                "required set {{{}}} is not associable after decomposition",
                schema.names_of(r).join(", ")
            ));
        }
    }

    Ok(DecompositionReport {
        schema,
        fdg,
        result,
        consistent: true,
        consistency,
        cut,
        security_verified: verification.secure,
        required_verified: verification.required,
        warnings,
        refinement_rounds: rounds,
    })
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRequiredCheck {
    pub set: Vec<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReport {
    #[serde(flatten)]
    pub decomposition: RawDecomposition,
    pub consistent: bool,
    pub security_verified: bool,
    pub required_verified: Vec<RawRequiredCheck>,
    pub warnings: Vec<String>,
}

impl DecompositionReport {
    pub fn to_raw(&self) -> RawReport {
        RawReport {
            decomposition: self.result.to_raw(&self.schema),
            consistent: self.consistent,
            security_verified: self.security_verified,
            required_verified: self
                .required_verified
                .iter()
                .map(|(s, ok)| RawRequiredCheck {
                    set: self.schema.names_of(s),
                    ok: *ok,
                })
                .collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("report serializes")
    }

    pub fn cut_labels(&self) -> Vec<String> {
        self.cut.edges.iter().map(|&e| self.fdg.edge_label(e)).collect()
    }

    pub fn summary(&self) -> String {
        format!(
            "fragments={} cut={} consistent={} security_verified={} required_verified={}/{} refinement_rounds={}",
            self.result.fragments.len(),
            self.cut.len(),
            self.consistent,
            self.security_verified,
            self.required_verified.iter().filter(|(_, ok)| *ok).count(),
            self.required_verified.len(),
            self.refinement_rounds,
        )
    }
}

/// Parse the decomposition part of a report back against its schema.
pub fn parse_report(text: &str, schema: &Schema) -> Result<DecomposedSchema, DecomposeError> {
    let raw: RawReport = serde_json::from_str(text).map_err(|e| DecomposeError::Json(e.to_string()))?;
    DecomposedSchema::from_raw(&raw.decomposition, schema)
}
