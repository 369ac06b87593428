//! Required/forbidden consistency check.
//!
//! An instance is a list of forbidden chains and a list of required families
//! (each family a list of chains). It is consistent when some cut meets every
//! forbidden chain while every family keeps at least one chain disjoint from
//! the cut.
//!
//! Two exhaustive strategies are provided:
//!
//! * Required-first picks one chain per family. The union `P` of the picks is
//!   protected, and the pick is feasible iff no forbidden chain lies inside
//!   `P`. A cut is then built greedily outside `P`.
//! * Forbidden-first picks one edge per forbidden chain not already hit and
//!   backtracks as soon as a family loses its last chain.
//!
//! Both branch next on the choice point with the fewest remaining options
//! (ties to the lowest index) and try options in input order, so results are
//! deterministic. A branch is dropped as soon as some choice point has no
//! option left.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cut::greedy_hitting_set;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcInstance {
    pub labels: Vec<String>,
    /// Per-element tie-break weight for greedy cut construction (lower first).
    pub weights: Vec<usize>,
    pub forbidden: Vec<Vec<u32>>,
    pub required: Vec<Vec<Vec<u32>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCcInstance {
    #[serde(default)]
    pub forbidden: Vec<Vec<String>>,
    #[serde(default)]
    pub required: Vec<Vec<Vec<String>>>,
}

#[derive(Debug, Error)]
pub enum CcError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("element {element} out of range for {labels} labels")]
    OutOfRange { element: u32, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    RequiredFirst,
    ForbiddenFirst,
    Auto,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" | "i" | "required-first" => Ok(Strategy::RequiredFirst),
            "II" | "ii" | "forbidden-first" => Ok(Strategy::ForbiddenFirst),
            "auto" => Ok(Strategy::Auto),
            other => Err(format!("unknown strategy `{other}` (expected I, II or auto)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::RequiredFirst => "I",
            Strategy::ForbiddenFirst => "II",
            Strategy::Auto => "auto",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyResult {
    pub consistent: bool,
    /// Sorted cut elements, present iff consistent.
    pub cut: Option<Vec<u32>>,
    /// Index of the preserved chain in each family, present iff consistent.
    pub preserved: Option<Vec<usize>>,
    /// Strategy actually run (never `Auto`).
    pub strategy: Strategy,
    pub elapsed: Duration,
    /// Search nodes visited.
    pub work: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("consistency check exceeded its deadline")]
pub struct TimedOut;

fn canon(chain: &[u32]) -> Vec<u32> {
    let mut c = chain.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

fn dedup_chains(chains: Vec<Vec<u32>>) -> Vec<Vec<u32>> {
    let mut seen = BTreeSet::new();
    chains.into_iter().filter(|c| seen.insert(c.clone())).collect()
}

impl CcInstance {
    /// Canonicalize chains (sorted, duplicate-free). Duplicate chains inside a
    /// family are dropped; the forbidden list keeps its order.
    pub fn new(
        labels: Vec<String>,
        forbidden: Vec<Vec<u32>>,
        required: Vec<Vec<Vec<u32>>>,
    ) -> Result<Self, CcError> {
        let n = labels.len();
        for &e in forbidden.iter().flatten().chain(required.iter().flatten().flatten()) {
            if e as usize >= n {
                return Err(CcError::OutOfRange { element: e, labels: n });
            }
        }
        Ok(CcInstance {
            weights: vec![0; n],
            labels,
            forbidden: forbidden.iter().map(|c| canon(c)).collect(),
            required: required
                .into_iter()
                .map(|fam| dedup_chains(fam.iter().map(|c| canon(c)).collect()))
                .collect(),
        })
    }

    pub fn with_weights(mut self, weights: Vec<usize>) -> Self {
        assert_eq!(weights.len(), self.labels.len());
        self.weights = weights;
        self
    }

    /// Labels are collected from the input and sorted lexicographically.
    pub fn from_raw(raw: &RawCcInstance) -> Result<Self, CcError> {
        let labels: BTreeSet<&String> = raw
            .forbidden
            .iter()
            .flatten()
            .chain(raw.required.iter().flatten().flatten())
            .collect();
        let labels: Vec<String> = labels.into_iter().cloned().collect();
        let index: BTreeMap<&str, u32> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let map = |c: &Vec<String>| -> Vec<u32> { c.iter().map(|l| index[l.as_str()]).collect() };
        let forbidden = raw.forbidden.iter().map(map).collect();
        let required = raw
            .required
            .iter()
            .map(|fam| fam.iter().map(map).collect())
            .collect();
        CcInstance::new(labels, forbidden, required)
    }

    pub fn from_json(text: &str) -> Result<Self, CcError> {
        Self::from_raw(&serde_json::from_str(text)?)
    }

    pub fn to_raw(&self) -> RawCcInstance {
        let names = |c: &Vec<u32>| -> Vec<String> {
            c.iter().map(|&e| self.labels[e as usize].clone()).collect()
        };
        RawCcInstance {
            forbidden: self.forbidden.iter().map(names).collect(),
            required: self
                .required
                .iter()
                .map(|fam| fam.iter().map(names).collect())
                .collect(),
        }
    }

    pub fn element_count(&self) -> usize {
        self.labels.len()
    }

    pub fn names(&self, elems: &[u32]) -> Vec<String> {
        elems.iter().map(|&e| self.labels[e as usize].clone()).collect()
    }

    /// Natural log of the number of leaves each strategy would enumerate.
    pub fn search_bounds(&self) -> (f64, f64) {
        let req: f64 = self.required.iter().map(|f| (f.len().max(1) as f64).ln()).sum();
        let forb: f64 = self.forbidden.iter().map(|f| (f.len().max(1) as f64).ln()).sum();
        (req, forb)
    }

    pub fn resolve(&self, strategy: Strategy) -> Strategy {
        match strategy {
            Strategy::Auto => {
                let (req, forb) = self.search_bounds();
                if forb < req {
                    Strategy::ForbiddenFirst
                } else {
                    Strategy::RequiredFirst
                }
            }
            s => s,
        }
    }
}

/// If `cut` meets every forbidden chain and each family keeps a chain
/// disjoint from it, return the index of the first such chain per family.
pub fn validate_cut(cut: &[u32], instance: &CcInstance) -> Option<Vec<usize>> {
    let cut: BTreeSet<u32> = cut.iter().copied().collect();
    if !instance.forbidden.iter().all(|f| f.iter().any(|e| cut.contains(e))) {
        return None;
    }
    instance
        .required
        .iter()
        .map(|fam| fam.iter().position(|c| c.iter().all(|e| !cut.contains(e))))
        .collect()
}

struct Clock {
    deadline: Option<Instant>,
    nodes: u64,
}

impl Clock {
    fn tick(&mut self) -> Result<(), TimedOut> {
        self.nodes += 1;
        if self.nodes % 256 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(TimedOut);
                }
            }
        }
        Ok(())
    }
}

fn occurrences(n: usize, chains: &[Vec<u32>]) -> Vec<Vec<usize>> {
    let mut occ = vec![Vec::new(); n];
    for (i, c) in chains.iter().enumerate() {
        for &e in c {
            occ[e as usize].push(i);
        }
    }
    occ
}

fn trivially_inconsistent(instance: &CcInstance) -> bool {
    instance.forbidden.iter().any(|f| f.is_empty()) || instance.required.iter().any(|f| f.is_empty())
}

fn greedy_cut_outside(instance: &CcInstance, protected: &[bool]) -> Vec<u32> {
    let chains: Vec<Vec<u32>> = instance
        .forbidden
        .iter()
        .map(|f| f.iter().copied().filter(|&e| !protected[e as usize]).collect())
        .collect();
    let mut count = vec![0usize; instance.element_count()];
    for &e in chains.iter().flatten() {
        count[e as usize] += 1;
    }
    let mut order: Vec<u32> = (0..instance.element_count() as u32)
        .filter(|&e| count[e as usize] > 0)
        .collect();
    order.sort_by_key(|&e| (Reverse(count[e as usize]), instance.weights[e as usize], e));
    let mut cut = greedy_hitting_set(&chains, &order);
    cut.sort_unstable();
    cut
}

// ---------------------------------------------------------------------------
// Required-first

struct RequiredFirst<'a> {
    inst: &'a CcInstance,
    forb_of: Vec<Vec<usize>>,
    cover: Vec<u32>,
    missing: Vec<usize>,
    violated: usize,
    scratch: Vec<usize>,
    pick: Vec<Option<usize>>,
}

impl<'a> RequiredFirst<'a> {
    fn new(inst: &'a CcInstance) -> Self {
        RequiredFirst {
            forb_of: occurrences(inst.element_count(), &inst.forbidden),
            cover: vec![0; inst.element_count()],
            missing: inst.forbidden.iter().map(|f| f.len()).collect(),
            violated: 0,
            scratch: vec![0; inst.forbidden.len()],
            pick: vec![None; inst.required.len()],
            inst,
        }
    }

    fn add(&mut self, chain: &[u32]) {
        for &e in chain {
            self.cover[e as usize] += 1;
            if self.cover[e as usize] == 1 {
                for &f in &self.forb_of[e as usize] {
                    self.missing[f] -= 1;
                    if self.missing[f] == 0 {
                        self.violated += 1;
                    }
                }
            }
        }
    }

    fn remove(&mut self, chain: &[u32]) {
        for &e in chain {
            self.cover[e as usize] -= 1;
            if self.cover[e as usize] == 0 {
                for &f in &self.forb_of[e as usize] {
                    if self.missing[f] == 0 {
                        self.violated -= 1;
                    }
                    self.missing[f] += 1;
                }
            }
        }
    }

    /// Would adding `chain` swallow a forbidden chain?
    fn conflicts(&mut self, chain: &[u32]) -> bool {
        let mut touched = Vec::new();
        let mut bad = false;
        for &e in chain {
            if self.cover[e as usize] > 0 {
                continue;
            }
            for &f in &self.forb_of[e as usize] {
                if self.scratch[f] == 0 {
                    touched.push(f);
                }
                self.scratch[f] += 1;
                if self.scratch[f] == self.missing[f] {
                    bad = true;
                }
            }
        }
        for f in touched {
            self.scratch[f] = 0;
        }
        bad
    }

    /// Family with the fewest chains still compatible with `P`, and those
    /// chains. `None` when every family is assigned; an empty list when some
    /// family has no option left.
    fn next_family(&mut self) -> Option<(usize, Vec<usize>)> {
        let inst = self.inst;
        let mut best: Option<(usize, Vec<usize>)> = None;
        for f in 0..inst.required.len() {
            if self.pick[f].is_some() {
                continue;
            }
            let options: Vec<usize> = (0..inst.required[f].len())
                .filter(|&c| !self.conflicts(&inst.required[f][c]))
                .collect();
            let better = best.as_ref().is_none_or(|(_, b)| options.len() < b.len());
            if better {
                let done = options.is_empty();
                best = Some((f, options));
                if done {
                    break;
                }
            }
        }
        best
    }

    fn search(&mut self, clock: &mut Clock) -> Result<bool, TimedOut> {
        clock.tick()?;
        let inst = self.inst;
        let Some((f, options)) = self.next_family() else {
            return Ok(true);
        };
        for c in options {
            let chain = &inst.required[f][c];
            self.add(chain);
            self.pick[f] = Some(c);
            if self.violated == 0 && self.search(clock)? {
                return Ok(true);
            }
            self.pick[f] = None;
            self.remove(chain);
        }
        Ok(false)
    }
}

pub fn check_required_first(
    instance: &CcInstance,
    deadline: Option<Instant>,
) -> Result<ConsistencyResult, TimedOut> {
    let start = Instant::now();
    let mut clock = Clock { deadline, nodes: 0 };
    let mut result = ConsistencyResult {
        consistent: false,
        cut: None,
        preserved: None,
        strategy: Strategy::RequiredFirst,
        elapsed: Duration::ZERO,
        work: 0,
    };
    if !trivially_inconsistent(instance) {
        let mut s = RequiredFirst::new(instance);
        if s.search(&mut clock)? {
            let protected: Vec<bool> = s.cover.iter().map(|&c| c > 0).collect();
            result.consistent = true;
            result.cut = Some(greedy_cut_outside(instance, &protected));
            result.preserved = Some(s.pick.into_iter().map(|p| p.expect("all families picked")).collect());
        }
    }
    result.work = clock.nodes;
    result.elapsed = start.elapsed();
    Ok(result)
}

// ---------------------------------------------------------------------------
// Forbidden-first

struct ForbiddenFirst<'a> {
    inst: &'a CcInstance,
    /// Flat chain ids of the required chains containing each element.
    req_of: Vec<Vec<usize>>,
    family: Vec<usize>,
    in_cut: Vec<u32>,
    dead: Vec<u32>,
    alive: Vec<usize>,
    dead_families: usize,
    scratch: Vec<usize>,
}

impl<'a> ForbiddenFirst<'a> {
    fn new(inst: &'a CcInstance) -> Self {
        let flat: Vec<Vec<u32>> = inst.required.iter().flatten().cloned().collect();
        let family: Vec<usize> = inst
            .required
            .iter()
            .enumerate()
            .flat_map(|(i, f)| std::iter::repeat_n(i, f.len()))
            .collect();
        ForbiddenFirst {
            req_of: occurrences(inst.element_count(), &flat),
            dead: vec![0; flat.len()],
            alive: inst.required.iter().map(|f| f.len()).collect(),
            in_cut: vec![0; inst.element_count()],
            dead_families: 0,
            scratch: vec![0; inst.required.len()],
            family,
            inst,
        }
    }

    fn add(&mut self, e: u32) {
        self.in_cut[e as usize] += 1;
        if self.in_cut[e as usize] > 1 {
            return;
        }
        for &c in &self.req_of[e as usize] {
            self.dead[c] += 1;
            if self.dead[c] == 1 {
                let f = self.family[c];
                self.alive[f] -= 1;
                if self.alive[f] == 0 {
                    self.dead_families += 1;
                }
            }
        }
    }

    fn remove(&mut self, e: u32) {
        self.in_cut[e as usize] -= 1;
        if self.in_cut[e as usize] > 0 {
            return;
        }
        for &c in &self.req_of[e as usize] {
            self.dead[c] -= 1;
            if self.dead[c] == 0 {
                let f = self.family[c];
                if self.alive[f] == 0 {
                    self.dead_families -= 1;
                }
                self.alive[f] += 1;
            }
        }
    }

    fn hit(&self, f: usize) -> bool {
        self.inst.forbidden[f].iter().any(|&e| self.in_cut[e as usize] > 0)
    }

    /// Would cutting `e` kill a family?
    fn fatal(&mut self, e: u32) -> bool {
        if self.in_cut[e as usize] > 0 {
            return false;
        }
        let mut touched = Vec::new();
        let mut bad = false;
        for &c in &self.req_of[e as usize] {
            if self.dead[c] > 0 {
                continue;
            }
            let f = self.family[c];
            if self.scratch[f] == 0 {
                touched.push(f);
            }
            self.scratch[f] += 1;
            if self.scratch[f] == self.alive[f] {
                bad = true;
            }
        }
        for f in touched {
            self.scratch[f] = 0;
        }
        bad
    }

    /// Unhit forbidden chain with the fewest edges that can still be cut
    /// without killing a family, and those edges.
    fn next_chain(&mut self) -> Option<(usize, Vec<u32>)> {
        let inst = self.inst;
        let mut best: Option<(usize, Vec<u32>)> = None;
        for g in 0..inst.forbidden.len() {
            if self.hit(g) {
                continue;
            }
            let options: Vec<u32> = inst.forbidden[g]
                .iter()
                .copied()
                .filter(|&e| !self.fatal(e))
                .collect();
            let better = best.as_ref().is_none_or(|(_, b)| options.len() < b.len());
            if better {
                let done = options.is_empty();
                best = Some((g, options));
                if done {
                    break;
                }
            }
        }
        best
    }

    fn search(&mut self, clock: &mut Clock) -> Result<bool, TimedOut> {
        clock.tick()?;
        let Some((_, options)) = self.next_chain() else {
            return Ok(true);
        };
        for e in options {
            self.add(e);
            if self.dead_families == 0 && self.search(clock)? {
                return Ok(true);
            }
            self.remove(e);
        }
        Ok(false)
    }
}

pub fn check_forbidden_first(
    instance: &CcInstance,
    deadline: Option<Instant>,
) -> Result<ConsistencyResult, TimedOut> {
    let start = Instant::now();
    let mut clock = Clock { deadline, nodes: 0 };
    let mut result = ConsistencyResult {
        consistent: false,
        cut: None,
        preserved: None,
        strategy: Strategy::ForbiddenFirst,
        elapsed: Duration::ZERO,
        work: 0,
    };
    if !trivially_inconsistent(instance) {
        let mut s = ForbiddenFirst::new(instance);
        if s.search(&mut clock)? {
            let cut: Vec<u32> = (0..instance.element_count() as u32)
                .filter(|&e| s.in_cut[e as usize] > 0)
                .collect();
            result.preserved = validate_cut(&cut, instance);
            result.consistent = true;
            result.cut = Some(cut);
        }
    }
    result.work = clock.nodes;
    result.elapsed = start.elapsed();
    Ok(result)
}

pub fn check(
    instance: &CcInstance,
    strategy: Strategy,
    deadline: Option<Instant>,
) -> Result<ConsistencyResult, TimedOut> {
    match instance.resolve(strategy) {
        Strategy::ForbiddenFirst => check_forbidden_first(instance, deadline),
        _ => check_required_first(instance, deadline),
    }
}

/// JSON verdict: `{"consistent":bool,"cut":[str],"preserved":[[str]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawVerdict {
    pub consistent: bool,
    pub cut: Vec<String>,
    pub preserved: Vec<Vec<String>>,
}

impl ConsistencyResult {
    pub fn to_raw(&self, instance: &CcInstance) -> RawVerdict {
        RawVerdict {
            consistent: self.consistent,
            cut: self.cut.as_deref().map(|c| instance.names(c)).unwrap_or_default(),
            preserved: self
                .preserved
                .as_ref()
                .map(|p| {
                    p.iter()
                        .enumerate()
                        .map(|(f, &c)| instance.names(&instance.required[f][c]))
                        .collect()
                })
                .unwrap_or_default(),
        }
    }
}

// ---------------------------------------------------------------------------
// 3SAT reduction

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    /// 1-based variable index.
    pub var: u32,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: u32) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: u32) -> Self {
        Literal { var, positive: false }
    }

    /// Element index in the reduced instance: `2(var-1)` or `2(var-1)+1`.
    pub fn element(self) -> u32 {
        2 * (self.var - 1) + u32::from(!self.positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreeSatFormula {
    pub variables: u32,
    pub clauses: Vec<[Literal; 3]>,
}

impl ThreeSatFormula {
    pub fn new(variables: u32, clauses: Vec<[Literal; 3]>) -> Result<Self, String> {
        for c in &clauses {
            for l in c {
                if l.var == 0 || l.var > variables {
                    return Err(format!("variable q{} outside 1..={variables}", l.var));
                }
            }
        }
        Ok(ThreeSatFormula { variables, clauses })
    }
}

/// Forbidden chains `{q_i, !q_i}` per variable; one family of three
/// singleton chains per clause.
pub fn reduce_3sat(formula: &ThreeSatFormula) -> CcInstance {
    let labels: Vec<String> = (1..=formula.variables)
        .flat_map(|i| [format!("q{i}"), format!("!q{i}")])
        .collect();
    let forbidden = (1..=formula.variables)
        .map(|i| vec![Literal::pos(i).element(), Literal::neg(i).element()])
        .collect();
    let required = formula
        .clauses
        .iter()
        .map(|c| c.iter().map(|l| vec![l.element()]).collect())
        .collect();
    CcInstance::new(labels, forbidden, required).expect("literal elements are in range")
}
