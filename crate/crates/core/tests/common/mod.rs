#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use fdcut::closure::DecomposedFdSet;
use fdcut::fdg::{EdgeId, Fdg, VertexId};
use fdcut::schema::{
    load, validate_schema, AttrId, AttributeSet, Policy, RawFd, RawPolicy, RawRelation, RawSchema,
    Schema,
};
use fdcut::{attribute_closure, EdgeKind};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn load_fixture(name: &str) -> (Schema, Policy) {
    load(&fixture(name)).unwrap()
}

/// Attribute set from single-letter names, e.g. `"AD"`.
pub fn set(schema: &Schema, letters: &str) -> AttributeSet {
    letters
        .chars()
        .map(|c| schema.attr(&c.to_string()).unwrap_or_else(|| panic!("no attribute {c}")))
        .collect()
}

pub fn edge(fdg: &Fdg, schema: &Schema, src: &str, dst: &str) -> EdgeId {
    let s = fdg.vertex_of(&set(schema, src)).unwrap_or_else(|| panic!("no vertex {src}"));
    let d = fdg.vertex_of(&set(schema, dst)).unwrap_or_else(|| panic!("no vertex {dst}"));
    fdg.edge_between(s, d).unwrap_or_else(|| panic!("no edge {src}->{dst}"))
}

pub fn edges(fdg: &Fdg, schema: &Schema, pairs: &[(&str, &str)]) -> Vec<EdgeId> {
    let mut v: Vec<EdgeId> = pairs.iter().map(|(s, d)| edge(fdg, schema, s, d)).collect();
    v.sort();
    v
}

/// Edge numbering of the Example-2 figure, `e1..e30`.
pub const EXAMPLE2_NUMBERING: [(u32, &str, &str); 30] = [
    (1, "AEM", "A"),
    (2, "AEM", "E"),
    (3, "AEM", "M"),
    (4, "ABCD", "A"),
    (5, "ABCD", "D"),
    (6, "ABCD", "B"),
    (7, "ABCD", "C"),
    (8, "A", "D"),
    (9, "B", "A"),
    (10, "A", "B"),
    (11, "A", "C"),
    (12, "B", "D"),
    (13, "B", "C"),
    (14, "E", "F"),
    (15, "E", "G"),
    (16, "EFG", "F"),
    (17, "EFG", "E"),
    (18, "EFG", "G"),
    (19, "MHRJ", "H"),
    (20, "MHRJ", "M"),
    (21, "MHRJ", "R"),
    (22, "MHRJ", "J"),
    (23, "M", "H"),
    (24, "M", "R"),
    (25, "M", "J"),
    (26, "JKL", "J"),
    (27, "JKL", "L"),
    (28, "JKL", "K"),
    (29, "J", "K"),
    (30, "J", "L"),
];

pub struct Numbering {
    pub to_edge: BTreeMap<u32, EdgeId>,
    pub to_number: BTreeMap<EdgeId, u32>,
}

impl Numbering {
    pub fn example2(fdg: &Fdg, schema: &Schema) -> Self {
        let to_edge: BTreeMap<u32, EdgeId> = EXAMPLE2_NUMBERING
            .iter()
            .map(|&(n, s, d)| (n, edge(fdg, schema, s, d)))
            .collect();
        let to_number = to_edge.iter().map(|(&n, &e)| (e, n)).collect();
        Self { to_edge, to_number }
    }

    pub fn edges(&self, numbers: &[u32]) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = numbers.iter().map(|n| self.to_edge[n]).collect();
        v.sort();
        v
    }

    pub fn name(&self, e: EdgeId) -> String {
        match self.to_number.get(&e) {
            Some(n) => format!("e{n}"),
            None => format!("#{}", e.0),
        }
    }

    pub fn names(&self, es: &[EdgeId]) -> Vec<String> {
        let mut ns: Vec<(u32, String)> = es
            .iter()
            .map(|e| (self.to_number.get(e).copied().unwrap_or(u32::MAX), self.name(*e)))
            .collect();
        ns.sort();
        ns.into_iter().map(|(_, s)| s).collect()
    }
}

// ---------------------------------------------------------------------------
// Random schemas

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_attrs: usize,
    pub max_relations: usize,
    pub max_forbidden: usize,
    pub max_required: usize,
    pub max_relation_width: usize,
}

impl Shape {
    pub const THEOREM: Shape = Shape {
        max_attrs: 12,
        max_relations: 4,
        max_forbidden: 3,
        max_required: 0,
        max_relation_width: 6,
    };
}

const LETTERS: [&str; 16] = [
    "A", "B", "C", "D", "E", "F", "G", "H", "J", "K", "L", "M", "N", "P", "Q", "S",
];

fn pick<R: Rng>(rng: &mut R, from: &[String], k: usize) -> Vec<String> {
    from.choose_multiple(rng, k.min(from.len())).cloned().collect()
}

pub fn random_raw_schema<R: Rng>(rng: &mut R, shape: Shape) -> RawSchema {
    let n = rng.gen_range(2..=shape.max_attrs.min(LETTERS.len()));
    let names: Vec<String> = LETTERS[..n].iter().map(|s| s.to_string()).collect();
    let rel_count = rng.gen_range(1..=shape.max_relations);
    let mut relations: Vec<RawRelation> = (0..rel_count)
        .map(|i| {
            let w = rng.gen_range(2..=shape.max_relation_width.min(n));
            let attrs = pick(rng, &names, w);
            RawRelation {
                name: format!("R{}", i + 1),
                attributes: attrs,
                primary_key: Vec::new(),
                foreign_keys: Vec::new(),
            }
        })
        .collect();
    for a in &names {
        if !relations.iter().any(|r| r.attributes.contains(a)) && rng.gen_bool(0.5) {
            let i = rng.gen_range(0..relations.len());
            relations[i].attributes.push(a.clone());
        }
    }
    for r in &mut relations {
        let k = rng.gen_range(1..=2.min(r.attributes.len()));
        r.primary_key = r.attributes[..k].to_vec();
    }
    let used: Vec<String> = names
        .iter()
        .filter(|a| relations.iter().any(|r| r.attributes.contains(a)))
        .cloned()
        .collect();

    let mut fds = Vec::new();
    for _ in 0..rng.gen_range(0..=used.len() / 2) {
        let l = if rng.gen_bool(0.7) { 1 } else { 2 };
        let lhs = pick(rng, &used, l);
        let rest: Vec<String> = used.iter().filter(|a| !lhs.contains(a)).cloned().collect();
        if rest.is_empty() {
            continue;
        }
        let r = rng.gen_range(1..=2);
        fds.push(RawFd {
            lhs,
            rhs: pick(rng, &rest, r),
            probabilistic: None,
        });
    }
    if rng.gen_bool(0.5) {
        for r in &relations {
            let rhs: Vec<String> = r
                .attributes
                .iter()
                .filter(|a| !r.primary_key.contains(a))
                .cloned()
                .collect();
            if !rhs.is_empty() {
                fds.push(RawFd {
                    lhs: r.primary_key.clone(),
                    rhs,
                    probabilistic: None,
                });
            }
        }
    }

    let mut forbidden: Vec<Vec<String>> = Vec::new();
    for _ in 0..rng.gen_range(1..=shape.max_forbidden) {
        let k = rng.gen_range(2..=3);
        forbidden.push(pick(rng, &used, k));
    }
    let mut required: Vec<Vec<String>> = Vec::new();
    if shape.max_required > 0 {
        for _ in 0..rng.gen_range(0..=shape.max_required) {
            required.push(pick(rng, &used, 2));
        }
    }
    RawSchema {
        relations,
        fds,
        policy: RawPolicy { forbidden, required },
    }
}

pub fn random_schema<R: Rng>(rng: &mut R, shape: Shape) -> (Schema, Policy) {
    let raw = random_raw_schema(rng, shape);
    let schema = validate_schema(&raw).expect("generated schema is valid");
    let policy = Policy::resolve(&raw.policy, &schema).expect("generated policy is valid");
    (schema, policy)
}

// ---------------------------------------------------------------------------
// Brute-force oracles

/// Every simple path from `from` to `to`, as edge sets, by scanning the raw
/// edge list.
pub fn brute_paths(fdg: &Fdg, from: VertexId, to: VertexId) -> Vec<BTreeSet<EdgeId>> {
    fn go(
        fdg: &Fdg,
        at: VertexId,
        to: VertexId,
        seen: &mut Vec<VertexId>,
        path: &mut Vec<EdgeId>,
        out: &mut Vec<BTreeSet<EdgeId>>,
    ) {
        if at == to {
            out.push(path.iter().copied().collect());
            return;
        }
        for (i, e) in fdg.edges().iter().enumerate() {
            if e.src == at && !seen.contains(&e.dst) {
                seen.push(e.dst);
                path.push(EdgeId(i as u32));
                go(fdg, e.dst, to, seen, path, out);
                path.pop();
                seen.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(fdg, from, to, &mut vec![from], &mut Vec::new(), &mut out);
    out
}

/// Minimal edge sets over every vertex and every choice of one simple path
/// per target.
pub fn brute_join_chains(fdg: &Fdg, targets: &AttributeSet) -> BTreeSet<Vec<EdgeId>> {
    let tv: Vec<VertexId> = targets.iter().map(|a| fdg.attr_vertex(a).unwrap()).collect();
    let mut all: BTreeSet<BTreeSet<EdgeId>> = BTreeSet::new();
    for v in 0..fdg.vertex_count() {
        let v = VertexId(v as u32);
        let per: Vec<Vec<BTreeSet<EdgeId>>> = tv.iter().map(|&t| brute_paths(fdg, v, t)).collect();
        if per.iter().any(|p| p.is_empty()) {
            continue;
        }
        let mut acc: Vec<BTreeSet<EdgeId>> = vec![BTreeSet::new()];
        for paths in &per {
            acc = acc
                .iter()
                .flat_map(|a| paths.iter().map(move |p| a.union(p).copied().collect()))
                .collect();
        }
        all.extend(acc);
    }
    all.iter()
        .filter(|s| !all.iter().any(|o| o.len() < s.len() && o.is_subset(s)))
        .map(|s| s.iter().copied().collect())
        .collect()
}

/// Maximal subsets of `attrs` that contain no forbidden set, by listing the
/// whole power set.
pub fn brute_fragments(attrs: &AttributeSet, forbidden: &[AttributeSet]) -> BTreeSet<AttributeSet> {
    let ids: Vec<AttrId> = attrs.iter().collect();
    let n = ids.len();
    let subset = |m: u32| -> AttributeSet { (0..n).filter(|i| m >> i & 1 == 1).map(|i| ids[i]).collect() };
    let safe: Vec<u32> = (0..1u32 << n)
        .filter(|&m| {
            let s = subset(m);
            !forbidden.iter().any(|f| f.is_subset(&s))
        })
        .collect();
    safe.iter()
        .filter(|&&m| !safe.iter().any(|&o| o != m && o & m == m))
        .map(|&m| subset(m))
        .collect()
}

/// Closure by repeated passes over the FD list until nothing changes.
pub fn naive_closure(start: &AttributeSet, fds: &DecomposedFdSet) -> AttributeSet {
    let mut cur: BTreeSet<AttrId> = start.iter().collect();
    loop {
        let before = cur.len();
        for fd in fds.iter() {
            if fd.lhs.iter().all(|a| cur.contains(&a)) {
                cur.insert(fd.rhs);
            }
        }
        if cur.len() == before {
            return cur.into_iter().collect();
        }
    }
}

/// Reachability in the FDG against attribute closure: the attributes of `X`
/// plus every reachable single-attribute vertex give the closure of `X`, no
/// reachable vertex leaves the closure, and every left-hand-side vertex inside
/// the closure is reachable. Returns the first violation.
pub fn lemma_violation(fdg: &Fdg, fds: &DecomposedFdSet) -> Option<String> {
    let names = fdg.attribute_names();
    for x in 0..fdg.vertex_count() {
        let x = VertexId(x as u32);
        let xa = &fdg.vertex(x).attrs;
        let reach = fdg.reachable_from(x);
        let closure = attribute_closure(xa, fds);
        let mut via: AttributeSet = xa.clone();
        for &y in &reach {
            let ya = &fdg.vertex(y).attrs;
            if !ya.is_subset(&closure) {
                return Some(format!("{} reaches {} outside its closure", xa.label(names), ya.label(names)));
            }
            if ya.len() == 1 {
                via = via.union(ya);
            }
        }
        if via != closure {
            return Some(format!(
                "{}: reachable attributes {} but closure {}",
                xa.label(names),
                via.label(names),
                closure.label(names)
            ));
        }
        for y in 0..fdg.vertex_count() {
            let y = VertexId(y as u32);
            let v = fdg.vertex(y);
            if y != x && v.is_lhs && v.attrs.is_subset(&closure) && !reach.contains(&y) {
                return Some(format!("{} does not reach {}", xa.label(names), v.attrs.label(names)));
            }
        }
    }
    None
}

pub fn non_union(fdg: &Fdg, es: &[EdgeId]) -> Vec<EdgeId> {
    es.iter().copied().filter(|e| fdg.edge(*e).kind != EdgeKind::Union).collect()
}

/// A clause as three literals `(variable, negated)`, variables from 1.
pub type Clause = [(u32, bool); 3];

pub fn brute_sat(vars: u32, clauses: &[Clause]) -> bool {
    (0..1u32 << vars).any(|assign| {
        clauses.iter().all(|c| {
            c.iter().any(|&(v, neg)| (assign >> (v - 1) & 1 == 1) != neg)
        })
    })
}

/// Every formula with `vars` variables and `count` clauses, up to clause order
/// and literal order within a clause.
pub fn canonical_formulas(vars: u32, count: usize) -> Vec<Vec<Clause>> {
    let lits: Vec<(u32, bool)> = (1..=vars).flat_map(|v| [(v, false), (v, true)]).collect();
    let mut clauses: Vec<Clause> = Vec::new();
    for i in 0..lits.len() {
        for j in i..lits.len() {
            for k in j..lits.len() {
                clauses.push([lits[i], lits[j], lits[k]]);
            }
        }
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    fn rec(start: usize, count: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == count {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, count, n, cur, out);
            cur.pop();
        }
    }
    let mut idx = Vec::new();
    rec(0, count, clauses.len(), &mut cur, &mut idx);
    for ids in idx {
        out.push(ids.iter().map(|&i| clauses[i]).collect());
    }
    out
}

/// One relation of width `w` with up to four forbidden sets of one to three
/// of its attributes.
pub fn random_relation<R: Rng>(rng: &mut R, w: usize) -> (Schema, Vec<AttributeSet>) {
    let names: Vec<String> = LETTERS[..w].iter().map(|s| s.to_string()).collect();
    let raw = RawSchema {
        relations: vec![RawRelation {
            name: "R".into(),
            attributes: names.clone(),
            primary_key: names[..1].to_vec(),
            foreign_keys: Vec::new(),
        }],
        fds: Vec::new(),
        policy: RawPolicy::default(),
    };
    let schema = validate_schema(&raw).unwrap();
    let forbidden = (0..rng.gen_range(0..=4))
        .map(|_| {
            let k = rng.gen_range(1..=3.min(w));
            let picked = pick(rng, &names, k);
            schema.set_of(&picked).unwrap()
        })
        .collect();
    (schema, forbidden)
}

/// Schema and policy as one input document, for failure messages.
pub fn case_json(schema: &Schema, policy: &Policy) -> String {
    let mut raw = schema.to_raw();
    raw.policy = policy.to_raw(schema);
    serde_json::to_string(&raw).unwrap()
}
