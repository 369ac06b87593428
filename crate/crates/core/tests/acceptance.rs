//! Acceptance run: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fdcut::bench::{parse_grid, run_benchmark, Outcome};
use fdcut::closure::decompose_fds;
use fdcut::consistency::{check, reduce_3sat, validate_cut, CcInstance, Literal, Strategy, ThreeSatFormula};
use fdcut::cut::{greedy_cut, greedy_order, is_hitting_set, minimum_cut_oracle, security_counts, OracleError};
use fdcut::decompose::{decompose_relation, strong_cut_decompose, Fragment, DEFAULT_WIDTH_BOUND};
use fdcut::fdg::{build_fdg, EdgeId, Fdg};
use fdcut::joinchain::{join_chains, PathLimits};
use fdcut::pipeline::{secure_decompose, verify_decomposition, PipelineOptions};
use fdcut::schema::{preprocess_policy, AttributeSet, Policy, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fragment_view(schema: &Schema, frags: &[Fragment]) -> BTreeSet<(String, String)> {
    frags
        .iter()
        .map(|f| (f.source.clone(), f.attrs.label(schema.attribute_names())))
        .collect()
}

fn expected_fragments(schema: &Schema, listing: &[(&str, &str)]) -> BTreeSet<(String, String)> {
    listing
        .iter()
        .map(|(r, a)| (r.to_string(), set(schema, a).label(schema.attribute_names())))
        .collect()
}

fn show(view: &BTreeSet<(String, String)>) -> String {
    view.iter().map(|(r, a)| format!("{r}:{a}")).collect::<Vec<_>>().join(" ")
}

fn prepared(name: &str) -> (Schema, Policy, Fdg) {
    let (schema, policy) = load_fixture(name);
    let pre = preprocess_policy(&schema, &policy).unwrap();
    let fdg = build_fdg(&pre.schema);
    (pre.schema, pre.policy, fdg)
}

fn ac1() -> Result<String, String> {
    let (schema, _, fdg) = prepared("example1.json");
    let names = schema.attribute_names();
    let label = |s: &str| set(&schema, s).label(names);
    let want_v: BTreeSet<String> = [
        "A", "B", "C", "D", "E", "F", "G", "H", "ABCD", "EFGH", "AE", "HD",
    ]
    .iter()
    .map(|s| label(s))
    .collect();
    let mut want_e: BTreeSet<(String, String)> = BTreeSet::new();
    for (src, dsts) in [
        ("EFGH", "EFGH"),
        ("E", "FGH"),
        ("H", "FGE"),
        ("ABCD", "ABCD"),
        ("A", "BCD"),
        ("D", "BCA"),
        ("AE", "AE"),
        ("HD", "HD"),
    ] {
        for d in dsts.chars() {
            want_e.insert((label(src), label(&d.to_string())));
        }
    }
    let got_v: BTreeSet<String> = fdg.vertex_ids().map(|v| fdg.vertex_label(v)).collect();
    let got_e: BTreeSet<(String, String)> = fdg
        .edges()
        .iter()
        .map(|e| (fdg.vertex_label(e.src), fdg.vertex_label(e.dst)))
        .collect();
    ensure(got_v == want_v, || {
        format!("vertices differ: extra {:?}, missing {:?}", got_v.difference(&want_v).collect::<Vec<_>>(), want_v.difference(&got_v).collect::<Vec<_>>())
    })?;
    ensure(fdg.edge_count() == 24 && got_e == want_e, || {
        format!(
            "{} edges; extra {:?}, missing {:?}",
            fdg.edge_count(),
            got_e.difference(&want_e).collect::<Vec<_>>(),
            want_e.difference(&got_e).collect::<Vec<_>>()
        )
    })?;
    Ok(format!("{} vertices, {} edges", got_v.len(), got_e.len()))
}

fn example1_chains(schema: &Schema, fdg: &Fdg) -> BTreeSet<Vec<EdgeId>> {
    let jc: [&[(&str, &str)]; 8] = [
        &[("AE", "E"), ("E", "F"), ("AE", "A"), ("A", "B")],
        &[("HD", "H"), ("H", "F"), ("HD", "D"), ("D", "B")],
        &[("AE", "E"), ("E", "H"), ("H", "F"), ("AE", "A"), ("A", "D"), ("D", "B")],
        &[("AE", "E"), ("E", "H"), ("H", "F"), ("AE", "A"), ("A", "B")],
        &[("AE", "E"), ("E", "F"), ("AE", "A"), ("A", "D"), ("D", "B")],
        &[("HD", "H"), ("H", "E"), ("E", "F"), ("HD", "D"), ("D", "A"), ("A", "B")],
        &[("HD", "H"), ("H", "F"), ("HD", "D"), ("D", "A"), ("A", "B")],
        &[("HD", "H"), ("H", "E"), ("E", "F"), ("HD", "D"), ("D", "B")],
    ];
    jc.iter().map(|pairs| edges(fdg, schema, pairs)).collect()
}

/// JC1..JC11 of Example-2 by edge number, grouped by forbidden set.
const EXAMPLE2_CHAINS: [(&str, &[&[u32]]); 3] = [
    ("AD", &[&[8], &[10, 12], &[4, 5], &[6, 12, 4], &[5, 6, 9], &[9, 12]]),
    ("DF", &[&[1, 2, 8, 14], &[1, 2, 10, 12, 14]]),
    ("KH", &[&[23, 25, 29], &[19, 22, 29], &[20, 22, 23, 29]]),
];

fn example2_listed_chains(num: &Numbering) -> Vec<Vec<EdgeId>> {
    EXAMPLE2_CHAINS
        .iter()
        .flat_map(|(_, cs)| cs.iter().map(|c| num.edges(c)))
        .collect()
}

fn ac2() -> Result<String, String> {
    let (schema, _, fdg) = prepared("example1.json");
    let fam = join_chains(&fdg, &set(&schema, "FB"), &PathLimits::default()).unwrap();
    let got: BTreeSet<Vec<EdgeId>> = fam.edge_sets().into_iter().collect();
    let want = example1_chains(&schema, &fdg);
    ensure(!fam.truncated && fam.len() == 8 && got == want, || {
        let lbl = |c: &Vec<EdgeId>| c.iter().map(|&e| fdg.edge_label(e)).collect::<Vec<_>>().join(",");
        format!(
            "Example-1 {{F,B}}: {} chains; extra [{}]; missing [{}]",
            fam.len(),
            got.difference(&want).map(lbl).collect::<Vec<_>>().join("; "),
            want.difference(&got).map(lbl).collect::<Vec<_>>().join("; ")
        )
    })?;

    let (schema, _, fdg) = prepared("example2.json");
    let num = Numbering::example2(&fdg, &schema);
    let mut problems = Vec::new();
    let mut total = 0;
    for (sd, chains) in EXAMPLE2_CHAINS {
        let fam = join_chains(&fdg, &set(&schema, sd), &PathLimits::default()).unwrap();
        total += fam.len();
        let got: BTreeSet<Vec<EdgeId>> = fam.edge_sets().into_iter().collect();
        let want: BTreeSet<Vec<EdgeId>> = chains.iter().map(|c| num.edges(c)).collect();
        if fam.truncated || got != want {
            let fmt = |s: BTreeSet<&Vec<EdgeId>>| {
                s.into_iter().map(|c| format!("{{{}}}", num.names(c).join(","))).collect::<Vec<_>>().join(" ")
            };
            problems.push(format!(
                "{{{sd}}}: {} chains, extra {} missing {}",
                fam.len(),
                fmt(got.difference(&want).collect()),
                fmt(want.difference(&got).collect())
            ));
        }
    }
    ensure(problems.is_empty(), || format!("Example-2 has {total} chains, expected 11: {}", problems.join("; ")))?;
    Ok("Example-1 {F,B}: 8 chains; Example-2: 11 chains".into())
}

fn ac3() -> Result<String, String> {
    let (schema, _, fdg) = prepared("example2.json");
    let num = Numbering::example2(&fdg, &schema);
    let chains = example2_listed_chains(&num);
    let counts = security_counts(&chains, &fdg);
    let rows: [(u32, usize); 10] = [(12, 4), (29, 3), (8, 2), (9, 2), (10, 2), (14, 2), (23, 2), (1, 2), (2, 2), (4, 2)];
    for (n, c) in rows {
        let got = counts[num.to_edge[&n].index()].security_count;
        ensure(got == c, || format!("e{n}: security count {got}, expected {c}"))?;
    }
    let max_other = counts
        .iter()
        .filter(|s| !rows.iter().any(|(n, _)| num.to_edge[n] == s.edge))
        .map(|s| s.security_count)
        .max()
        .unwrap_or(0);
    ensure(max_other <= 2, || format!("an edge outside the table has count {max_other}"))?;
    let order: Vec<String> = greedy_order(&chains, &fdg).iter().take(2).map(|s| num.name(s.edge)).collect();
    ensure(order == ["e12", "e29"], || format!("greedy order starts {order:?}"))?;
    let cut = greedy_cut(&chains, &fdg);
    let picked: Vec<String> = cut.edges.iter().map(|&e| num.name(e)).collect();
    ensure(picked == ["e12", "e29", "e8", "e9", "e4"], || format!("selection {picked:?}"))?;
    ensure(is_hitting_set(&cut, &chains), || "selection leaves a chain unbroken".into())?;
    Ok(format!("selection {}", picked.join(",")))
}

fn ac4() -> Result<String, String> {
    let mut notes = Vec::new();
    let mut problems = Vec::new();

    let (schema, policy) = load_fixture("example2.json");
    let report = secure_decompose(&schema, &policy, &PipelineOptions::default()).unwrap();
    let got = fragment_view(&report.schema, &report.result.fragments);
    let want = expected_fragments(
        &report.schema,
        &[("R1", "AC"), ("R1", "BC"), ("R1", "CD"), ("R2", "EFG"), ("R3", "AEM"), ("R4", "JL"), ("R4", "KL"), ("R5", "MHRJ")],
    );
    if got == want {
        notes.push("Example-2 relaxed ok".to_string());
    } else {
        problems.push(format!("Example-2 relaxed: got {} expected {}", show(&got), show(&want)));
    }

    let fds = decompose_fds(&schema.fds);
    let strong = strong_cut_decompose(&schema, &policy.forbidden, &fds, DEFAULT_WIDTH_BOUND).unwrap();
    let got = fragment_view(&schema, &strong.fragments);
    let want = expected_fragments(
        &schema,
        &[
            ("R1", "AC"), ("R1", "BC"), ("R1", "CD"), ("R2", "EG"), ("R2", "FG"), ("R3", "AEM"),
            ("R4", "JL"), ("R4", "KL"), ("R5", "MRJ"), ("R5", "JRH"),
        ],
    );
    if got == want {
        notes.push("Example-2 strong ok".to_string());
    } else {
        problems.push(format!("Example-2 strong: got {} expected {}", show(&got), show(&want)));
    }

    let (schema, policy) = load_fixture("example0.json");
    let fds = decompose_fds(&schema.fds);
    let strong = strong_cut_decompose(&schema, &policy.forbidden, &fds, DEFAULT_WIDTH_BOUND).unwrap();
    let got = fragment_view(&schema, &strong.fragments);
    let want = expected_fragments(&schema, &[("Rk", "AD"), ("Rk", "BD"), ("Rk", "CD")]);
    if got == want {
        notes.push("intro strong ok".to_string());
    } else {
        problems.push(format!("intro strong: got {} expected {}", show(&got), show(&want)));
    }

    let report = secure_decompose(&schema, &policy, &PipelineOptions::default()).unwrap();
    let got = fragment_view(&report.schema, &report.result.fragments);
    let two_a = expected_fragments(&schema, &[("Rk", "ACD"), ("Rk", "BD")]);
    let two_b = expected_fragments(&schema, &[("Rk", "ABD"), ("Rk", "CD")]);
    if got == two_a || got == two_b {
        notes.push("intro relaxed ok".to_string());
    } else {
        problems.push(format!(
            "intro relaxed: got {} ({} fragments, cut {}), expected {} or {}",
            show(&got),
            got.len(),
            report.cut_labels().join(","),
            show(&two_a),
            show(&two_b)
        ));
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(notes.join(", "))
}

fn ac5() -> Result<String, String> {
    let options = PipelineOptions::default();
    let mut refined = 0;
    let mut rounds = 0;
    let mut run = |schema: &Schema, policy: &Policy| -> Result<(), String> {
        let report = secure_decompose(schema, policy, &options)
            .map_err(|e| format!("{e} on {}", case_json(schema, policy)))?;
        let v = verify_decomposition(&report.result, &report.schema, &policy_after(schema, policy));
        ensure(report.security_verified && v.secure, || {
            format!("insecure output ({}) on {}", report.summary(), case_json(schema, policy))
        })?;
        if report.refinement_rounds > 0 {
            refined += 1;
            rounds += report.refinement_rounds;
        }
        Ok(())
    };
    for f in ["example0.json", "example1.json", "example2.json"] {
        let (s, p) = load_fixture(f);
        run(&s, &p)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let cases = 600;
    for _ in 0..cases {
        let (s, p) = random_schema(&mut rng, Shape::THEOREM);
        run(&s, &p)?;
    }
    Ok(format!("3 examples + {cases} random schemas secure; {refined} needed refinement ({rounds} rounds)"))
}

fn policy_after(schema: &Schema, policy: &Policy) -> Policy {
    preprocess_policy(schema, policy).unwrap().policy
}

fn ac6() -> Result<String, String> {
    let (schema, policy, fdg) = prepared("example2.json");
    let chains: Vec<Vec<EdgeId>> = policy
        .forbidden
        .iter()
        .flat_map(|f| join_chains(&fdg, f, &PathLimits::default()).unwrap().edge_sets())
        .collect();
    let num = Numbering::example2(&fdg, &schema);
    let opt = minimum_cut_oracle(&chains, &fdg, 24).map_err(|e| e.to_string())?;
    let greedy = greedy_cut(&chains, &fdg);
    ensure(is_hitting_set(&opt, &chains) && is_hitting_set(&greedy, &chains), || "invalid cut on Example-2".into())?;
    ensure(opt.len() == 4 && greedy.len() == 5, || {
        format!(
            "Example-2: oracle {} {:?}, greedy {} {:?}",
            opt.len(),
            num.names(&opt.edges),
            greedy.len(),
            num.names(&greedy.edges)
        )
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1e);
    let shape = Shape {
        max_attrs: 8,
        max_relations: 3,
        max_forbidden: 3,
        max_required: 0,
        max_relation_width: 5,
    };
    let (mut done, mut gaps, mut tries) = (0, 0, 0);
    while done < 250 {
        tries += 1;
        ensure(tries < 100_000, || format!("only {done} instances within oracle bounds"))?;
        let (s, p) = random_schema(&mut rng, shape);
        let Ok(pre) = preprocess_policy(&s, &p) else { continue };
        let g = build_fdg(&pre.schema);
        let chains: Vec<Vec<EdgeId>> = pre
            .policy
            .forbidden
            .iter()
            .flat_map(|f| join_chains(&g, f, &PathLimits::default()).unwrap().edge_sets())
            .collect();
        if chains.is_empty() {
            continue;
        }
        let opt = match minimum_cut_oracle(&chains, &g, 24) {
            Ok(c) => c,
            Err(OracleError::TooManyEdges { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let greedy = greedy_cut(&chains, &g);
        ensure(is_hitting_set(&greedy, &chains), || format!("greedy invalid on {}", case_json(&s, &p)))?;
        ensure(is_hitting_set(&opt, &chains), || format!("oracle invalid on {}", case_json(&s, &p)))?;
        ensure(greedy.len() >= opt.len(), || format!("greedy below optimum on {}", case_json(&s, &p)))?;
        if greedy.len() > opt.len() {
            gaps += 1;
        }
        done += 1;
    }
    Ok(format!("Example-2 oracle 4 vs greedy 5; {done} random instances valid, {gaps} with a gap"))
}

fn cc(name: &str) -> CcInstance {
    CcInstance::from_json(&fixture(name)).unwrap()
}

fn ac7() -> Result<String, String> {
    let first = cc("cc_consistent.json");
    let second = cc("cc_inconsistent.json");
    let ag: Vec<u32> = ["a", "g"]
        .iter()
        .map(|n| first.labels.iter().position(|l| l == n).unwrap() as u32)
        .collect();
    ensure(validate_cut(&ag, &first).is_some(), || "{a,g} does not validate".into())?;
    for s in [Strategy::RequiredFirst, Strategy::ForbiddenFirst, Strategy::Auto] {
        let r = check(&first, s, None).unwrap();
        ensure(r.consistent, || format!("{s}: first instance reported inconsistent"))?;
        let cut = r.cut.clone().unwrap_or_default();
        ensure(validate_cut(&cut, &first).is_some(), || format!("{s}: cut {:?} does not validate", first.names(&cut)))?;
        let r = check(&second, s, None).unwrap();
        ensure(!r.consistent, || format!("{s}: second instance reported consistent"))?;
    }
    Ok("instance 1 consistent, instance 2 inconsistent under I, II and auto".into())
}

fn ac8() -> Result<String, String> {
    let mut n = 0usize;
    let mut sat = 0usize;
    for vars in 1..=3u32 {
        for count in 0..=3 {
            for f in canonical_formulas(vars, count) {
                let clauses = f
                    .iter()
                    .map(|c| c.map(|(v, neg)| if neg { Literal::neg(v) } else { Literal::pos(v) }))
                    .collect();
                let formula = ThreeSatFormula::new(vars, clauses).unwrap();
                let inst = reduce_3sat(&formula);
                let truth = brute_sat(vars, &f);
                for s in [Strategy::RequiredFirst, Strategy::ForbiddenFirst] {
                    let r = check(&inst, s, None).unwrap();
                    ensure(r.consistent == truth, || format!("{s} on {f:?}: consistent={} but satisfiable={truth}", r.consistent))?;
                    if let Some(cut) = &r.cut {
                        ensure(validate_cut(cut, &inst).is_some(), || format!("{s} on {f:?}: cut does not validate"))?;
                    }
                }
                n += 1;
                sat += truth as usize;
            }
        }
    }
    Ok(format!("{n} formulas ({sat} satisfiable), zero mismatches"))
}

fn ac9() -> Result<String, String> {
    let limit = Duration::from_secs(1);
    let mut slowest = (String::new(), Duration::ZERO);
    let mut rows = 0;
    for (file, strategy) in [("table2.json", Strategy::RequiredFirst), ("table3.json", Strategy::ForbiddenFirst)] {
        let grid = parse_grid(&fixture(file)).map_err(|e| e.to_string())?;
        let results = run_benchmark(&grid, &[strategy], limit).map_err(|e| e.to_string())?;
        for r in results {
            rows += 1;
            ensure(r.outcome != Outcome::TimedOut && r.duration < limit, || {
                format!("{file} {} under {}: {} after {:?}", r.exp, r.strategy, r.outcome.as_str(), r.duration)
            })?;
            if r.duration > slowest.1 {
                slowest = (format!("{file} {} ({})", r.exp, r.strategy), r.duration);
            }
        }
    }
    Ok(format!("{rows} instances, slowest {} at {:.1} ms", slowest.0, slowest.1.as_secs_f64() * 1e3))
}

fn ac10() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb007e);
    let cases = 250;

    for i in 0..cases {
        let w = rng.gen_range(1..=10);
        let (schema, forbidden) = random_relation(&mut rng, w);
        let rel = &schema.relations[0];
        let got: BTreeSet<AttributeSet> = decompose_relation(rel, &forbidden, DEFAULT_WIDTH_BOUND)
            .unwrap()
            .into_iter()
            .map(|f| f.attrs)
            .collect();
        let want = brute_fragments(&rel.attributes, &forbidden);
        ensure(got == want, || {
            let policy = Policy {
                forbidden: forbidden.clone(),
                required: Vec::new(),
            };
            format!("decompose case {i}: {}", case_json(&schema, &policy))
        })?;
    }

    let small = Shape {
        max_attrs: 5,
        max_relations: 2,
        max_forbidden: 2,
        max_required: 0,
        max_relation_width: 4,
    };
    let limits = PathLimits {
        max_paths_per_target: 1_000_000,
        max_path_length: None,
    };
    let mut done = 0;
    while done < cases {
        let (s, p) = random_schema(&mut rng, small);
        let g = build_fdg(&s);
        if g.vertex_count() > 10 {
            continue;
        }
        for f in &p.forbidden {
            let fam = join_chains(&g, f, &limits).unwrap();
            let got: BTreeSet<Vec<EdgeId>> = fam.edge_sets().into_iter().collect();
            ensure(!fam.truncated && got == brute_join_chains(&g, f), || {
                format!("join chains of {:?} on {}", s.names_of(f), case_json(&s, &p))
            })?;
        }
        done += 1;
    }

    let mid = Shape {
        max_attrs: 7,
        max_relations: 3,
        max_forbidden: 1,
        max_required: 0,
        max_relation_width: 4,
    };
    let mut done = 0;
    while done < cases {
        let (s, _) = random_schema(&mut rng, mid);
        let g = build_fdg(&s);
        if g.vertex_count() > 12 {
            continue;
        }
        if let Some(v) = lemma_violation(&g, &decompose_fds(&s.fds)) {
            return Err(format!("reachability vs closure: {v} on {}", case_json(&s, &Policy::default())));
        }
        done += 1;
    }
    Ok(format!("{cases} cases each: fragments, join chains, reachability"))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, u64, Check); 10] = [
        ("AC1", "FDG of Example-1", 1, ac1),
        ("AC2", "join chains of the examples", 1, ac2),
        ("AC3", "greedy selection table", 1, ac3),
        ("AC4", "decomposition listings", 1, ac4),
        ("AC5", "decompositions are secure", 60, ac5),
        ("AC6", "greedy against exact minimum cut", 60, ac6),
        ("AC7", "consistency of the worked instances", 1, ac7),
        ("AC8", "3SAT reduction against brute force", 60, ac8),
        ("AC9", "benchmark grids within 1 s per instance", 60, ac9),
        ("AC10", "brute-force equivalences", 120, ac10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, what, secs, f) in criteria {
        let start = Instant::now();
        let res = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let budget = Duration::from_secs(secs);
        let (ok, detail) = match res {
            Ok(d) if took < budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {secs} s budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{id:<5} {} {what} [{:.3} s / {secs} s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
