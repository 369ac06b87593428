//! Random consistency-check instances and a timing harness.
//!
//! Elements are labelled `e0..e{n-1}`. Every chain is drawn uniformly without
//! replacement from all elements using a `ChaCha8Rng` seeded from the
//! experiment seed, so a parameter row always yields the same instance.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{check, CcInstance, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp: Option<String>,
    pub fdg_edges: usize,
    pub edges_per_forbidden_chain: usize,
    pub forbidden_chain_count: usize,
    pub required_set_count: usize,
    pub chains_per_required_set: usize,
    pub edges_per_required_chain: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("{exp}: `{field}` must be positive")]
    NotPositive { exp: String, field: &'static str },
    #[error("{exp}: `{field}` = {value} exceeds fdg_edges = {edges}")]
    ChainTooLong {
        exp: String,
        field: &'static str,
        value: usize,
        edges: usize,
    },
    #[error("invalid grid: {0}")]
    Json(String),
}

impl BenchParams {
    pub fn name(&self, index: usize) -> String {
        self.exp.clone().unwrap_or_else(|| format!("exp{}", index + 1))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let exp = self.name(0);
        let counts = [
            ("fdg_edges", self.fdg_edges),
            ("edges_per_forbidden_chain", self.edges_per_forbidden_chain),
            ("forbidden_chain_count", self.forbidden_chain_count),
            ("required_set_count", self.required_set_count),
            ("chains_per_required_set", self.chains_per_required_set),
            ("edges_per_required_chain", self.edges_per_required_chain),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(BenchError::NotPositive { exp, field });
            }
        }
        for (field, value) in [
            ("edges_per_forbidden_chain", self.edges_per_forbidden_chain),
            ("edges_per_required_chain", self.edges_per_required_chain),
        ] {
            if value > self.fdg_edges {
                return Err(BenchError::ChainTooLong {
                    exp,
                    field,
                    value,
                    edges: self.fdg_edges,
                });
            }
        }
        Ok(())
    }
}

/// Parse a JSON array of parameter rows. A blank file is an empty grid.
pub fn parse_grid(text: &str) -> Result<Vec<BenchParams>, BenchError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let grid: Vec<BenchParams> =
        serde_json::from_str(text).map_err(|e| BenchError::Json(e.to_string()))?;
    for p in &grid {
        p.validate()?;
    }
    Ok(grid)
}

pub fn generate_instance(params: &BenchParams) -> Result<CcInstance, BenchError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.fdg_edges;
    let mut chain = |k: usize| -> Vec<u32> {
        sample(&mut rng, n, k).into_iter().map(|i| i as u32).collect()
    };
    let forbidden: Vec<Vec<u32>> = (0..params.forbidden_chain_count)
        .map(|_| chain(params.edges_per_forbidden_chain))
        .collect();
    let required: Vec<Vec<Vec<u32>>> = (0..params.required_set_count)
        .map(|_| {
            (0..params.chains_per_required_set)
                .map(|_| chain(params.edges_per_required_chain))
                .collect()
        })
        .collect();
    let labels = (0..n).map(|i| format!("e{i}")).collect();
    Ok(CcInstance::new(labels, forbidden, required).expect("sampled elements are in range"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Consistent,
    Inconsistent,
    TimedOut,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Consistent => "true",
            Outcome::Inconsistent => "false",
            Outcome::TimedOut => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub exp: String,
    pub params: BenchParams,
    pub strategy: Strategy,
    pub duration: Duration,
    pub outcome: Outcome,
    pub work: u64,
}

/// Run every strategy on every grid row. Rows come out in grid order, with
/// the strategies of one row in the order given.
pub fn run_benchmark(
    grid: &[BenchParams],
    strategies: &[Strategy],
    timeout: Duration,
) -> Result<Vec<BenchResult>, BenchError> {
    let mut out = Vec::with_capacity(grid.len() * strategies.len());
    for (i, params) in grid.iter().enumerate() {
        let instance = generate_instance(params)?;
        for &strategy in strategies {
            let start = Instant::now();
            let res = check(&instance, strategy, Some(start + timeout));
            let duration = start.elapsed();
            let (outcome, work) = match res {
                Ok(r) if r.consistent => (Outcome::Consistent, r.work),
                Ok(r) => (Outcome::Inconsistent, r.work),
                Err(_) => (Outcome::TimedOut, 0),
            };
            out.push(BenchResult {
                exp: params.name(i),
                params: params.clone(),
                strategy,
                duration,
                outcome,
                work,
            });
        }
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 11] = [
    "exp",
    "strategy",
    "fdg_edges",
    "edges_per_forbidden_chain",
    "forbidden_chain_count",
    "required_set_count",
    "chains_per_required_set",
    "edges_per_required_chain",
    "seed",
    "duration_ms",
    "consistent",
];

pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        let p = &r.params;
        w.write_record([
            r.exp.clone(),
            r.strategy.to_string(),
            p.fdg_edges.to_string(),
            p.edges_per_forbidden_chain.to_string(),
            p.forbidden_chain_count.to_string(),
            p.required_set_count.to_string(),
            p.chains_per_required_set.to_string(),
            p.edges_per_required_chain.to_string(),
            p.seed.to_string(),
            format!("{:.3}", r.duration.as_secs_f64() * 1e3),
            r.outcome.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
