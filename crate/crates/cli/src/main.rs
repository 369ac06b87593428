use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fdcut::bench::{parse_grid, run_benchmark, write_csv};
use fdcut::consistency::{check, CcInstance, Strategy};
use fdcut::decompose::DEFAULT_WIDTH_BOUND;
use fdcut::fdg::{build_fdg, export_dot};
use fdcut::joinchain::{join_chains, PathLimits};
use fdcut::pipeline::{secure_decompose, PipelineError, PipelineOptions};
use fdcut::schema::{load, preprocess_policy, AttributeSet, PolicyError};

const EXIT_INPUT: u8 = 1;
const EXIT_INCONSISTENT: u8 = 2;
const EXIT_UNVERIFIED: u8 = 3;

#[derive(Parser)]
#[command(name = "fdcut", version, about = "Secure decomposition of relational external schemas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct LimitArgs {
    /// Maximum simple paths recorded per end vertex
    #[arg(long, default_value_t = 10_000)]
    max_paths: usize,
    /// Maximum path length in edges (default: number of vertices)
    #[arg(long)]
    max_path_length: Option<usize>,
}

impl LimitArgs {
    fn limits(&self) -> Result<PathLimits> {
        if self.max_paths == 0 || self.max_path_length == Some(0) {
            bail!("path limits must be positive");
        }
        Ok(PathLimits {
            max_paths_per_target: self.max_paths,
            max_path_length: self.max_path_length,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a schema so that forbidden sets cannot be associated
    Decompose {
        file: PathBuf,
        #[arg(long, default_value = "auto")]
        strategy: Strategy,
        /// Write the report JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write CREATE VIEW statements for the fragments
        #[arg(long)]
        sql: Option<PathBuf>,
        /// Write the FDG with the cut edges highlighted
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
        /// Widest relation that may be decomposed
        #[arg(long, default_value_t = DEFAULT_WIDTH_BOUND)]
        max_width: usize,
        /// Stop after the first cut even if verification fails
        #[arg(long)]
        no_refine: bool,
    },
    /// Run the consistency check on an abstract chain instance
    Check {
        file: PathBuf,
        #[arg(long, default_value = "auto")]
        strategy: Strategy,
    },
    /// List the join chains of an attribute set
    Chains {
        file: PathBuf,
        /// Comma-separated attribute names
        #[arg(long, value_delimiter = ',', required = true)]
        set: Vec<String>,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Time the consistency strategies on a grid of random instances
    Bench {
        grid: PathBuf,
        /// Comma-separated strategies (I, II, auto)
        #[arg(long, value_delimiter = ',', default_value = "I,II")]
        strategies: Vec<Strategy>,
        /// Per-instance timeout in seconds
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        /// Write CSV here instead of stdout
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the FDG of a schema in DOT format
    ExportDot {
        file: PathBuf,
        /// Highlight the edges cut by the decomposition
        #[arg(long)]
        highlight_cut: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Decompose {
            file,
            strategy,
            out,
            sql,
            dot,
            limits,
            max_width,
            no_refine,
        } => {
            let (schema, policy) = load(&read(&file)?)?;
            let options = PipelineOptions {
                limits: limits.limits()?,
                strategy,
                width_bound: max_width,
                refine: !no_refine,
                timeout: None,
            };
            let report = match secure_decompose(&schema, &policy, &options) {
                Err(PipelineError::Policy(e @ PolicyError::RequiredUsesRemoved { .. })) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_INCONSISTENT);
                }
                r => r?,
            };
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(out.as_deref(), &report.to_json())?;
            if let Some(p) = sql {
                write(&p, &report.result.to_sql(&report.schema))?;
            }
            if let Some(p) = dot {
                write(&p, &export_dot(&report.fdg, &report.cut.edges))?;
            }
            if out.is_some() {
                println!("{}", report.summary());
            } else {
                eprintln!("{}", report.summary());
            }
            Ok(if !report.consistent {
                EXIT_INCONSISTENT
            } else if !report.security_verified || report.required_verified.iter().any(|(_, ok)| !ok) {
                EXIT_UNVERIFIED
            } else {
                0
            })
        }
        Command::Check { file, strategy } => {
            let instance = CcInstance::from_json(&read(&file)?)?;
            let result = check(&instance, strategy, None)?;
            emit(None, &serde_json::to_string(&result.to_raw(&instance))?)?;
            Ok(if result.consistent { 0 } else { EXIT_INCONSISTENT })
        }
        Command::Chains { file, set, limits } => {
            let (schema, policy) = load(&read(&file)?)?;
            let schema = preprocess_policy(&schema, &policy)?.schema;
            let mut targets = Vec::with_capacity(set.len());
            for name in &set {
                let name = name.trim();
                match schema.attr(name) {
                    Some(a) => targets.push(a),
                    None => bail!("unknown attribute `{name}`"),
                }
            }
            let targets: AttributeSet = targets.into_iter().collect();
            if targets.len() == 1 {
                eprintln!("warning: a single attribute is its own ancestor; the only chain is empty");
            }
            let fdg = build_fdg(&schema);
            let family = join_chains(&fdg, &targets, &limits.limits()?)?;
            if family.truncated {
                eprintln!("warning: path enumeration truncated at the configured limits");
            }
            let chains: Vec<serde_json::Value> = family
                .chains
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "ancestor": fdg.vertex_label(c.ancestor),
                        "edges": c.edges.iter().map(|&e| fdg.edge_label(e)).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let out = serde_json::json!({
                "set": schema.names_of(&targets),
                "chains": chains,
                "truncated": family.truncated,
            });
            emit(None, &serde_json::to_string_pretty(&out)?)?;
            Ok(0)
        }
        Command::Bench {
            grid,
            strategies,
            timeout,
            csv,
        } => {
            if !(timeout.is_finite() && timeout > 0.0) {
                bail!("timeout must be a positive number of seconds");
            }
            let grid = parse_grid(&read(&grid)?)?;
            let results = run_benchmark(&grid, &strategies, Duration::from_secs_f64(timeout))?;
            let mut buf = Vec::new();
            write_csv(&results, &mut buf)?;
            emit(csv.as_deref(), &String::from_utf8(buf)?)?;
            Ok(0)
        }
        Command::ExportDot {
            file,
            highlight_cut,
            out,
        } => {
            let (schema, policy) = load(&read(&file)?)?;
            let dot = if highlight_cut {
                let report = secure_decompose(&schema, &policy, &PipelineOptions::default())?;
                export_dot(&report.fdg, &report.cut.edges)
            } else {
                let schema = preprocess_policy(&schema, &policy)?.schema;
                export_dot(&build_fdg(&schema), &[])
            };
            emit(out.as_deref(), &dot)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
