//! `margmap`: solve, verify, generate and benchmark marginal MAP problems.

mod bench;
mod config;
mod generate;
mod report;
mod run;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use margmap_core::oracle::{brute_force_mmap_capped, DEFAULT_CAP};

use crate::config::RunConfig;
use crate::generate::{summary, write_problem, GridArgs, KnapsackArgs};
use crate::report::{ScaledValue, Status};
use crate::run::{load_problem, run_problem, write_atomic};

#[derive(Parser)]
#[command(name = "margmap", version, about = "Anytime marginal MAP inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the anytime solver and write a JSON report.
    Solve {
        /// Model in UAI format.
        #[arg(long)]
        model: PathBuf,
        /// Query file listing the decision variables and any evidence.
        #[arg(long)]
        query: PathBuf,
        /// Additional evidence file.
        #[arg(long)]
        evid: Option<PathBuf>,
        #[command(flatten)]
        config: RunConfig,
        /// Accepted for symmetry with the generators; the solver is
        /// deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve by exhaustive enumeration.
    Oracle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        evid: Option<PathBuf>,
        /// Largest number of joint configurations to enumerate.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic benchmark model and query.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Run every instance of a JSON benchmark spec.
    Bench {
        spec: PathBuf,
        /// Directory for per-instance reports and `trace.csv`.
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Rectangular grid.
    Grid {
        #[command(flatten)]
        args: GridArgs,
        /// Writes `<output>.uai` and `<output>.query`.
        #[arg(long)]
        output: PathBuf,
    },
    /// Multiple knapsack chain.
    Knapsack {
        #[command(flatten)]
        args: KnapsackArgs,
        #[arg(long)]
        output: PathBuf,
    },
}

fn emit(value: &impl serde::Serialize, output: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match output {
        Some(path) => write_atomic(path, json.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{json}").context("writing to stdout")
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { model, query, evid, config, seed: _, output } => {
            let problem = load_problem(&model, &query, evid.as_deref())?;
            let report = run_problem(&problem, &config)?;
            emit(&report, output.as_deref())?;
            Ok(match report.status {
                Status::Converged => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            })
        }
        Command::Oracle { model, query, evid, cap, output } => {
            let problem = load_problem(&model, &query, evid.as_deref())?;
            let (z_star, argmax) = brute_force_mmap_capped(&problem, cap)?;
            let argmax: Vec<_> = argmax
                .iter()
                .map(|d| d.iter().map(|(v, &s)| (v.0, s)).collect::<std::collections::BTreeMap<_, _>>())
                .collect();
            emit(&serde_json::json!({ "z_star": ScaledValue::from(z_star), "argmax": argmax }), output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { family } => {
            let (problem, output, mut info) = match family {
                Family::Grid { args, output } => {
                    let p = args.build()?;
                    let info = summary(&p);
                    (p, output, info)
                }
                Family::Knapsack { args, output } => {
                    let k = args.build()?;
                    let mut info = summary(&k.problem);
                    info["weights"] = serde_json::json!(k.weights);
                    info["profits"] = serde_json::json!(k.profits);
                    info["capacity"] = serde_json::json!(k.capacity);
                    info["profit_scale"] = serde_json::json!(k.profit_scale);
                    (k.problem, output, info)
                }
            };
            write_problem(&problem, &output).with_context(|| format!("writing {}", output.display()))?;
            info["model"] = serde_json::json!(generate::suffixed(&output, "uai"));
            info["query"] = serde_json::json!(generate::suffixed(&output, "query"));
            emit(&info, None)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { spec, output } => {
            let s = bench::run_bench(&spec, &output)?;
            eprintln!("{} instances, {} failed", s.total, s.failed);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
