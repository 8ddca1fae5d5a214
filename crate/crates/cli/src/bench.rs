use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use margmap_core::MmapProblem;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::generate::{GridArgs, KnapsackArgs};
use crate::report::{RunReport, Status};
use crate::run::{load_problem, run_problem, write_atomic};

/// A benchmark: a default solver configuration and the instances to run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(default)]
    pub config: RunConfig,
    pub instances: Vec<Instance>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub source: Source,
    /// Replaces the benchmark-wide configuration for this instance.
    #[serde(default)]
    pub config: Option<RunConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Grid(GridArgs),
    Knapsack(KnapsackArgs),
    Files { model: PathBuf, query: PathBuf, evid: Option<PathBuf> },
}

impl Source {
    /// Relative file paths resolve against `base`.
    fn load(&self, base: &Path) -> Result<MmapProblem> {
        match self {
            Source::Grid(g) => g.build(),
            Source::Knapsack(k) => Ok(k.build()?.problem),
            Source::Files { model, query, evid } => {
                let evid = evid.as_ref().map(|e| base.join(e));
                load_problem(&base.join(model), &base.join(query), evid.as_deref())
            }
        }
    }
}

/// Outcome counts of a benchmark run.
pub struct Summary {
    pub total: usize,
    pub failed: usize,
}

/// Runs every instance, writing `<name>.json` per instance and a combined
/// `trace.csv` into `out`. Instance failures are recorded in their reports.
pub fn run_bench(spec_path: &Path, out: &Path) -> Result<Summary> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: BenchSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    if let Some(bad) = spec.instances.iter().find(|i| i.name.is_empty() || i.name.contains(['/', '\\'])) {
        anyhow::bail!("instance name {:?} is not a plain file name", bad.name);
    }
    let base = spec_path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["instance", "t", "wall_clock", "z_lower", "z_upper"])?;
    let mut failed = 0;
    for inst in &spec.instances {
        let config = inst.config.as_ref().unwrap_or(&spec.config);
        let mut report = match inst.source.load(base).and_then(|p| run_problem(&p, config)) {
            Ok(r) => r,
            Err(e) => RunReport::failed(format!("{e:#}"), config),
        };
        report.instance = Some(inst.name.clone());
        if report.status == Status::Failed {
            failed += 1;
            eprintln!("{}: failed: {}", inst.name, report.error.as_deref().unwrap_or(""));
        }
        for s in &report.steps {
            csv.serialize((&inst.name, s.t, s.wall_clock, s.z_lower.value, s.z_upper.value))?;
        }
        let json = serde_json::to_vec_pretty(&report)?;
        write_atomic(&out.join(format!("{}.json", inst.name)), &json)?;
    }
    write_atomic(&out.join("trace.csv"), &csv.into_inner()?)?;
    Ok(Summary { total: spec.instances.len(), failed })
}
