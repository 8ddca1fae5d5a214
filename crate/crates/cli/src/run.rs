use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use margmap_core::oracle::{brute_force_mmap_capped, DEFAULT_CAP};
use margmap_core::uai::{load_evidence, load_query, load_uai_bytes};
use margmap_core::{anytime_inference, CliqueTree, Error, FactorSetFamily, MmapProblem, Scaled};

use crate::config::RunConfig;
use crate::report::{RunReport, Status, Verification};

/// Reads a model, its query and optional extra evidence.
pub fn load_problem(model: &Path, query: &Path, evid: Option<&Path>) -> Result<MmapProblem> {
    let bytes = fs::read(model).with_context(|| format!("reading {}", model.display()))?;
    let m = load_uai_bytes(&bytes).with_context(|| format!("parsing {}", model.display()))?;
    let text = fs::read_to_string(query).with_context(|| format!("reading {}", query.display()))?;
    let (decision, mut evidence) = load_query(&text, &m).with_context(|| format!("parsing {}", query.display()))?;
    if let Some(path) = evid {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let extra = load_evidence(&text, &m).with_context(|| format!("parsing {}", path.display()))?;
        for (v, s) in extra {
            match evidence.insert(v, s) {
                Some(old) if old != s => bail!("{}: evidence for variable {v} conflicts with the query ({old} vs {s})", path.display()),
                _ => {}
            }
        }
    }
    Ok(MmapProblem::new(m, decision, evidence)?)
}

/// Runs the full pipeline on `problem`, optionally checking the result by
/// enumeration. A failed check is an error.
pub fn run_problem(problem: &MmapProblem, config: &RunConfig) -> Result<RunReport> {
    let solver = config.solver()?;
    let family = FactorSetFamily::build(problem);
    let tree = CliqueTree::for_family(&family, config.max_children)?;
    let result = anytime_inference(&tree, &family, &solver, None, |_| {})?;
    let mut report = RunReport::solved(problem, &tree, &result, config);
    if config.verify {
        match brute_force_mmap_capped(problem, DEFAULT_CAP) {
            Ok((z_star, _)) => {
                let agrees = if report.status == Status::Converged {
                    result.z_lower.approx_eq(&z_star, 1e-9)
                } else {
                    within(result.z_lower, z_star) && within(z_star, result.z_upper)
                };
                report.verification = Some(Verification { z_star: z_star.into(), agrees });
                if !agrees {
                    bail!(
                        "verification failed: solver bounds [{}, {}] disagree with enumerated optimum {z_star}",
                        result.z_lower,
                        result.z_upper
                    );
                }
            }
            Err(Error::EnumerationCap { count, cap }) => {
                eprintln!("warning: skipping verification, {count} configurations exceed the cap of {cap}");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(report)
}

fn within(a: Scaled, b: Scaled) -> bool {
    a <= b || a.approx_eq(&b, 1e-9)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
