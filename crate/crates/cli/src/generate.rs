use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use margmap_core::generate::{grid, knapsack, Knapsack, KnapsackSpec};
use margmap_core::uai::{write_query, write_uai};
use margmap_core::MmapProblem;
use serde::{Deserialize, Serialize};

use crate::run::write_atomic;

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    /// 1 for a binary grid with border decisions, 2 for a grid plus a
    /// linked decision plane.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub planes: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "two")]
    pub states: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

impl GridArgs {
    pub fn build(&self) -> Result<MmapProblem> {
        Ok(grid(self.rows, self.cols, self.planes, self.states, self.seed)?)
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct KnapsackArgs {
    #[arg(long, default_value_t = 3)]
    #[serde(default = "three")]
    pub bags: usize,
    #[arg(long)]
    pub items: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Per-bag capacity; by default half the total weight spread over the
    /// bags, capped at a small constant.
    #[arg(long)]
    #[serde(default)]
    pub capacity: Option<u32>,
}

fn three() -> usize {
    3
}

impl KnapsackArgs {
    pub fn build(&self) -> Result<Knapsack> {
        let spec = KnapsackSpec { capacity: self.capacity, ..KnapsackSpec::new(self.bags, self.items, self.seed) };
        Ok(knapsack(&spec)?)
    }
}

/// Writes `<prefix>.uai` and `<prefix>.query`.
pub fn write_problem(p: &MmapProblem, prefix: &Path) -> Result<()> {
    write_atomic(&suffixed(prefix, "uai"), write_uai(p.model()).as_bytes())?;
    write_atomic(&suffixed(prefix, "query"), write_query(p.decision(), p.evidence()).as_bytes())?;
    Ok(())
}

pub fn suffixed(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn summary(p: &MmapProblem) -> serde_json::Value {
    serde_json::json!({
        "n_vars": p.model().n_vars(),
        "n_decision": p.decision().len(),
        "n_factors": p.model().explicit_factors().len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use margmap_core::uai::{load_query, load_uai};

    #[test]
    fn generated_files_parse_back() {
        let grid = GridArgs { rows: 3, cols: 4, planes: 2, states: 4, seed: 9 }.build().unwrap();
        let ks = KnapsackArgs { bags: 2, items: 5, seed: 9, capacity: None }.build().unwrap().problem;
        for p in [grid, ks] {
            let m = load_uai(&write_uai(p.model())).unwrap();
            assert_eq!(&m, p.model());
            let (d, e) = load_query(&write_query(p.decision(), p.evidence()), &m).unwrap();
            assert_eq!(d, p.decision());
            assert_eq!(&e, p.evidence());
        }
    }
}
