use std::time::Duration;

use clap::{Args, ValueEnum};
use margmap_core::{Growth, PruneConfig, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthArg {
    /// Grow only the node with the worst cluster quality.
    #[default]
    Worst,
    /// Grow every node.
    All,
}

/// Solver settings shared by `solve` and `bench`.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Initial per-node cap on message set size.
    #[arg(long, default_value_t = 1)]
    pub k_init: usize,
    /// Cap increment per step.
    #[arg(long, default_value_t = 2)]
    pub c: usize,
    #[arg(long, value_enum, default_value_t = GrowthArg::Worst)]
    pub growth: GrowthArg,
    /// Wall-clock limit in seconds; the first step always completes.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Approximate byte budget for live message sets.
    #[arg(long)]
    pub memory_cap: Option<usize>,
    /// Maximum children per clique tree node after binarization.
    #[arg(long, default_value_t = 2)]
    pub max_children: usize,
    /// Also prune members that are convex combinations of the others.
    #[arg(long)]
    pub convexity: bool,
    /// Cross-check the result against exhaustive enumeration.
    #[arg(long)]
    pub verify: bool,
    /// Stop after this many steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        let s = SolverConfig::default();
        RunConfig {
            k_init: s.k_init,
            c: s.c,
            growth: GrowthArg::Worst,
            time_limit: None,
            memory_cap: s.memory_cap,
            max_children: 2,
            convexity: s.prune.convexity,
            verify: false,
            max_steps: s.max_steps,
        }
    }
}

impl RunConfig {
    pub fn solver(&self) -> anyhow::Result<SolverConfig> {
        let time_limit = match self.time_limit {
            Some(t) if !(t >= 0.0 && t.is_finite()) => anyhow::bail!("time limit must be a nonnegative number of seconds"),
            t => t.map(Duration::from_secs_f64),
        };
        let cfg = SolverConfig {
            c: self.c,
            k_init: self.k_init,
            growth: match self.growth {
                GrowthArg::Worst => Growth::WorstNode,
                GrowthArg::All => Growth::AllNodes,
            },
            time_limit,
            memory_cap: self.memory_cap,
            prune: PruneConfig { convexity: self.convexity, ..PruneConfig::default() },
            max_steps: self.max_steps,
            parallel: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_solver() {
        let cfg = RunConfig::default().solver().unwrap();
        assert_eq!(cfg, SolverConfig::default());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"k_init": 3, "growth": "all"}"#).unwrap();
        assert_eq!(cfg.k_init, 3);
        assert_eq!(cfg.growth, GrowthArg::All);
        assert_eq!(cfg.c, 2);
    }

    #[test]
    fn negative_time_limit_is_rejected() {
        let cfg = RunConfig { time_limit: Some(-1.0), ..RunConfig::default() };
        assert!(cfg.solver().is_err());
    }
}
