//! The anytime loop: repeated set propagation with growing caps and
//! monotone folding of the bounds.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clique_tree::CliqueTree;
use crate::model::{Assignment, FactorSetFamily, MmapProblem};
use crate::plan::TreePlan;
use crate::propagation::{propagate, NodeStats, PropagationOptions, PruneConfig};
use crate::scaled::Scaled;
use crate::Error;

/// Relative tolerance for declaring `Z_l = Z_u`.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-12;

/// Which caps grow between steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    /// Only the node with the worst cluster quality.
    #[default]
    WorstNode,
    /// Every node.
    AllNodes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Cap increment per step.
    pub c: usize,
    pub k_init: usize,
    pub growth: Growth,
    pub time_limit: Option<Duration>,
    /// Approximate byte budget for live message sets.
    pub memory_cap: Option<usize>,
    pub prune: PruneConfig,
    pub max_steps: Option<usize>,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            c: 2,
            k_init: 1,
            growth: Growth::WorstNode,
            time_limit: None,
            memory_cap: None,
            prune: PruneConfig::default(),
            max_steps: None,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.c == 0 {
            return Err(Error::Config("cap increment c must be at least 1".into()));
        }
        if self.k_init == 0 {
            return Err(Error::Config("initial cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// One completed step of the loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    /// Seconds since the loop started.
    pub wall_clock: f64,
    /// Best lower bound so far.
    pub z_lower: Scaled,
    /// Best upper bound so far.
    pub z_upper: Scaled,
    /// Bounds produced by this step alone.
    pub step_lower: Scaled,
    pub step_upper: Scaled,
    /// Assignment behind `z_lower`.
    pub assignment: Assignment,
    pub caps: Vec<usize>,
    pub nodes: Vec<NodeStats>,
}

impl Step {
    pub fn quality(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.quality).collect()
    }

    pub fn gap(&self) -> f64 {
        if self.z_lower.is_zero() {
            return if self.z_upper.is_zero() { 1.0 } else { f64::INFINITY };
        }
        self.z_upper.ratio(&self.z_lower)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrace {
    pub steps: Vec<Step>,
}

impl BoundsTrace {
    /// `Z_u / Z_l` of the latest step, `+inf` when `Z_l = 0 < Z_u`.
    pub fn gap(&self) -> f64 {
        self.steps.last().map_or(f64::INFINITY, Step::gap)
    }
}

/// Why the loop stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Bounds met, or the last step searched without clustering.
    Converged,
    Interrupted,
    TimeLimit,
    MemoryCap,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnytimeResult {
    pub assignment: Assignment,
    pub z_lower: Scaled,
    pub z_upper: Scaled,
    pub termination: Termination,
    pub trace: BoundsTrace,
}

impl AnytimeResult {
    pub fn gap(&self) -> f64 {
        self.trace.gap()
    }
}

pub fn converged(lower: Scaled, upper: Scaled) -> bool {
    if upper.is_zero() {
        return true;
    }
    lower >= upper || lower.ratio(&upper) >= 1.0 - CONVERGENCE_TOLERANCE
}

/// Runs the anytime loop until the bounds meet or a limit is hit. The first
/// step always completes unless it exceeds the memory budget; `interrupt`
/// and the time limit are honoured from the second step on.
pub fn anytime_inference(
    tree: &CliqueTree,
    family: &FactorSetFamily,
    cfg: &SolverConfig,
    interrupt: Option<Arc<AtomicBool>>,
    mut sink: impl FnMut(&Step),
) -> Result<AnytimeResult, Error> {
    cfg.validate()?;
    let plan = TreePlan::build(tree, family)?;
    let start = Instant::now();
    let deadline = cfg.time_limit.map(|d| start + d);
    let mut caps = vec![cfg.k_init; tree.len()];
    let mut trace = BoundsTrace::default();
    let mut best: Option<(Scaled, Scaled, Assignment)> = None;
    let stop_requested = || {
        interrupt.as_ref().is_some_and(|f| f.load(Ordering::Relaxed))
    };

    let termination = loop {
        let t = trace.steps.len();
        let first = t == 0;
        let opts = PropagationOptions {
            caps: caps.clone(),
            prune: cfg.prune,
            memory_cap: cfg.memory_cap,
            deadline: if first { None } else { deadline },
            cancel: if first { None } else { interrupt.clone() },
            parallel: cfg.parallel,
            keep_sets: false,
        };
        let r = match propagate(&plan, family, &opts) {
            Ok(r) => r,
            Err(Error::Interrupted) if stop_requested() => break Termination::Interrupted,
            Err(Error::Interrupted) => break Termination::TimeLimit,
            Err(Error::BudgetExhausted { .. }) if !first => break Termination::MemoryCap,
            Err(e) => return Err(e),
        };

        let (lo, hi, d) = match best.take() {
            None => (r.z_lower, r.z_upper, r.assignment.clone()),
            Some((lo, hi, d)) => {
                if r.z_lower > lo {
                    (r.z_lower, hi.min(r.z_upper), r.assignment.clone())
                } else {
                    (lo, hi.min(r.z_upper), d)
                }
            }
        };
        let step = Step {
            t,
            wall_clock: start.elapsed().as_secs_f64(),
            z_lower: lo,
            z_upper: hi,
            step_lower: r.z_lower,
            step_upper: r.z_upper,
            assignment: d.clone(),
            caps: caps.clone(),
            nodes: r.stats.clone(),
        };
        sink(&step);
        trace.steps.push(step);
        best = Some((lo, hi, d));

        if converged(lo, hi) || !r.clustered() {
            break Termination::Converged;
        }
        if cfg.max_steps.is_some_and(|m| trace.steps.len() >= m) {
            break Termination::StepLimit;
        }
        if stop_requested() {
            break Termination::Interrupted;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break Termination::TimeLimit;
        }
        grow(&mut caps, &r.stats, cfg);
    };

    let (z_lower, z_upper, assignment) = best.expect("the first step always completes");
    Ok(AnytimeResult { assignment, z_lower, z_upper, termination, trace })
}

fn grow(caps: &mut [usize], stats: &[NodeStats], cfg: &SolverConfig) {
    match cfg.growth {
        Growth::AllNodes => caps.iter_mut().for_each(|k| *k += cfg.c),
        Growth::WorstNode => {
            // infinite quality outranks everything; ties go to the lower id
            let worst = stats
                .iter()
                .filter(|s| s.clustered)
                .fold(None::<&NodeStats>, |w, s| match w {
                    Some(w) if w.quality >= s.quality => Some(w),
                    _ => Some(s),
                });
            if let Some(w) = worst {
                caps[w.node] += cfg.c;
            }
        }
    }
}

/// Builds the factor sets and a binary clique tree for `problem`, then runs
/// [`anytime_inference`] without interruption.
pub fn solve(problem: &MmapProblem, cfg: &SolverConfig) -> Result<AnytimeResult, Error> {
    let family = FactorSetFamily::build(problem);
    let tree = CliqueTree::for_family(&family, 2)?;
    anytime_inference(&tree, &family, cfg, None, |_| {})
}
