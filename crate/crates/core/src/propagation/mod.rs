//! Factor-set elimination: every node passes a bounded set of candidate
//! messages, each with an upper-bound companion and the decision trace that
//! produced it.

mod cluster;
mod convex;
mod prune;
mod trace;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clique_tree::CliqueTree;
use crate::model::{Assignment, FactorSetFamily};
use crate::plan::{NodePlan, TreePlan};
use crate::scaled::{ldexp, normalize_table, Scaled};
use crate::Error;

pub use cluster::{greedy_cluster, Clustering};
pub use convex::is_convex_combination;
pub use prune::{dominance_filter, prune, NodeSet};
pub use trace::Trace;

/// A candidate message `mu * 2^mu_exp` over a separator, with its upper
/// bound `sigma`. `sigma == None` means the bound equals the message.
#[derive(Clone, Debug)]
pub struct LabeledFactor {
    pub mu: Vec<f64>,
    pub mu_exp: i64,
    pub sigma: Option<(Vec<f64>, i64)>,
    pub trace: Trace,
}

impl LabeledFactor {
    /// A message that is its own bound.
    pub fn exact(mut mu: Vec<f64>, trace: Trace) -> LabeledFactor {
        let mu_exp = normalize_table(&mut mu);
        LabeledFactor { mu, mu_exp, sigma: None, trace }
    }

    /// Message and bound from plain tables; `sigma` must dominate `mu`.
    pub fn with_bound(mu: Vec<f64>, mut sigma: Vec<f64>, trace: Trace) -> LabeledFactor {
        let mut f = LabeledFactor::exact(mu, trace);
        let e = normalize_table(&mut sigma);
        f.sigma = Some((sigma, e));
        f
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn sigma_table(&self) -> &[f64] {
        self.sigma.as_ref().map_or(&self.mu, |s| &s.0)
    }

    pub fn sigma_exp(&self) -> i64 {
        self.sigma.as_ref().map_or(self.mu_exp, |s| s.1)
    }

    pub fn mu_at(&self, i: usize) -> Scaled {
        Scaled::new(self.mu[i], self.mu_exp)
    }

    pub fn sigma_at(&self, i: usize) -> Scaled {
        Scaled::new(self.sigma_table()[i], self.sigma_exp())
    }

    /// The message as plain doubles; lossy outside the `f64` range.
    pub fn mu_values(&self) -> Vec<f64> {
        self.mu.iter().map(|&v| ldexp(v, self.mu_exp)).collect()
    }

    pub fn sigma_values(&self) -> Vec<f64> {
        let e = self.sigma_exp();
        self.sigma_table().iter().map(|&v| ldexp(v, e)).collect()
    }

    /// Replaces the bound by its pointwise max with `other`'s bound.
    pub(crate) fn absorb_sigma(&mut self, other: &LabeledFactor) {
        let (a, ea) = (self.sigma_table(), self.sigma_exp());
        let (b, eb) = (other.sigma_table(), other.sigma_exp());
        let e = ea.max(eb);
        let mut t: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| ldexp(x, ea - e).max(ldexp(y, eb - e)))
            .collect();
        let shift = normalize_table(&mut t);
        self.sigma = Some((t, e + shift));
    }
}

/// `a >= b` entrywise after aligning exponents.
pub(crate) fn dominates(a: &[f64], ea: i64, b: &[f64], eb: i64) -> bool {
    // scale the side with the larger exponent up so nothing underflows
    if ea >= eb {
        let d = ea - eb;
        a.iter().zip(b).all(|(&x, &y)| ldexp(x, d) >= y)
    } else {
        let d = eb - ea;
        a.iter().zip(b).all(|(&x, &y)| x >= ldexp(y, d))
    }
}

/// `max_x a(x) / b(x)` on aligned scales, rounded up so that
/// `a <= result * b` holds for the computed tables.
pub(crate) fn divergence(a: &[f64], ea: i64, b: &[f64], eb: i64) -> f64 {
    let mut worst = 0.0_f64;
    let mut all_zero = true;
    let mut shared_zero = false;
    for (&x, &y) in a.iter().zip(b) {
        if x == 0.0 {
            shared_zero |= y == 0.0;
            continue;
        }
        all_zero = false;
        if y == 0.0 {
            return f64::INFINITY;
        }
        let mut r = x / y;
        if r.mul_add(y, -x) < 0.0 {
            r = r.next_up();
        }
        worst = worst.max(r);
    }
    if all_zero {
        return if shared_zero || a.is_empty() { 1.0 } else { 0.0 };
    }
    let mut scaled = ldexp(worst, ea - eb);
    if scaled == 0.0 {
        scaled = f64::MIN_POSITIVE;
    }
    if shared_zero {
        scaled = scaled.max(1.0);
    }
    scaled
}

/// Number of entries where both tables are positive.
pub(crate) fn shared_support(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(&x, &y)| x > 0.0 && y > 0.0).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Drop members dominated by another member.
    pub dominance: bool,
    /// Drop members that are convex combinations of the others.
    pub convexity: bool,
    /// Skip the convexity test on sets larger than this.
    pub convexity_max_members: usize,
    /// Cluster down to the per-node cap. Without it the search is exhaustive.
    pub clustering: bool,
}

impl Default for PruneConfig {
    fn default() -> PruneConfig {
        PruneConfig { dominance: true, convexity: false, convexity_max_members: 64, clustering: true }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PropagationOptions {
    /// Cap `k_i` per node; missing entries default to 1.
    pub caps: Vec<usize>,
    pub prune: PruneConfig,
    /// Approximate byte budget for live message sets.
    pub memory_cap: Option<usize>,
    pub deadline: Option<Instant>,
    pub cancel: Option<Arc<AtomicBool>>,
    /// Build candidate sets on the rayon pool.
    pub parallel: bool,
    /// Keep every pruned node set in the result for inspection.
    pub keep_sets: bool,
}

impl PropagationOptions {
    pub fn with_caps(caps: Vec<usize>) -> PropagationOptions {
        PropagationOptions { caps, ..PropagationOptions::default() }
    }

    fn cap(&self, i: usize) -> usize {
        self.caps.get(i).copied().unwrap_or(1).max(1)
    }

    fn stop_requested(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

/// Diagnostics for one node of one propagation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub node: usize,
    /// `|K_i|`: combined member choices of the sets assigned here.
    pub choices: usize,
    /// `|M_i|` before pruning.
    pub raw_count: usize,
    /// `|K_i| * prod_j k_j` over the children, with `k_j` the actual child
    /// set size when clustering is off.
    pub bound: usize,
    /// `|L_i|` after pruning.
    pub kept: usize,
    /// `eps(V_i)`; 1 unless clustering ran.
    #[serde(with = "crate::scaled::extended")]
    pub quality: f64,
    pub clustered: bool,
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub z_lower: Scaled,
    pub z_upper: Scaled,
    /// Decision assignment behind `z_lower`.
    pub assignment: Assignment,
    pub best_trace: Trace,
    pub stats: Vec<NodeStats>,
    pub peak_bytes: usize,
    pub node_sets: Option<Vec<NodeSet>>,
}

impl PropagationResult {
    pub fn quality(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.quality).collect()
    }

    /// `prod_i eps(V_i)`.
    pub fn quality_product(&self) -> f64 {
        self.stats.iter().map(|s| s.quality).product()
    }

    pub fn clustered(&self) -> bool {
        self.stats.iter().any(|s| s.clustered)
    }
}

/// Decision assignment recorded in the winning root member.
pub fn extract_assignment(result: &PropagationResult, family: &FactorSetFamily) -> Result<Assignment, Error> {
    let d = result.best_trace.flatten()?;
    if let Some(v) = family.decision().iter().find(|v| !d.contains_key(v)) {
        return Err(Error::IncompleteTrace(*v));
    }
    Ok(d)
}

/// Runs set propagation over `tree` with per-node caps from `opts`.
pub fn factor_set_elimination(
    tree: &CliqueTree,
    family: &FactorSetFamily,
    opts: &PropagationOptions,
) -> Result<PropagationResult, Error> {
    let plan = TreePlan::build(tree, family)?;
    propagate(&plan, family, opts)
}

fn bytes_of(set: &[LabeledFactor]) -> usize {
    set.iter()
        .map(|m| 8 * (m.mu.len() + m.sigma.as_ref().map_or(0, |s| s.0.len())))
        .sum()
}

pub(crate) fn propagate(plan: &TreePlan, family: &FactorSetFamily, opts: &PropagationOptions) -> Result<PropagationResult, Error> {
    let n = plan.nodes.len();
    let mut sets: Vec<Option<NodeSet>> = vec![None; n];
    let mut kept_sets: Vec<Option<NodeSet>> = vec![None; n];
    let mut stats: Vec<Option<NodeStats>> = vec![None; n];
    let mut live = 0usize;
    let mut peak = 0usize;

    for &i in &plan.order {
        if opts.stop_requested() {
            return Err(Error::Interrupted);
        }
        let node = &plan.nodes[i];
        let kids: Vec<NodeSet> = node.children.iter().map(|&c| sets[c].take().expect("postorder")).collect();
        let counts: Vec<usize> = kids.iter().map(|k| k.members.len()).collect();
        let per_choice = counts.iter().fold(1usize, |a, &c| a.saturating_mul(c));
        let raw = node.choices.len().saturating_mul(per_choice);
        // without clustering the children are uncapped
        let bound = node.children.iter().zip(&counts).fold(node.choices.len(), |a, (&c, &n)| {
            a.saturating_mul(if opts.prune.clustering { opts.cap(c) } else { n })
        });
        assert!(raw <= bound, "node {i}: {raw} candidates exceed the {bound} bound");

        let width = node.contraction.out_len();
        let needed = live.saturating_add(raw.saturating_mul(width).saturating_mul(16));
        if let Some(budget) = opts.memory_cap {
            if needed > budget {
                return Err(Error::BudgetExhausted { needed, budget });
            }
        }

        let members = build_candidates(node, &kids, &counts, raw, opts.parallel);
        peak = peak.max(live + bytes_of(&members));
        for k in &kids {
            live -= bytes_of(&k.members);
        }
        let is_root = i == plan.root;
        let cap = opts.cap(i);
        let pruned = prune::prune_node(members, cap, &opts.prune, !is_root);
        live += bytes_of(&pruned.members);
        peak = peak.max(live);
        stats[i] = Some(NodeStats {
            node: i,
            choices: node.choices.len(),
            raw_count: raw,
            bound,
            kept: pruned.members.len(),
            quality: pruned.quality,
            clustered: pruned.clustered,
        });
        if opts.keep_sets {
            kept_sets[i] = Some(pruned.clone());
        }
        sets[i] = Some(pruned);
    }

    let root = sets[plan.root].take().expect("root visited");
    let mut z_lower = Scaled::ZERO;
    let mut z_upper = Scaled::ZERO;
    let mut best = 0;
    for (k, m) in root.members.iter().enumerate() {
        let lo = m.mu_at(0);
        if lo > z_lower {
            z_lower = lo;
            best = k;
        }
        z_upper = z_upper.max(m.sigma_at(0));
    }
    let best_trace = root.members.get(best).map(|m| m.trace.clone()).unwrap_or_default();
    let mut result = PropagationResult {
        z_lower,
        z_upper,
        assignment: Assignment::new(),
        best_trace,
        stats: stats.into_iter().map(|s| s.expect("every node visited")).collect(),
        peak_bytes: peak,
        node_sets: opts.keep_sets.then(|| kept_sets.into_iter().map(|s| s.expect("kept")).collect()),
    };
    // z_lower * prod eps is itself an upper bound; taking the smaller keeps
    // the certificate exact despite rounding in the two separate sums
    let eps = result.quality_product();
    if eps.is_finite() {
        result.z_upper = result.z_upper.min(result.z_lower.mul_f64(eps));
    }
    result.assignment = extract_assignment(&result, family)?;
    Ok(result)
}

/// All combinations of one local choice and one member per child, in
/// choice-major order with the last child varying fastest.
fn build_candidates(node: &NodePlan, kids: &[NodeSet], counts: &[usize], raw: usize, parallel: bool) -> Vec<LabeledFactor> {
    let per_choice = raw / node.choices.len().max(1);
    let make = |c: usize| -> LabeledFactor {
        let choice = &node.choices[c / per_choice.max(1)];
        let mut rest = c % per_choice.max(1);
        let mut picks: Vec<&LabeledFactor> = Vec::with_capacity(kids.len());
        let mut idx = vec![0; kids.len()];
        for k in (0..kids.len()).rev() {
            idx[k] = rest % counts[k];
            rest /= counts[k];
        }
        for (k, &j) in idx.iter().enumerate() {
            picks.push(&kids[k].members[j]);
        }
        combine(node, choice, &picks)
    };
    if parallel && raw >= 32 {
        (0..raw).into_par_iter().map(make).collect()
    } else {
        (0..raw).map(make).collect()
    }
}

fn combine(node: &NodePlan, choice: &crate::plan::LocalChoice, kids: &[&LabeledFactor]) -> LabeledFactor {
    let mus: Vec<&[f64]> = kids.iter().map(|k| k.mu.as_slice()).collect();
    let mut mu = node.contraction.run(&choice.table, &choice.nonzero, &mus);
    let mu_exp = choice.exponent + kids.iter().map(|k| k.mu_exp).sum::<i64>() + normalize_table(&mut mu);
    let sigma = if kids.iter().all(|k| k.sigma.is_none()) {
        None
    } else {
        let sig: Vec<&[f64]> = kids.iter().map(|k| k.sigma_table()).collect();
        let mut s = node.contraction.run(&choice.table, &choice.nonzero, &sig);
        let e = choice.exponent + kids.iter().map(|k| k.sigma_exp()).sum::<i64>() + normalize_table(&mut s);
        Some((s, e))
    };
    let trace = Trace::join(choice.tags.clone(), kids.iter().map(|k| k.trace.clone()).collect());
    LabeledFactor { mu, mu_exp, sigma, trace }
}
