use super::cluster::greedy_cluster;
use super::convex::convex_filter;
use super::{dominates, LabeledFactor, PruneConfig};

/// The pruned candidate set `L_i` of one node.
#[derive(Clone, Debug)]
pub struct NodeSet {
    pub members: Vec<LabeledFactor>,
    /// `eps(V_i)` of the last clustering, 1 when none ran.
    pub quality: f64,
    /// `|M_i|` before pruning.
    pub raw_count: usize,
    pub clustered: bool,
}

/// Drops every member weakly dominated by an earlier survivor or by a later
/// member, folding the dropped bound into the survivor's. Among equal
/// messages the first is kept.
pub fn dominance_filter(members: Vec<LabeledFactor>) -> Vec<LabeledFactor> {
    let mut kept: Vec<LabeledFactor> = Vec::with_capacity(members.len());
    for m in members {
        if let Some(s) = kept.iter_mut().find(|s| dominates(&s.mu, s.mu_exp, &m.mu, m.mu_exp)) {
            if !dominates(s.sigma_table(), s.sigma_exp(), m.sigma_table(), m.sigma_exp()) {
                s.absorb_sigma(&m);
            }
            continue;
        }
        let mut m = m;
        let mut k = 0;
        while k < kept.len() {
            if dominates(&m.mu, m.mu_exp, &kept[k].mu, kept[k].mu_exp) {
                let gone = kept.remove(k);
                if !dominates(m.sigma_table(), m.sigma_exp(), gone.sigma_table(), gone.sigma_exp()) {
                    m.absorb_sigma(&gone);
                }
            } else {
                k += 1;
            }
        }
        kept.push(m);
    }
    kept
}

/// Dominance, optional convexity filtering, then clustering down to `cap`.
pub fn prune(members: Vec<LabeledFactor>, cap: usize, cfg: &PruneConfig) -> NodeSet {
    prune_node(members, cap, cfg, true)
}

pub(crate) fn prune_node(members: Vec<LabeledFactor>, cap: usize, cfg: &PruneConfig, allow_clustering: bool) -> NodeSet {
    let raw_count = members.len();
    let mut members = members;
    if cfg.dominance {
        members = dominance_filter(members);
    }
    if cfg.convexity && members.len() <= cfg.convexity_max_members {
        members = convex_filter(members);
    }
    if allow_clustering && cfg.clustering && members.len() > cap.max(1) {
        let c = greedy_cluster(&members, cap.max(1));
        let mut reps: Vec<LabeledFactor> = c.representatives.iter().map(|&r| members[r].clone()).collect();
        for (m, &slot) in c.assignment.iter().enumerate() {
            if c.representatives[slot] != m {
                reps[slot].absorb_sigma(&members[m]);
            }
        }
        return NodeSet { members: reps, quality: c.quality, raw_count, clustered: true };
    }
    NodeSet { members, quality: 1.0, raw_count, clustered: false }
}
