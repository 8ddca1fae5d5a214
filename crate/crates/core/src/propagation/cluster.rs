use crate::scaled::Scaled;

use super::{divergence, shared_support, LabeledFactor};

/// Result of clustering a candidate set.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// Member indices of the representatives, in selection order.
    pub representatives: Vec<usize>,
    /// Representative slot of every member.
    pub assignment: Vec<usize>,
    /// Largest divergence of a member to its representative.
    pub quality: f64,
}

fn div(members: &[LabeledFactor], a: usize, b: usize) -> f64 {
    let (x, y) = (&members[a], &members[b]);
    divergence(&x.mu, x.mu_exp, &y.mu, y.mu_exp)
}

/// Column `c` of the divergence matrix: `<m, c>` for every member `m`.
fn column(members: &[LabeledFactor], c: usize) -> Vec<f64> {
    (0..members.len()).map(|m| if m == c { 1.0 } else { div(members, m, c) }).collect()
}

struct Nearest {
    best: Vec<f64>,
    slot: Vec<usize>,
    second: Vec<f64>,
}

/// Closest and second closest representative of every member, ignoring the
/// member itself.
fn nearest(cols: &[Vec<f64>], reps: &[usize], n: usize) -> Nearest {
    let mut out = Nearest { best: vec![f64::INFINITY; n], slot: vec![usize::MAX; n], second: vec![f64::INFINITY; n] };
    for m in 0..n {
        for (s, &r) in reps.iter().enumerate() {
            if r == m {
                continue;
            }
            let d = cols[s][m];
            if out.slot[m] == usize::MAX || d < out.best[m] {
                out.second[m] = out.best[m];
                out.best[m] = d;
                out.slot[m] = s;
            } else if d < out.second[m] {
                out.second[m] = d;
            }
        }
    }
    out
}

fn quality_of(near: &Nearest, reps: &[usize]) -> f64 {
    (0..near.best.len())
        .filter(|m| !reps.contains(m))
        .map(|m| near.best[m])
        .fold(1.0, f64::max)
}

/// Partitions `members` into at most `cap` clusters around representatives
/// drawn from the members. Seeds by farthest point from the largest-mass
/// member, then applies single swaps while one lowers the quality.
pub fn greedy_cluster(members: &[LabeledFactor], cap: usize) -> Clustering {
    let n = members.len();
    let cap = cap.max(1);
    if n <= cap {
        return Clustering { representatives: (0..n).collect(), assignment: (0..n).collect(), quality: 1.0 };
    }

    let mass = |m: &LabeledFactor| Scaled::new(m.mu.iter().sum(), m.mu_exp);
    let mut first = 0;
    for m in 1..n {
        if mass(&members[m]) > mass(&members[first]) {
            first = m;
        }
    }
    let mut reps = vec![first];
    let mut cols = vec![column(members, first)];
    let mut closest: Vec<f64> = cols[0].clone();
    while reps.len() < cap {
        let mut pick = usize::MAX;
        for m in 0..n {
            if reps.contains(&m) {
                continue;
            }
            if pick == usize::MAX || closest[m] > closest[pick] {
                pick = m;
            }
        }
        reps.push(pick);
        let col = column(members, pick);
        for m in 0..n {
            closest[m] = closest[m].min(col[m]);
        }
        cols.push(col);
    }

    let mut near = nearest(&cols, &reps, n);
    let mut eps = quality_of(&near, &reps);
    'search: while eps > 1.0 {
        for c in 0..n {
            if reps.contains(&c) {
                continue;
            }
            let col_c = column(members, c);
            for s in 0..reps.len() {
                let mut trial = 1.0_f64;
                for m in 0..n {
                    if m == c || (m != reps[s] && reps.contains(&m)) {
                        continue;
                    }
                    let base = if near.slot[m] == s { near.second[m] } else { near.best[m] };
                    trial = trial.max(base.min(col_c[m]));
                    if trial >= eps {
                        break;
                    }
                }
                if trial < eps {
                    reps[s] = c;
                    cols[s] = col_c;
                    near = nearest(&cols, &reps, n);
                    eps = quality_of(&near, &reps);
                    continue 'search;
                }
            }
        }
        break;
    }

    let mut assignment = vec![0; n];
    for m in 0..n {
        if let Some(s) = reps.iter().position(|&r| r == m) {
            assignment[m] = s;
            continue;
        }
        // lowest divergence, then lowest member index of the representative
        let mut slot = 0;
        for s in 1..reps.len() {
            let (d, b) = (cols[s][m], cols[slot][m]);
            if d < b || (d == b && reps[s] < reps[slot]) {
                slot = s;
            }
        }
        if cols[slot][m].is_infinite() {
            let support = |s: usize| shared_support(&members[m].mu, &members[reps[s]].mu);
            slot = 0;
            for s in 1..reps.len() {
                let (a, b) = (support(s), support(slot));
                if a > b || (a == b && reps[s] < reps[slot]) {
                    slot = s;
                }
            }
        }
        assignment[m] = slot;
    }
    let quality = (0..n)
        .map(|m| if reps[assignment[m]] == m { 1.0 } else { cols[assignment[m]][m] })
        .fold(1.0, f64::max);
    debug_assert!(quality == eps || eps.is_infinite() && quality.is_infinite());
    Clustering { representatives: reps, assignment, quality }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::Trace;

    fn lf(t: &[f64]) -> LabeledFactor {
        LabeledFactor::exact(t.to_vec(), Trace::empty())
    }

    fn plain_div(a: &[f64], b: &[f64]) -> f64 {
        crate::factor::table_divergence(a, b, 1.0)
    }

    #[test]
    fn identical_members_have_unit_quality() {
        let ms = vec![lf(&[0.3, 0.7]); 4];
        let c = greedy_cluster(&ms, 1);
        assert_eq!(c.quality, 1.0);
        assert_eq!(c.representatives.len(), 1);
    }

    #[test]
    fn disjoint_support_is_infinite() {
        let ms = vec![lf(&[1.0, 0.0]), lf(&[0.0, 1.0])];
        let c = greedy_cluster(&ms, 1);
        assert!(c.quality.is_infinite());
        assert_eq!(c.assignment, vec![0, 0]);
    }

    #[test]
    fn single_representative_is_the_minimax_member() {
        let tables: Vec<Vec<f64>> = vec![
            vec![0.9, 0.1, 0.4],
            vec![0.5, 0.5, 0.5],
            vec![0.2, 0.8, 0.3],
            vec![0.6, 0.3, 0.9],
            vec![0.4, 0.4, 0.1],
        ];
        let ms: Vec<LabeledFactor> = tables.iter().map(|t| lf(t)).collect();
        let c = greedy_cluster(&ms, 1);
        let best = (0..5)
            .map(|r| (0..5).map(|m| plain_div(&tables[m], &tables[r])).fold(1.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        assert!((c.quality - best).abs() <= 1e-12 * best);
    }

    #[test]
    fn two_clusters_are_valid() {
        let tables: Vec<Vec<f64>> = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.1, 0.9],
            vec![0.2, 0.7],
            vec![0.5, 0.5],
        ];
        let ms: Vec<LabeledFactor> = tables.iter().map(|t| lf(t)).collect();
        let c = greedy_cluster(&ms, 2);
        assert_eq!(c.representatives.len(), 2);
        assert!(c.quality.is_finite());
        let recomputed = (0..5)
            .map(|m| plain_div(&tables[m], &tables[c.representatives[c.assignment[m]]]))
            .fold(1.0, f64::max);
        assert!((recomputed - c.quality).abs() <= 1e-12 * recomputed);
        // no 2-subset of representatives beats the greedy result by a swap
        for s in 0..2 {
            for cand in 0..5 {
                let mut reps = c.representatives.clone();
                if reps.contains(&cand) {
                    continue;
                }
                reps[s] = cand;
                let q = (0..5)
                    .map(|m| reps.iter().map(|&r| plain_div(&tables[m], &tables[r])).fold(f64::INFINITY, f64::min))
                    .fold(1.0, f64::max);
                assert!(q >= c.quality * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn deterministic() {
        let ms: Vec<LabeledFactor> = (0..12).map(|i| lf(&[(i % 5) as f64 + 1.0, (i % 3) as f64 + 0.5, 1.0])).collect();
        assert_eq!(greedy_cluster(&ms, 3), greedy_cluster(&ms, 3));
    }
}
