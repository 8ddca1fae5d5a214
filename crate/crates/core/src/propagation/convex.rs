use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::scaled::ldexp;

use super::LabeledFactor;

const MU_TOL: f64 = 1e-9;
const SIGMA_TOL: f64 = 1e-12;

/// True when `target` equals a convex combination of `others` whose bounds
/// combine to at least `target`'s bound. Decided by a feasibility LP, then
/// confirmed by recomputing the combination.
pub fn is_convex_combination(target: &LabeledFactor, others: &[&LabeledFactor]) -> bool {
    let (e_mu, e_sig) = (target.mu_exp, target.sigma_exp());
    // members far outside the target's scale cannot carry weight in a
    // well-conditioned combination
    let others: Vec<&LabeledFactor> = others
        .iter()
        .copied()
        .filter(|o| (o.mu_exp - e_mu).abs() <= 900 && (o.sigma_exp() - e_sig).abs() <= 900)
        .collect();
    if others.is_empty() {
        return false;
    }
    let mu_rows: Vec<Vec<f64>> = others
        .iter()
        .map(|o| o.mu.iter().map(|&v| ldexp(v, o.mu_exp - e_mu)).collect())
        .collect();
    let sig_rows: Vec<Vec<f64>> = others
        .iter()
        .map(|o| o.sigma_table().iter().map(|&v| ldexp(v, o.sigma_exp() - e_sig)).collect())
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = others.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    lp.add_constraint(vars.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for x in 0..target.len() {
        lp.add_constraint(vars.iter().zip(&mu_rows).map(|(&v, r)| (v, r[x])), ComparisonOp::Eq, target.mu[x]);
        lp.add_constraint(
            vars.iter().zip(&sig_rows).map(|(&v, r)| (v, r[x])),
            ComparisonOp::Ge,
            target.sigma_table()[x],
        );
    }
    let Ok(sol) = lp.solve() else {
        return false;
    };
    let lambda: Vec<f64> = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
    let total: f64 = lambda.iter().sum();
    if total <= 0.0 {
        return false;
    }
    let lambda: Vec<f64> = lambda.iter().map(|l| l / total).collect();
    let mu_scale = target.mu.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let sig_scale = target.sigma_table().iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    (0..target.len()).all(|x| {
        let mu: f64 = lambda.iter().zip(&mu_rows).map(|(l, r)| l * r[x]).sum();
        let sig: f64 = lambda.iter().zip(&sig_rows).map(|(l, r)| l * r[x]).sum();
        (mu - target.mu[x]).abs() <= MU_TOL * mu_scale && sig >= target.sigma_table()[x] - SIGMA_TOL * sig_scale
    })
}

/// Removes, in order, each member that is a convex combination of the
/// members still present.
pub(crate) fn convex_filter(members: Vec<LabeledFactor>) -> Vec<LabeledFactor> {
    let mut alive = vec![true; members.len()];
    for i in 0..members.len() {
        let others: Vec<&LabeledFactor> = (0..members.len())
            .filter(|&j| j != i && alive[j])
            .map(|j| &members[j])
            .collect();
        if is_convex_combination(&members[i], &others) {
            alive[i] = false;
        }
    }
    members.into_iter().zip(alive).filter(|(_, a)| *a).map(|(m, _)| m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::Trace;

    fn lf(t: &[f64]) -> LabeledFactor {
        LabeledFactor::exact(t.to_vec(), Trace::empty())
    }

    #[test]
    fn midpoint_is_removed() {
        let a = lf(&[2.0, 4.0]);
        let b = lf(&[4.0, 2.0]);
        let mid = lf(&[3.0, 3.0]);
        assert!(is_convex_combination(&mid, &[&a, &b]));
        let kept = convex_filter(vec![mid, a, b]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn extreme_points_survive() {
        let a = lf(&[2.0, 4.0]);
        let b = lf(&[4.0, 2.0]);
        let out = lf(&[4.0, 4.0]);
        assert!(!is_convex_combination(&out, &[&a, &b]));
        assert_eq!(convex_filter(vec![a, b, out]).len(), 3);
    }

    #[test]
    fn loose_bound_blocks_removal() {
        let a = lf(&[2.0, 4.0]);
        let b = lf(&[4.0, 2.0]);
        let mid = LabeledFactor::with_bound(vec![3.0, 3.0], vec![5.0, 5.0], Trace::empty());
        assert!(!is_convex_combination(&mid, &[&a, &b]));
    }

    #[test]
    fn duplicates_keep_one() {
        assert_eq!(convex_filter(vec![lf(&[1.0, 2.0]), lf(&[1.0, 2.0])]).len(), 1);
    }
}
