//! Exhaustive enumeration, kept independent of the elimination code so it
//! can serve as ground truth.

use rayon::prelude::*;

use crate::model::{Assignment, GraphicalModel, MmapProblem};
use crate::scaled::{Scaled, ScaledSum};
use crate::factor::VarId;
use crate::Error;

/// Default limit on enumerated configurations.
pub const DEFAULT_CAP: u128 = 1 << 24;

/// Relative tolerance under which two `Z_d` values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn count(cards: impl IntoIterator<Item = usize>) -> u128 {
    cards.into_iter().fold(1u128, |a, c| a.saturating_mul(c as u128))
}

/// Sum over the free variables of the factor product, with every other
/// variable fixed by `state`.
fn enumerate(model: &GraphicalModel, free: &[VarId], state: &mut [usize]) -> Scaled {
    let strides: Vec<Vec<usize>> = model.factors().iter().map(|f| f.scope().strides()).collect();
    let mut acc = ScaledSum::new();
    for v in free {
        state[v.0] = 0;
    }
    loop {
        let mut mant = 1.0_f64;
        let mut exp = 0i64;
        for (f, st) in model.factors().iter().zip(&strides) {
            let idx: usize = f.vars().iter().zip(st).map(|(v, s)| state[v.0] * s).sum();
            mant *= f.table()[idx];
            if mant == 0.0 {
                break;
            }
            if mant < 1e-200 {
                let (m, e) = libm::frexp(mant);
                mant = m;
                exp += e as i64;
            }
        }
        acc.add(Scaled::new(mant, exp));
        // odometer over the free variables, last fastest
        let mut k = free.len();
        loop {
            if k == 0 {
                return acc.total();
            }
            k -= 1;
            let v = free[k].0;
            state[v] += 1;
            if state[v] < model.card(free[k]) {
                break;
            }
            state[v] = 0;
        }
    }
}

/// Partition function by summing the joint product over every configuration.
pub fn brute_force_partition(model: &GraphicalModel) -> Result<Scaled, Error> {
    brute_force_partition_capped(model, DEFAULT_CAP)
}

pub fn brute_force_partition_capped(model: &GraphicalModel, cap: u128) -> Result<Scaled, Error> {
    let total = count(model.cards().iter().copied());
    if total > cap {
        return Err(Error::EnumerationCap { count: total, cap });
    }
    let free: Vec<VarId> = model.vars().collect();
    Ok(enumerate(model, &free, &mut vec![0; model.n_vars()]))
}

/// `Z_d`: the latent variables summed out with `d` and the evidence fixed.
pub fn clamped_value(p: &MmapProblem, d: &Assignment) -> Result<Scaled, Error> {
    p.check_assignment(d)?;
    let mut state = vec![0; p.model().n_vars()];
    for (v, &s) in d.iter().chain(p.evidence()) {
        state[v.0] = s;
    }
    let free: Vec<VarId> = p.latent().iter().copied().filter(|v| !p.evidence().contains_key(v)).collect();
    Ok(enumerate(p.model(), &free, &mut state))
}

/// `Z* = max_d Z_d` and every assignment within [`TIE_TOLERANCE`] of it.
pub fn brute_force_mmap(p: &MmapProblem) -> Result<(Scaled, Vec<Assignment>), Error> {
    brute_force_mmap_capped(p, DEFAULT_CAP)
}

pub fn brute_force_mmap_capped(p: &MmapProblem, cap: u128) -> Result<(Scaled, Vec<Assignment>), Error> {
    let cards: Vec<usize> = p.decision().iter().map(|&v| p.model().card(v)).collect();
    let n_d = count(cards.iter().copied());
    let free = p.latent().iter().filter(|v| !p.evidence().contains_key(v)).map(|&v| p.model().card(v));
    let total = n_d.saturating_mul(count(free));
    if total > cap {
        return Err(Error::EnumerationCap { count: total, cap });
    }
    let decode = |mut k: usize| -> Assignment {
        let mut d = Assignment::new();
        for (v, &c) in p.decision().iter().zip(&cards).rev() {
            d.insert(*v, k % c);
            k /= c;
        }
        d
    };
    let values: Vec<(Assignment, Scaled)> = (0..n_d as usize)
        .into_par_iter()
        .map(|k| {
            let d = decode(k);
            let z = clamped_value(p, &d).expect("decoded assignments are complete");
            (d, z)
        })
        .collect();
    let best = values.iter().fold(Scaled::ZERO, |m, (_, z)| m.max(*z));
    let ties = values
        .into_iter()
        .filter(|(_, z)| z.approx_eq(&best, TIE_TOLERANCE))
        .map(|(d, _)| d)
        .collect();
    Ok((best, ties))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{Factor, Scope};

    fn scope(vars: &[usize]) -> Scope {
        Scope::new(vars.iter().map(|&v| VarId(v)).collect(), vec![2; vars.len()]).unwrap()
    }

    #[test]
    fn single_factor_is_its_sum() {
        let f = Factor::new(scope(&[0, 1]), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = GraphicalModel::new(vec![2, 2], vec![f]).unwrap();
        assert!((brute_force_partition(&m).unwrap().to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_factor_gives_zero() {
        let m = GraphicalModel::new(vec![2, 2], vec![Factor::constant(scope(&[0]), 0.0), Factor::constant(scope(&[1]), 3.0)]).unwrap();
        assert!(brute_force_partition(&m).unwrap().is_zero());
    }

    #[test]
    fn symmetric_model_ties_everywhere() {
        let m = GraphicalModel::new(vec![2; 3], vec![Factor::constant(scope(&[0, 1, 2]), 0.5)]).unwrap();
        let p = MmapProblem::new(m, vec![VarId(0), VarId(2)], Assignment::new()).unwrap();
        let (z, all) = brute_force_mmap(&p).unwrap();
        assert_eq!(z.to_f64(), 1.0);
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn all_decisions_give_max_entry() {
        let f = Factor::new(scope(&[0, 1]), vec![0.1, 0.7, 0.3, 0.4]).unwrap();
        let m = GraphicalModel::new(vec![2, 2], vec![f]).unwrap();
        let p = MmapProblem::new(m, vec![VarId(0), VarId(1)], Assignment::new()).unwrap();
        let (z, arg) = brute_force_mmap(&p).unwrap();
        assert_eq!(z.to_f64(), 0.7);
        assert_eq!(arg, vec![[(VarId(0), 0), (VarId(1), 1)].into_iter().collect::<Assignment>()]);
    }

    #[test]
    fn evidence_is_clamped() {
        let f = Factor::new(scope(&[0, 1]), vec![0.1, 0.7, 0.3, 0.4]).unwrap();
        let m = GraphicalModel::new(vec![2, 2], vec![f]).unwrap();
        let ev: Assignment = [(VarId(1), 0)].into_iter().collect();
        let p = MmapProblem::new(m, vec![VarId(0)], ev).unwrap();
        let (z, _) = brute_force_mmap(&p).unwrap();
        assert_eq!(z.to_f64(), 0.3);
    }

    #[test]
    fn cap_is_enforced() {
        let m = GraphicalModel::new(vec![2; 30], vec![]).unwrap();
        assert!(matches!(brute_force_partition(&m), Err(Error::EnumerationCap { .. })));
    }
}
