#![allow(dead_code)]

use margmap_core::generate::{random_problem, RandomSpec, Structure};
use margmap_core::MmapProblem;

/// Deterministic corpus of small binary models: 6 to 12 variables, 1 to 8
/// decisions, mixed structures, some with zeros and evidence.
pub fn corpus(count: usize, base_seed: u64) -> Vec<MmapProblem> {
    (0..count as u64)
        .map(|i| {
            let seed = base_seed + i;
            let n_vars = 6 + (i as usize % 7);
            let n_decision = 1 + (i as usize * 5 % 8).min(n_vars - 1);
            let structure = [Structure::Chain, Structure::Tree, Structure::Grid, Structure::Loopy][i as usize % 4];
            random_problem(&RandomSpec {
                n_vars,
                n_decision,
                structure,
                max_card: 2,
                zero_prob: if i % 5 == 4 { 0.15 } else { 0.0 },
                n_evidence: (i as usize % 3 == 2) as usize,
                seed,
            })
        })
        .collect()
}

/// `a <= b` allowing `tol` relative slack for rounding between two
/// independent computations of the same quantity.
pub fn le(a: margmap_core::Scaled, b: margmap_core::Scaled, tol: f64) -> bool {
    a <= b || a.approx_eq(&b, tol)
}
