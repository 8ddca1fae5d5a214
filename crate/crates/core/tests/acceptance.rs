//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use margmap_core::anytime::anytime_inference;
use margmap_core::elimination::{evaluate_assignment, factor_max_elimination};
use margmap_core::generate::{grid, knapsack, KnapsackSpec};
use margmap_core::oracle::brute_force_mmap;
use margmap_core::{
    Assignment, CliqueTree, FactorSetFamily, MmapProblem, PruneConfig, Scaled, SolverConfig, Step, Termination, VarId,
};

use common::{corpus, le};

struct Run {
    family: FactorSetFamily,
    tree: CliqueTree,
    zstar: Scaled,
    argmax: Vec<Assignment>,
    steps: Vec<Step>,
    termination: Termination,
    final_lower: Scaled,
    final_upper: Scaled,
    assignment: Assignment,
}

fn run(p: &MmapProblem, cfg: &SolverConfig) -> Run {
    let family = FactorSetFamily::build(p);
    let tree = CliqueTree::for_family(&family, 2).expect("tree");
    let (zstar, argmax) = brute_force_mmap(p).expect("oracle");
    let mut steps = Vec::new();
    let r = anytime_inference(&tree, &family, cfg, None, |s| steps.push(s.clone())).expect("solve");
    Run {
        family,
        tree,
        zstar,
        argmax,
        steps,
        termination: r.termination,
        final_lower: r.z_lower,
        final_upper: r.z_upper,
        assignment: r.assignment,
    }
}

type Verdict = Result<String, String>;

fn check(failures: Vec<String>, ok: String) -> Verdict {
    if failures.is_empty() {
        Ok(ok)
    } else {
        let n = failures.len();
        let shown: Vec<String> = failures.into_iter().take(3).collect();
        Err(format!("{n} violations, e.g. {}", shown.join("; ")))
    }
}

fn oracle_equivalence(runs: &[Run], secs: f64) -> Verdict {
    let mut bad = vec![];
    for (i, r) in runs.iter().enumerate() {
        let converged = r.termination == Termination::Converged
            && r.final_lower.approx_eq(&r.zstar, 1e-9)
            && r.final_upper.approx_eq(&r.zstar, 1e-9);
        if !converged {
            bad.push(format!("#{i}: Z_l={} Z_u={} Z*={}", r.final_lower, r.final_upper, r.zstar));
        } else if !r.argmax.contains(&r.assignment) {
            bad.push(format!("#{i}: assignment outside the argmax set"));
        }
    }
    if secs > 120.0 {
        bad.push(format!("took {secs:.1}s"));
    }
    check(bad, format!("{} instances agree with enumeration in {secs:.1}s", runs.len()))
}

fn sandwich(runs: &[Run]) -> Verdict {
    let mut bad = vec![];
    let mut steps = 0;
    for (i, r) in runs.iter().enumerate() {
        for s in &r.steps {
            steps += 1;
            if !le(s.z_lower, r.zstar, 1e-12) || !le(r.zstar, s.z_upper, 1e-12) {
                bad.push(format!("#{i} t={}: {} <= {} <= {} fails", s.t, s.z_lower, r.zstar, s.z_upper));
            }
        }
        for w in r.steps.windows(2) {
            if w[1].z_lower < w[0].z_lower || w[1].z_upper > w[0].z_upper {
                bad.push(format!("#{i} t={}: bounds not monotone", w[1].t));
            }
        }
    }
    check(bad, format!("{steps} steps bracket the optimum monotonically"))
}

fn feasibility(runs: &[Run]) -> Verdict {
    let mut bad = vec![];
    let mut steps = 0;
    for (i, r) in runs.iter().enumerate() {
        for s in &r.steps {
            steps += 1;
            let z = evaluate_assignment(&r.tree, &r.family, &s.assignment).expect("evaluate");
            if !z.approx_eq(&s.z_lower, 1e-9) {
                bad.push(format!("#{i} t={}: Z_d={z} vs Z_l={}", s.t, s.z_lower));
            }
        }
    }
    check(bad, format!("{steps} lower bounds reproduced by evaluation"))
}

fn certificate(runs: &[Run]) -> Verdict {
    let mut bad = vec![];
    let mut checked = 0;
    for (i, r) in runs.iter().enumerate() {
        for s in &r.steps {
            let eps: f64 = s.quality().iter().product();
            if !eps.is_finite() {
                continue;
            }
            checked += 1;
            if s.step_upper > s.step_lower.mul_f64(eps) {
                bad.push(format!("#{i} t={}: Z_u={} > Z_l*eps={}", s.t, s.step_upper, s.step_lower.mul_f64(eps)));
            }
        }
    }
    check(bad, format!("{checked} propagations with finite quality satisfy Z_u <= Z_l * prod eps"))
}

fn max_elimination(problems: &[MmapProblem]) -> Verdict {
    let mut bad = vec![];
    let cfg = SolverConfig { k_init: 1, max_steps: Some(1), ..SolverConfig::default() };
    for (i, p) in problems.iter().enumerate() {
        let family = FactorSetFamily::build(p);
        let tree = CliqueTree::for_family(&family, 2).expect("tree");
        let r = anytime_inference(&tree, &family, &cfg, None, |_| {}).expect("solve");
        let ub = factor_max_elimination(&tree, &family).expect("max elimination");
        let z0 = r.trace.steps[0].step_upper;
        if !z0.approx_eq(&ub, 1e-12) {
            bad.push(format!("#{i}: Z_u0={z0} vs {ub}"));
        }
    }
    check(bad, format!("{} instances match max elimination to 1e-12", problems.len()))
}

fn pruning_safety(problems: &[MmapProblem]) -> Verdict {
    let mut bad = vec![];
    let configs = [
        ("dominance", PruneConfig { dominance: true, convexity: false, convexity_max_members: 16, clustering: false }),
        ("convexity", PruneConfig { dominance: false, convexity: true, convexity_max_members: 16, clustering: false }),
    ];
    for (i, p) in problems.iter().enumerate() {
        let (zstar, _) = brute_force_mmap(p).expect("oracle");
        let family = FactorSetFamily::build(p);
        let tree = CliqueTree::for_family(&family, 2).expect("tree");
        for (name, prune) in configs {
            let cfg = SolverConfig { prune, max_steps: Some(1), ..SolverConfig::default() };
            let r = anytime_inference(&tree, &family, &cfg, None, |_| {}).expect("solve");
            if !r.z_lower.approx_eq(&zstar, 1e-9) {
                bad.push(format!("#{i} {name}: Z_l={} vs Z*={zstar}", r.z_lower));
            }
        }
    }
    check(bad, format!("{} instances exact under dominance-only and convexity-only pruning", problems.len()))
}

fn figure_shape(name: &str, steps: &[Step], opt: Scaled, secs: f64) -> Result<String, String> {
    let last = steps.last().ok_or("no steps")?;
    if !last.z_lower.approx_eq(&opt, 1e-9) {
        return Err(format!("{name}: Z_l={} vs optimum {opt}", last.z_lower));
    }
    if steps.windows(2).any(|w| w[1].z_upper > w[0].z_upper || w[1].z_lower < w[0].z_lower) {
        return Err(format!("{name}: bounds not monotone"));
    }
    if (last.gap() - 1.0).abs() > 1e-9 {
        return Err(format!("{name}: final gap {}", last.gap()));
    }
    if secs > 60.0 {
        return Err(format!("{name}: took {secs:.1}s"));
    }
    Ok(format!("{name} converged in {} steps, {secs:.2}s (gap {:.3} -> 1)", steps.len(), steps[0].gap()))
}

fn scaled_experiments() -> Verdict {
    let mut notes = vec![];

    let start = Instant::now();
    let g = grid(4, 4, 1, 2, 2024).expect("grid");
    let r = run(&g, &SolverConfig::default());
    let secs = start.elapsed().as_secs_f64();
    if g.decision().len() != 12 {
        return Err("grid does not have 12 decisions".into());
    }
    if !r.argmax.contains(&r.assignment) {
        return Err("grid: assignment outside the argmax set".into());
    }
    notes.push(figure_shape("grid-4-4-1", &r.steps, r.zstar, secs)?);

    let start = Instant::now();
    let ks = knapsack(&KnapsackSpec::new(3, 10, 2024)).expect("knapsack");
    let family = FactorSetFamily::build(&ks.problem);
    let tree = CliqueTree::for_family(&family, 2).expect("tree");
    let mut steps = vec![];
    let res = anytime_inference(&tree, &family, &SolverConfig::default(), None, |s| steps.push(s.clone()))
        .expect("solve");
    let secs = start.elapsed().as_secs_f64();
    // direct enumeration of all packings
    let n = ks.weights.len();
    let mut best = 0.0_f64;
    let mut d = vec![0usize; n];
    loop {
        best = best.max(ks.objective(&d));
        let mut k = n;
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            d[k] += 1;
            if d[k] <= ks.bags {
                break;
            }
            d[k] = 0;
        }
        if d.iter().all(|&s| s == 0) {
            break;
        }
    }
    let packing: Vec<usize> = (0..n).map(|j| res.assignment[&VarId(j)]).collect();
    if (ks.objective(&packing) - best).abs() > 1e-9 * best {
        return Err(format!("knapsack: packing worth {} vs optimum {best}", ks.objective(&packing)));
    }
    notes.push(figure_shape("knapsack-3-10", &steps, Scaled::from_f64(best), secs)?);
    Ok(notes.join("; "))
}

fn generator_shapes() -> Verdict {
    let g = grid(6, 6, 1, 2, 1).expect("grid");
    let k = knapsack(&KnapsackSpec::new(3, 20, 1)).expect("knapsack");
    let got = [(g.model().n_vars(), g.decision().len()), (k.problem.model().n_vars(), k.problem.decision().len())];
    if got == [(36, 20), (42, 20)] {
        Ok("grid-6-6-1 has 36/20 and knapsack-3-20 has 42/20 variables/decisions".into())
    } else {
        Err(format!("got {got:?}"))
    }
}

fn complexity_cap(problems: &[MmapProblem]) -> Verdict {
    let mut bad = vec![];
    let mut nodes = 0;
    for (i, p) in problems.iter().enumerate() {
        let family = FactorSetFamily::build(p);
        let tree = CliqueTree::for_family(&family, 2).expect("tree");
        if tree.max_children() > 2 {
            bad.push(format!("#{i}: node with {} children", tree.max_children()));
        }
        let choices: Vec<usize> = tree
            .nodes()
            .iter()
            .map(|n| n.sets.iter().map(|&s| family.sets()[s].len()).product())
            .collect();
        let cfg = SolverConfig { max_steps: Some(6), ..SolverConfig::default() };
        let r = anytime_inference(&tree, &family, &cfg, None, |_| {}).expect("solve");
        for s in &r.trace.steps {
            for st in &s.nodes {
                nodes += 1;
                let cap: usize = tree.node(st.node).children.iter().map(|&c| s.caps[c]).product::<usize>() * choices[st.node];
                if st.raw_count > cap {
                    bad.push(format!("#{i} t={} node {}: |M|={} > {cap}", s.t, st.node, st.raw_count));
                }
            }
        }
    }
    check(bad, format!("{nodes} node visits within |K_i| * prod k_j"))
}

fn main() -> ExitCode {
    let problems = corpus(200, 10_000);
    let start = Instant::now();
    let runs: Vec<Run> = problems.iter().map(|p| run(p, &SolverConfig::default())).collect();
    let secs = start.elapsed().as_secs_f64();

    let results: Vec<(&str, Verdict)> = vec![
        ("oracle equivalence", oracle_equivalence(&runs, secs)),
        ("sandwich and monotonicity", sandwich(&runs)),
        ("feasibility of lower bounds", feasibility(&runs)),
        ("quality certificate", certificate(&runs)),
        ("max elimination at step 0", max_elimination(&corpus(50, 20_000))),
        ("pruning safety", pruning_safety(&corpus(100, 30_000))),
        ("scaled experiments", scaled_experiments()),
        ("generator shapes", generator_shapes()),
        ("complexity cap", complexity_cap(&corpus(60, 40_000))),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        match v {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
