//! Seeded benchmark generators: border-decision grids, multiple knapsack
//! chains and small random models for testing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::factor::{Factor, Scope, VarId};
use crate::model::{Assignment, GraphicalModel, MmapProblem};
use crate::Error;

fn uniform_table(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    // (0, 1]
    (0..len).map(|_| 1.0 - rng.random::<f64>()).collect()
}

fn random_factor(rng: &mut ChaCha8Rng, vars: &[usize], cards: &[usize]) -> Factor {
    let vs: Vec<VarId> = vars.iter().map(|&v| VarId(v)).collect();
    let cs: Vec<usize> = vars.iter().map(|&v| cards[v]).collect();
    let scope = Scope::new(vs, cs).expect("generated scopes are valid");
    let table = uniform_table(rng, scope.config_count());
    Factor::new(scope, table).expect("generated tables are valid")
}

/// A `rows x cols` grid with `planes` layers of variables with `states`
/// states each.
///
/// One plane: unary and nearest-neighbour factors, border variables are
/// decisions. Two planes: a latent grid plus a decision plane whose
/// variable `(r, c)` is linked to grid variable `(r, c)` by a pairwise
/// factor. Variables are numbered plane-major, then row-major.
pub fn grid(rows: usize, cols: usize, planes: usize, states: usize, seed: u64) -> Result<MmapProblem, Error> {
    if planes != 1 && planes != 2 {
        return Err(Error::Config(format!("planes must be 1 or 2, got {planes}")));
    }
    if states < 2 {
        return Err(Error::Config(format!("states must be at least 2, got {states}")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Config("grid needs at least one row and one column".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = rows * cols;
    let n = plane * planes;
    let cards = vec![states; n];
    let at = |r: usize, c: usize| r * cols + c;
    let mut factors = Vec::new();
    for v in 0..plane {
        factors.push(random_factor(&mut rng, &[v], &cards));
    }
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                factors.push(random_factor(&mut rng, &[at(r, c), at(r, c + 1)], &cards));
            }
            if r + 1 < rows {
                factors.push(random_factor(&mut rng, &[at(r, c), at(r + 1, c)], &cards));
            }
        }
    }
    let decision: Vec<VarId> = if planes == 1 {
        (0..plane)
            .filter(|&v| {
                let (r, c) = (v / cols, v % cols);
                r == 0 || c == 0 || r + 1 == rows || c + 1 == cols
            })
            .map(VarId)
            .collect()
    } else {
        for v in 0..plane {
            factors.push(random_factor(&mut rng, &[v + plane], &cards));
            factors.push(random_factor(&mut rng, &[v, v + plane], &cards));
        }
        (plane..n).map(VarId).collect()
    };
    let model = GraphicalModel::new(cards, factors)?;
    Ok(MmapProblem::new(model, decision, Assignment::new())?)
}

/// Parameters of a multiple knapsack instance.
#[derive(Clone, Debug, PartialEq)]
pub struct KnapsackSpec {
    pub bags: usize,
    pub items: usize,
    pub seed: u64,
    /// Item weights are drawn uniformly from `1..=max_weight`.
    pub max_weight: u32,
    /// Item profits are drawn uniformly from `1..=max_profit`.
    pub max_profit: u32,
    /// Per-bag capacity; `None` uses half the total weight spread over the
    /// bags, clamped to `max_capacity`.
    pub capacity: Option<u32>,
    pub max_capacity: u32,
    /// A packed item multiplies the model by `2^(profit / profit_scale)`.
    pub profit_scale: f64,
}

impl KnapsackSpec {
    pub fn new(bags: usize, items: usize, seed: u64) -> KnapsackSpec {
        KnapsackSpec {
            bags,
            items,
            seed,
            max_weight: 3,
            max_profit: 20,
            capacity: None,
            max_capacity: 4,
            profit_scale: 10.0,
        }
    }
}

/// A generated knapsack model with the parameters it encodes.
#[derive(Clone, Debug)]
pub struct Knapsack {
    pub problem: MmapProblem,
    pub weights: Vec<u32>,
    pub profits: Vec<u32>,
    pub capacity: u32,
    pub bags: usize,
    pub profit_scale: f64,
}

impl Knapsack {
    /// Multiplicative objective of a packing (`d[j]` is 0 for "not packed"
    /// or the 1-based bag), 0 when a bag overflows.
    pub fn objective(&self, d: &[usize]) -> f64 {
        let mut load = vec![0u32; self.bags];
        let mut profit = 0.0;
        for (j, &b) in d.iter().enumerate() {
            if b > 0 {
                load[b - 1] += self.weights[j];
                profit += self.profits[j] as f64;
            }
        }
        if load.iter().any(|&l| l > self.capacity) {
            0.0
        } else {
            (profit / self.profit_scale).exp2()
        }
    }

    pub fn decision_vars(&self) -> &[VarId] {
        self.problem.decision()
    }
}

/// Multiple knapsack as a chain.
///
/// Variables: `D_1..D_n` (ids `0..n`, state 0 = leave out, state `b` =
/// put in bag `b`), then load accumulators `A_0..A_n` (ids `n..=2n`) and a
/// binary terminal `T` (id `2n+1`), so `2n + 2` variables in all. `A_j`
/// ranges over the per-bag load vectors reachable after `j` items plus one
/// overflow state. Factors: a deterministic transition on
/// `(A_{j-1}, D_j, A_j)`, a profit reward on `D_j`, and `T` indicating that
/// `A_n` is within capacity.
pub fn knapsack(spec: &KnapsackSpec) -> Result<Knapsack, Error> {
    if spec.bags == 0 || spec.items == 0 {
        return Err(Error::Config("knapsack needs at least one bag and one item".into()));
    }
    if spec.max_weight == 0 || spec.max_profit == 0 || spec.profit_scale <= 0.0 {
        return Err(Error::Config("weights, profits and the profit scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.items;
    let bags = spec.bags;
    let weights: Vec<u32> = (0..n).map(|_| rng.random_range(1..=spec.max_weight)).collect();
    let profits: Vec<u32> = (0..n).map(|_| rng.random_range(1..=spec.max_profit)).collect();
    let total: u32 = weights.iter().sum();
    let capacity = spec
        .capacity
        .unwrap_or_else(|| (total.div_ceil(2 * bags as u32)).clamp(1, spec.max_capacity));

    // reachable load vectors per step, sorted, overflow last
    type Load = Vec<u32>;
    let mut layers: Vec<Vec<Load>> = vec![vec![vec![0; bags]]];
    let mut overflow: Vec<bool> = vec![false];
    for j in 0..n {
        let mut next: Vec<Load> = Vec::new();
        let mut over = overflow[j];
        for l in &layers[j] {
            for b in 0..=bags {
                let mut m = l.clone();
                if b > 0 {
                    m[b - 1] += weights[j];
                    if m[b - 1] > capacity {
                        over = true;
                        continue;
                    }
                }
                next.push(m);
            }
        }
        next.sort();
        next.dedup();
        layers.push(next);
        overflow.push(over);
    }
    let index: Vec<BTreeMap<Load, usize>> = layers
        .iter()
        .map(|ls| ls.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect())
        .collect();
    let card_a: Vec<usize> = layers.iter().zip(&overflow).map(|(l, &o)| l.len() + o as usize).collect();
    let state_of = |j: usize, l: Option<&Load>| -> usize {
        match l {
            Some(l) => index[j][l],
            None => layers[j].len(),
        }
    };

    let d = |j: usize| j;
    let a = |j: usize| n + j;
    let t = 2 * n + 1;
    let mut cards = vec![bags + 1; n];
    cards.extend(&card_a);
    cards.push(2);

    let mut factors = Vec::new();
    for j in 1..=n {
        let vars = vec![VarId(a(j - 1)), VarId(d(j - 1)), VarId(a(j))];
        let cs = vec![card_a[j - 1], bags + 1, card_a[j]];
        let scope = Scope::new(vars, cs.clone())?;
        let mut table = vec![0.0; scope.config_count()];
        let mut put = |prev: usize, choice: usize, next: usize| table[(prev * cs[1] + choice) * cs[2] + next] = 1.0;
        for (p, l) in layers[j - 1].iter().enumerate() {
            for b in 0..=bags {
                let mut m = l.clone();
                let fits = b == 0 || {
                    m[b - 1] += weights[j - 1];
                    m[b - 1] <= capacity
                };
                let s = state_of(j, fits.then_some(&m));
                put(p, b, s);
            }
        }
        if overflow[j - 1] {
            let s = state_of(j, None);
            for b in 0..=bags {
                put(layers[j - 1].len(), b, s);
            }
        }
        factors.push(Factor::new(scope, table)?);

        let reward = (profits[j - 1] as f64 / spec.profit_scale).exp2();
        let mut r = vec![reward; bags + 1];
        r[0] = 1.0;
        factors.push(Factor::new(Scope::new(vec![VarId(d(j - 1))], vec![bags + 1])?, r)?);
    }
    let fin = Scope::new(vec![VarId(a(n)), VarId(t)], vec![card_a[n], 2])?;
    let mut table = vec![0.0; fin.config_count()];
    for s in 0..layers[n].len() {
        table[s * 2 + 1] = 1.0;
    }
    factors.push(Factor::new(fin, table)?);

    let model = GraphicalModel::new(cards, factors)?;
    let decision = (0..n).map(VarId).collect();
    let problem = MmapProblem::new(model, decision, Assignment::new())?;
    Ok(Knapsack { problem, weights, profits, capacity, bags, profit_scale: spec.profit_scale })
}

/// Interaction structure of a random test model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Structure {
    Chain,
    #[default]
    Tree,
    Grid,
    /// A random tree plus extra random edges.
    Loopy,
}

/// Parameters of a random pairwise model.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSpec {
    pub n_vars: usize,
    pub n_decision: usize,
    pub structure: Structure,
    /// Cardinalities are drawn from `2..=max_card`.
    pub max_card: usize,
    /// Probability that a pairwise table entry is zero.
    pub zero_prob: f64,
    /// Number of latent variables receiving evidence.
    pub n_evidence: usize,
    pub seed: u64,
}

impl Default for RandomSpec {
    fn default() -> RandomSpec {
        RandomSpec {
            n_vars: 6,
            n_decision: 2,
            structure: Structure::Tree,
            max_card: 2,
            zero_prob: 0.0,
            n_evidence: 0,
            seed: 0,
        }
    }
}

/// A random model with unary factors on every variable and pairwise
/// factors along the chosen structure.
pub fn random_problem(spec: &RandomSpec) -> MmapProblem {
    let n = spec.n_vars.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=spec.max_card.max(2))).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    match spec.structure {
        Structure::Chain => edges.extend((1..n).map(|i| (i - 1, i))),
        Structure::Tree | Structure::Loopy => edges.extend((1..n).map(|i| (rng.random_range(0..i), i))),
        Structure::Grid => {
            let cols = (n as f64).sqrt().ceil() as usize;
            for v in 0..n {
                if (v + 1) % cols != 0 && v + 1 < n {
                    edges.push((v, v + 1));
                }
                if v + cols < n {
                    edges.push((v, v + cols));
                }
            }
        }
    }
    if spec.structure == Structure::Loopy && n > 2 {
        for _ in 0..n / 2 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && !edges.contains(&(a.min(b), a.max(b))) {
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    let mut factors: Vec<Factor> = (0..n).map(|v| random_factor(&mut rng, &[v], &cards)).collect();
    for &(a, b) in &edges {
        let mut f = random_factor(&mut rng, &[a, b], &cards);
        if spec.zero_prob > 0.0 {
            let mut t = f.table().to_vec();
            for x in t.iter_mut() {
                if rng.random::<f64>() < spec.zero_prob {
                    *x = 0.0;
                }
            }
            f = Factor::new(f.scope().clone(), t).expect("zeroed table is valid");
        }
        factors.push(f);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_dec = spec.n_decision.min(n);
    let decision: Vec<VarId> = order[..n_dec].iter().map(|&v| VarId(v)).collect();
    let evidence: Assignment = order[n_dec..]
        .iter()
        .take(spec.n_evidence)
        .map(|&v| (VarId(v), rng.random_range(0..cards[v])))
        .collect();
    let model = GraphicalModel::new(cards, factors).expect("generated model is valid");
    MmapProblem::new(model, decision, evidence).expect("generated query is valid")
}

/// Four binary variables: decisions `X0, X1` with unary factors, a latent
/// `X2` tied to both and a latent `X3` tied to all three.
pub fn small_example(seed: u64) -> MmapProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards = vec![2; 4];
    let scopes: [&[usize]; 8] = [&[0], &[1], &[0, 2], &[1, 2], &[2, 3], &[0, 3], &[1, 3], &[3]];
    let factors = scopes.iter().map(|s| random_factor(&mut rng, s, &cards)).collect();
    let model = GraphicalModel::new(cards, factors).expect("valid model");
    MmapProblem::new(model, vec![VarId(0), VarId(1)], Assignment::new()).expect("valid query")
}
