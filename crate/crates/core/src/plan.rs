//! Precomputed index arithmetic for the per-node contraction
//! `out(T) = sum over the rest of local(S) * prod_j child_j(sep_j)`, shared by
//! exact elimination, max elimination and set propagation.

use crate::clique_tree::CliqueTree;
use crate::factor::{for_each_config, Factor, Scope, VarId};
use crate::model::FactorSetFamily;
use crate::scaled::normalize_table;
use crate::Error;

/// Offsets for one node: the outer loop walks the local factor's entries,
/// the inner loop walks the node variables outside the local scope.
#[derive(Clone, Debug)]
pub(crate) struct Contraction {
    slots: usize,
    outer: Vec<usize>,
    inner: Vec<usize>,
    out_len: usize,
}

impl Contraction {
    /// `node` is the full index set; `local`, every child scope and `target`
    /// must be subsets of it.
    pub(crate) fn new(node: &Scope, local: &Scope, children: &[Scope], target: &Scope) -> Contraction {
        let slots = 1 + children.len();
        let local_vars: Vec<VarId> = local.vars().to_vec();
        let rest = node.without(&local_vars);

        let offsets = |over: &Scope| -> Vec<usize> {
            let strides: Vec<Vec<usize>> = std::iter::once(target.strides_within(over))
                .chain(children.iter().map(|c| c.strides_within(over)))
                .collect();
            let refs: Vec<&[usize]> = strides.iter().map(|s| s.as_slice()).collect();
            let mut table = Vec::with_capacity(over.config_count() * slots);
            for_each_config(over.cards(), &refs, |o| table.extend_from_slice(o));
            table
        };
        Contraction {
            slots,
            outer: offsets(local),
            inner: offsets(&rest),
            out_len: target.config_count(),
        }
    }

    pub(crate) fn out_len(&self) -> usize {
        self.out_len
    }

    /// Accumulates into a fresh table; `nonzero` lists the local entries to
    /// visit.
    pub(crate) fn run(&self, local: &[f64], nonzero: &[u32], children: &[&[f64]]) -> Vec<f64> {
        debug_assert_eq!(children.len() + 1, self.slots);
        let mut out = vec![0.0; self.out_len];
        let s = self.slots;
        let inner_n = self.inner.len() / s;
        match children.len() {
            0 => {
                for &f in nonzero {
                    let f = f as usize;
                    let v = local[f];
                    let b = self.outer[f * s];
                    for r in 0..inner_n {
                        out[b + self.inner[r * s]] += v;
                    }
                }
            }
            1 => {
                let c0 = children[0];
                for &f in nonzero {
                    let f = f as usize;
                    let v = local[f];
                    let base = &self.outer[f * s..f * s + 2];
                    for r in 0..inner_n {
                        let inn = &self.inner[r * s..r * s + 2];
                        out[base[0] + inn[0]] += v * c0[base[1] + inn[1]];
                    }
                }
            }
            2 => {
                let (c0, c1) = (children[0], children[1]);
                for &f in nonzero {
                    let f = f as usize;
                    let v = local[f];
                    let base = &self.outer[f * s..f * s + 3];
                    for r in 0..inner_n {
                        let inn = &self.inner[r * s..r * s + 3];
                        out[base[0] + inn[0]] += v * c0[base[1] + inn[1]] * c1[base[2] + inn[2]];
                    }
                }
            }
            _ => {
                for &f in nonzero {
                    let f = f as usize;
                    let v = local[f];
                    let base = &self.outer[f * s..(f + 1) * s];
                    for r in 0..inner_n {
                        let inn = &self.inner[r * s..(r + 1) * s];
                        let mut p = v;
                        for (c, child) in children.iter().enumerate() {
                            p *= child[base[c + 1] + inn[c + 1]];
                        }
                        out[base[0] + inn[0]] += p;
                    }
                }
            }
        }
        out
    }
}

/// One way to pick a member from every set assigned to a node, multiplied
/// into a single normalized table.
#[derive(Clone, Debug)]
pub(crate) struct LocalChoice {
    pub table: Vec<f64>,
    pub exponent: i64,
    pub nonzero: Vec<u32>,
    /// Decision states committed by this choice.
    pub tags: Vec<(VarId, usize)>,
}

#[derive(Clone, Debug)]
pub(crate) struct NodePlan {
    pub children: Vec<usize>,
    pub choices: Vec<LocalChoice>,
    pub contraction: Contraction,
}

/// Per-node plans for one tree and family.
#[derive(Clone, Debug)]
pub(crate) struct TreePlan {
    pub nodes: Vec<NodePlan>,
    pub order: Vec<usize>,
    pub root: usize,
}

pub(crate) fn node_scope(tree: &CliqueTree, vars: &[VarId]) -> Scope {
    let cards = vars.iter().map(|v| tree.cards()[v.0]).collect();
    Scope::new(vars.to_vec(), cards).expect("tree scopes are valid")
}

pub(crate) fn check_tree(tree: &CliqueTree, family: &FactorSetFamily) -> Result<(), Error> {
    if tree.cards() != family.cards() {
        return Err(Error::TreeMismatch("variable domains differ".into()));
    }
    let mut seen = vec![0usize; family.len()];
    for n in tree.nodes() {
        for &s in &n.sets {
            if s >= family.len() {
                return Err(Error::TreeMismatch(format!("tree references set {s}")));
            }
            seen[s] += 1;
        }
    }
    if let Some(s) = seen.iter().position(|&c| c != 1) {
        return Err(Error::TreeMismatch(format!("set {s} is assigned {} times", seen[s])));
    }
    tree.check()?;
    Ok(())
}

/// Product of one member per set, normalized, with its nonzero entries.
pub(crate) fn local_product(family: &FactorSetFamily, sets: &[usize], members: &[usize]) -> Result<(Factor, i64, Vec<u32>), Error> {
    let mut f = Factor::scalar(1.0);
    for (&s, &m) in sets.iter().zip(members) {
        f = f.product(&family.sets()[s].members[m])?;
    }
    let scope = f.scope().clone();
    let mut table = f.into_table();
    let exponent = normalize_table(&mut table);
    let nonzero = nonzero_entries(&table);
    Ok((Factor::from_parts(scope, table), exponent, nonzero))
}

pub(crate) fn nonzero_entries(table: &[f64]) -> Vec<u32> {
    table
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i as u32)
        .collect()
}

impl TreePlan {
    pub(crate) fn build(tree: &CliqueTree, family: &FactorSetFamily) -> Result<TreePlan, Error> {
        check_tree(tree, family)?;
        let mut nodes = Vec::with_capacity(tree.len());
        for (i, node) in tree.nodes().iter().enumerate() {
            let scope = node_scope(tree, &node.vars);
            let sep = node_scope(tree, &tree.separator(i));
            let children = node.children.clone();
            let child_seps: Vec<Scope> = children.iter().map(|&c| node_scope(tree, &tree.separator(c))).collect();
            let sets = node.sets.clone();
            let radix: Vec<usize> = sets.iter().map(|&s| family.sets()[s].len()).collect();
            let total: usize = radix.iter().product();

            let mut choices = Vec::with_capacity(total);
            let mut digits = vec![0usize; sets.len()];
            let mut local_scope = Scope::empty();
            for c in 0..total {
                let (f, exponent, nonzero) = local_product(family, &sets, &digits)?;
                if c == 0 {
                    local_scope = f.scope().clone();
                }
                let tags = sets
                    .iter()
                    .zip(&digits)
                    .filter_map(|(&s, &m)| family.sets()[s].tag(m))
                    .collect();
                choices.push(LocalChoice { table: f.into_table(), exponent, nonzero, tags });
                for k in (0..digits.len()).rev() {
                    digits[k] += 1;
                    if digits[k] < radix[k] {
                        break;
                    }
                    digits[k] = 0;
                }
            }
            let contraction = Contraction::new(&scope, &local_scope, &child_seps, &sep);
            nodes.push(NodePlan { children, choices, contraction });
        }
        Ok(TreePlan { nodes, order: tree.postorder(), root: tree.root() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scope(vars: &[usize], cards: &[usize]) -> Scope {
        Scope::new(vars.iter().map(|&v| VarId(v)).collect(), cards.to_vec()).unwrap()
    }

    #[test]
    fn contraction_matches_factor_algebra() {
        let node = scope(&[0, 1, 2], &[2, 3, 2]);
        let local = Factor::new(scope(&[1, 0], &[3, 2]), vec![0.1, 0.2, 0.0, 0.4, 0.5, 0.6]).unwrap();
        let child = Factor::new(scope(&[1, 2], &[3, 2]), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let target = scope(&[2], &[2]);
        let c = Contraction::new(&node, local.scope(), &[child.scope().clone()], &target);
        let nz = nonzero_entries(local.table());
        let out = c.run(local.table(), &nz, &[child.table()]);
        let expect = local
            .product(&child)
            .unwrap()
            .sum_marginalize(&[VarId(0), VarId(1)])
            .unwrap();
        for (a, b) in out.iter().zip(expect.table()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn three_children_generic_path() {
        let node = scope(&[0, 1], &[2, 2]);
        let local = Factor::constant(scope(&[0], &[2]), 1.0);
        let kids: Vec<Factor> = (0..3)
            .map(|k| Factor::new(scope(&[1], &[2]), vec![1.0 + k as f64, 2.0]).unwrap())
            .collect();
        let scopes: Vec<Scope> = kids.iter().map(|k| k.scope().clone()).collect();
        let c = Contraction::new(&node, local.scope(), &scopes, &Scope::empty());
        let tabs: Vec<&[f64]> = kids.iter().map(|k| k.table()).collect();
        let out = c.run(local.table(), &[0, 1], &tabs);
        // 2 * (1*2*3 + 2*2*2)
        assert_eq!(out, vec![28.0]);
    }
}
