//! Single-factor message passing: the partition function of one member
//! selection, the max-sum upper bound, and evaluation of a decision
//! assignment on a fixed tree.

use crate::clique_tree::CliqueTree;
use crate::factor::{Factor, Scope, VarId};
use crate::model::{Assignment, FactorSetFamily, SetKind};
use crate::plan::{check_tree, local_product, node_scope, Contraction};
use crate::scaled::{ldexp, normalize_table, Scaled};
use crate::Error;

/// Collect-pass message of one node: `table * 2^exponent` over the node's
/// separator.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub scope: Scope,
    pub table: Vec<f64>,
    pub exponent: i64,
}

impl Message {
    /// The message as a plain factor; only meaningful when it fits in `f64`.
    pub fn to_factor(&self) -> Factor {
        let t = self.table.iter().map(|&v| ldexp(v, self.exponent)).collect();
        Factor::new(self.scope.clone(), t).expect("message tables are valid")
    }

    /// Total mass of a zero-ary message.
    pub fn value(&self) -> Scaled {
        Scaled::new(self.table.iter().sum(), self.exponent)
    }
}

fn check_selection(family: &FactorSetFamily, selection: &[usize]) -> Result<(), Error> {
    if selection.len() != family.len() {
        return Err(Error::SelectionLength { expected: family.len(), actual: selection.len() });
    }
    for (s, (&m, set)) in selection.iter().zip(family.sets()).enumerate() {
        if m >= set.len() {
            return Err(Error::MemberOutOfRange { set: s, member: m });
        }
    }
    Ok(())
}

/// All collect-pass messages for the members picked by `selection`, by
/// node id. The root message is zero-ary and holds `Z`.
pub fn factor_elimination_messages(
    tree: &CliqueTree,
    family: &FactorSetFamily,
    selection: &[usize],
) -> Result<Vec<Message>, Error> {
    check_tree(tree, family)?;
    check_selection(family, selection)?;
    let mut msgs: Vec<Option<Message>> = vec![None; tree.len()];
    for i in tree.postorder() {
        let node = tree.node(i);
        let scope = node_scope(tree, &node.vars);
        let sep = node_scope(tree, &tree.separator(i));
        let members: Vec<usize> = node.sets.iter().map(|&s| selection[s]).collect();
        let (local, local_exp, nonzero) = local_product(family, &node.sets, &members)?;
        let kids: Vec<&Message> = node.children.iter().map(|&c| msgs[c].as_ref().expect("postorder")).collect();
        let kid_scopes: Vec<Scope> = kids.iter().map(|m| m.scope.clone()).collect();
        let plan = Contraction::new(&scope, local.scope(), &kid_scopes, &sep);
        let tabs: Vec<&[f64]> = kids.iter().map(|m| m.table.as_slice()).collect();
        let mut table = plan.run(local.table(), &nonzero, &tabs);
        let exponent = local_exp + kids.iter().map(|m| m.exponent).sum::<i64>() + normalize_table(&mut table);
        msgs[i] = Some(Message { scope: sep, table, exponent });
    }
    Ok(msgs.into_iter().map(|m| m.expect("every node visited")).collect())
}

/// `Z = sum_x prod_s K_s[selection[s]](x)`.
pub fn factor_elimination(tree: &CliqueTree, family: &FactorSetFamily, selection: &[usize]) -> Result<Scaled, Error> {
    let msgs = factor_elimination_messages(tree, family, selection)?;
    Ok(msgs[tree.root()].value())
}

/// `Z_d` for a complete decision assignment on an existing tree.
pub fn evaluate_assignment(tree: &CliqueTree, family: &FactorSetFamily, d: &Assignment) -> Result<Scaled, Error> {
    let selection = family.selection_for(d)?;
    factor_elimination(tree, family, &selection)
}

/// Upper bound on `max_d Z_d`: at each node, sum out the fresh latent
/// variables, then maximize the fresh decision variables.
pub fn factor_max_elimination(tree: &CliqueTree, family: &FactorSetFamily) -> Result<Scaled, Error> {
    check_tree(tree, family)?;
    let mut msgs: Vec<Option<Message>> = vec![None; tree.len()];
    for i in tree.postorder() {
        let node = tree.node(i);
        let scope = node_scope(tree, &node.vars);
        let sep_vars = tree.separator(i);
        let fresh_d: Vec<VarId> = tree
            .eliminated(i)
            .into_iter()
            .filter(|v| family.decision().binary_search(v).is_ok())
            .collect();
        let target_vars: Vec<VarId> = node
            .vars
            .iter()
            .copied()
            .filter(|v| sep_vars.contains(v) || fresh_d.contains(v))
            .collect();
        let target = node_scope(tree, &target_vars);
        let sets: Vec<usize> = node
            .sets
            .iter()
            .copied()
            .filter(|&s| !matches!(family.sets()[s].kind, SetKind::Decision(_)))
            .collect();
        let (local, local_exp, nonzero) = local_product(family, &sets, &vec![0; sets.len()])?;
        let kids: Vec<&Message> = node.children.iter().map(|&c| msgs[c].as_ref().expect("postorder")).collect();
        let kid_scopes: Vec<Scope> = kids.iter().map(|m| m.scope.clone()).collect();
        let plan = Contraction::new(&scope, local.scope(), &kid_scopes, &target);
        let tabs: Vec<&[f64]> = kids.iter().map(|m| m.table.as_slice()).collect();
        let summed = Factor::new(target, plan.run(local.table(), &nonzero, &tabs))?;
        let maxed = summed.max_marginalize(&fresh_d)?;
        let scope = maxed.scope().clone();
        let mut table = maxed.into_table();
        let exponent = local_exp + kids.iter().map(|m| m.exponent).sum::<i64>() + normalize_table(&mut table);
        msgs[i] = Some(Message { scope, table, exponent });
    }
    Ok(msgs[tree.root()].as_ref().expect("root visited").value())
}
