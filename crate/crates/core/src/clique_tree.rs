//! Clique trees over factor-set families: min-fill triangulation, tree
//! assembly, rooting, fan-in bounding and factor-set assignment.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::factor::VarId;
use crate::model::{FactorSetFamily, GraphicalModel, SetKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("node {0} does not exist")]
    InvalidNode(usize),
    #[error("elimination order is not a permutation of the {0} model variables")]
    InvalidOrder(usize),
    #[error("factor set {0} fits in no clique")]
    Uncovered(usize),
    #[error("max_children must be at least 2, got {0}")]
    FanIn(usize),
    #[error("clique tree invariant broken: {0}")]
    Invariant(String),
}

/// A total order in which variables are eliminated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationOrder(pub Vec<VarId>);

impl EliminationOrder {
    /// Greedy minimum fill-in on the interaction graph of `scopes`; ties go
    /// to the smaller resulting clique, then to the lower variable index.
    pub fn min_fill<'a>(n_vars: usize, scopes: impl IntoIterator<Item = &'a [VarId]>) -> EliminationOrder {
        let mut adj = interaction_graph(n_vars, scopes);
        let mut alive = vec![true; n_vars];
        let mut order = Vec::with_capacity(n_vars);
        for _ in 0..n_vars {
            let mut best: Option<(usize, usize, usize)> = None;
            for v in (0..n_vars).filter(|&v| alive[v]) {
                let key = (fill_in(&adj, v), adj[v].len() + 1, v);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
            let (_, _, v) = best.expect("a live vertex remains");
            eliminate(&mut adj, v);
            alive[v] = false;
            order.push(VarId(v));
        }
        EliminationOrder(order)
    }

    /// Min-fill over the factor scopes of `model`.
    pub fn for_model(model: &GraphicalModel) -> EliminationOrder {
        EliminationOrder::min_fill(model.n_vars(), model.factors().iter().map(|f| f.vars()))
    }

    pub fn vars(&self) -> &[VarId] {
        &self.0
    }

    /// Largest elimination clique minus one on the interaction graph.
    pub fn induced_width<'a>(&self, n_vars: usize, scopes: impl IntoIterator<Item = &'a [VarId]>) -> usize {
        let mut adj = interaction_graph(n_vars, scopes);
        let mut width = 0;
        for v in &self.0 {
            width = width.max(adj[v.0].len());
            eliminate(&mut adj, v.0);
        }
        width
    }

    /// Number of fill edges the order adds.
    pub fn fill_edges<'a>(&self, n_vars: usize, scopes: impl IntoIterator<Item = &'a [VarId]>) -> usize {
        let mut adj = interaction_graph(n_vars, scopes);
        let mut total = 0;
        for v in &self.0 {
            total += fill_in(&adj, v.0);
            eliminate(&mut adj, v.0);
        }
        total
    }
}

fn interaction_graph<'a>(n_vars: usize, scopes: impl IntoIterator<Item = &'a [VarId]>) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); n_vars];
    for s in scopes {
        for (i, a) in s.iter().enumerate() {
            for b in &s[i + 1..] {
                adj[a.0].insert(b.0);
                adj[b.0].insert(a.0);
            }
        }
    }
    adj
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nbrs: Vec<usize> = adj[v].iter().copied().collect();
    let mut fill = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !adj[a].contains(&b) {
                fill += 1;
            }
        }
    }
    fill
}

fn eliminate(adj: &mut [BTreeSet<usize>], v: usize) {
    let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
    for &a in &nbrs {
        adj[a].remove(&v);
        for &b in &nbrs {
            if a != b {
                adj[a].insert(b);
            }
        }
    }
}

/// Node of a rooted clique tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueNode {
    /// Index set, sorted ascending.
    pub vars: Vec<VarId>,
    /// Indices into the factor-set family assigned to this node.
    pub sets: Vec<usize>,
    pub parent: Option<usize>,
    /// Children, ascending.
    pub children: Vec<usize>,
    /// True for nodes inserted by fan-in bounding.
    pub copy: bool,
}

impl CliqueNode {
    pub fn contains(&self, v: VarId) -> bool {
        self.vars.binary_search(&v).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct SetInfo {
    vars: Vec<VarId>,
    decision: Option<VarId>,
}

/// A rooted clique tree with the factor sets of one family assigned to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueTree {
    nodes: Vec<CliqueNode>,
    root: usize,
    cards: Vec<usize>,
    decision: Vec<VarId>,
    set_info: Vec<SetInfo>,
}

impl CliqueTree {
    /// Min-fill order, tree assembly, default root, fan-in bound.
    pub fn for_family(family: &FactorSetFamily, max_children: usize) -> Result<CliqueTree, TreeError> {
        let order = EliminationOrder::min_fill(
            family.n_vars(),
            family.sets().iter().map(|s| s.scope().vars()),
        );
        CliqueTree::build(&order, family)?.binarize(max_children)
    }

    /// Joins the maximal elimination cliques of `order` into a tree, roots it
    /// at the default root and assigns every factor set.
    pub fn build(order: &EliminationOrder, family: &FactorSetFamily) -> Result<CliqueTree, TreeError> {
        let n = family.n_vars();
        let mut seen = vec![false; n];
        for v in order.vars() {
            if v.0 >= n || seen[v.0] {
                return Err(TreeError::InvalidOrder(n));
            }
            seen[v.0] = true;
        }
        if order.vars().len() != n {
            return Err(TreeError::InvalidOrder(n));
        }
        let set_info: Vec<SetInfo> = family
            .sets()
            .iter()
            .map(|s| SetInfo {
                vars: s.scope().vars().to_vec(),
                decision: match s.kind {
                    SetKind::Decision(v) => Some(v),
                    _ => None,
                },
            })
            .collect();

        // elimination cliques and the elimination-tree parent of each
        let mut adj = interaction_graph(n, set_info.iter().map(|s| s.vars.as_slice()));
        let mut rank = vec![0; n];
        for (i, v) in order.vars().iter().enumerate() {
            rank[v.0] = i;
        }
        let mut cliques: Vec<BTreeSet<usize>> = Vec::with_capacity(n);
        let mut link: Vec<Option<usize>> = Vec::with_capacity(n);
        for v in order.vars() {
            let mut c: BTreeSet<usize> = adj[v.0].clone();
            let next = c.iter().copied().min_by_key(|&u| rank[u]);
            link.push(next.map(|u| rank[u]));
            c.insert(v.0);
            cliques.push(c);
            eliminate(&mut adj, v.0);
        }

        // undirected tree over cliques, then absorb non-maximal ones
        let mut nbrs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cliques.len()];
        for (i, p) in link.iter().enumerate() {
            if let Some(p) = *p {
                nbrs[i].insert(p);
                nbrs[p].insert(i);
            }
        }
        let mut alive = vec![true; cliques.len()];
        loop {
            let mut merged = false;
            for a in 0..cliques.len() {
                if !alive[a] {
                    continue;
                }
                let target = nbrs[a].iter().copied().find(|&b| cliques[a].is_subset(&cliques[b]));
                if let Some(b) = target {
                    let others: Vec<usize> = nbrs[a].iter().copied().filter(|&x| x != b).collect();
                    for x in others {
                        nbrs[x].remove(&a);
                        nbrs[x].insert(b);
                        nbrs[b].insert(x);
                    }
                    nbrs[b].remove(&a);
                    nbrs[a].clear();
                    alive[a] = false;
                    merged = true;
                }
            }
            if !merged {
                break;
            }
        }

        let ids: Vec<usize> = (0..cliques.len()).filter(|&i| alive[i]).collect();
        let mut new_id = vec![usize::MAX; cliques.len()];
        for (k, &i) in ids.iter().enumerate() {
            new_id[i] = k;
        }
        let mut nodes: Vec<CliqueNode> = ids
            .iter()
            .map(|&i| CliqueNode {
                vars: cliques[i].iter().map(|&v| VarId(v)).collect(),
                sets: vec![],
                parent: None,
                children: nbrs[i].iter().map(|&j| new_id[j]).collect(),
                copy: false,
            })
            .collect();
        if nodes.is_empty() {
            nodes.push(CliqueNode { vars: vec![], sets: vec![], parent: None, children: vec![], copy: false });
        }
        // chain disconnected components together
        let comps = components(&nodes);
        for w in comps.windows(2) {
            let (a, b) = (w[0], w[1]);
            nodes[a].children.push(b);
            nodes[b].children.push(a);
        }

        let mut tree = CliqueTree {
            nodes,
            root: 0,
            cards: family.cards().to_vec(),
            decision: family.decision().to_vec(),
            set_info,
        };
        let root = tree.default_root();
        tree.orient(root);
        tree.assign_sets()?;
        tree.check()?;
        Ok(tree)
    }

    /// Node holding the most decision variables, lowest id on ties.
    pub fn default_root(&self) -> usize {
        let mut best = 0;
        let mut best_count = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            let c = self.decision.iter().filter(|v| n.contains(**v)).count();
            if c > best_count {
                best = i;
                best_count = c;
            }
        }
        best
    }

    pub fn nodes(&self) -> &[CliqueNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &CliqueNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn n_vars(&self) -> usize {
        self.cards.len()
    }

    /// Largest index set size minus one.
    pub fn width(&self) -> usize {
        self.nodes.iter().map(|n| n.vars.len()).max().unwrap_or(0).saturating_sub(1)
    }

    pub fn max_children(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).max().unwrap_or(0)
    }

    /// `I_i ∩ I_pa(i)`, empty at the root.
    pub fn separator(&self, i: usize) -> Vec<VarId> {
        match self.nodes[i].parent {
            Some(p) => self.nodes[i].vars.iter().copied().filter(|v| self.nodes[p].contains(*v)).collect(),
            None => vec![],
        }
    }

    /// `I_i \ I_pa(i)`: variables summed or maximized out at node `i`.
    pub fn eliminated(&self, i: usize) -> Vec<VarId> {
        match self.nodes[i].parent {
            Some(p) => self.nodes[i].vars.iter().copied().filter(|v| !self.nodes[p].contains(*v)).collect(),
            None => self.nodes[i].vars.clone(),
        }
    }

    /// Nodes of the subtree at `i`, `i` first.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut k = 0;
        while k < out.len() {
            out.extend(self.nodes[out[k]].children.iter().copied());
            k += 1;
        }
        out
    }

    /// `h(i)`: every variable of the subtree at `i` outside `I_pa(i)`.
    pub fn subtree_eliminated(&self, i: usize) -> BTreeSet<VarId> {
        let pa: BTreeSet<VarId> = match self.nodes[i].parent {
            Some(p) => self.nodes[p].vars.iter().copied().collect(),
            None => BTreeSet::new(),
        };
        self.subtree(i)
            .into_iter()
            .flat_map(|j| self.nodes[j].vars.iter().copied())
            .filter(|v| !pa.contains(v))
            .collect()
    }

    /// Children before parents, siblings in ascending id.
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded {
                out.push(i);
            } else {
                stack.push((i, true));
                for &c in self.nodes[i].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Recomputes orientation toward `r` and reassigns factor sets.
    pub fn root_at(&self, r: usize) -> Result<CliqueTree, TreeError> {
        if r >= self.nodes.len() {
            return Err(TreeError::InvalidNode(r));
        }
        let mut t = self.clone();
        for n in t.nodes.iter_mut() {
            if let Some(p) = n.parent.take() {
                n.children.push(p);
            }
        }
        for n in t.nodes.iter_mut() {
            n.children.sort_unstable();
        }
        t.orient(r);
        t.assign_sets()?;
        t.check()?;
        Ok(t)
    }

    /// Splits wide nodes into chains of copies so no node has more than
    /// `max_children` children. Copies share their parent's index set and
    /// carry no factor sets.
    pub fn binarize(&self, max_children: usize) -> Result<CliqueTree, TreeError> {
        if max_children < 2 {
            return Err(TreeError::FanIn(max_children));
        }
        let mut t = self.clone();
        let mut i = 0;
        while i < t.nodes.len() {
            if t.nodes[i].children.len() > max_children {
                let keep = max_children - 1;
                let moved: Vec<usize> = t.nodes[i].children.split_off(keep);
                let id = t.nodes.len();
                for &c in &moved {
                    t.nodes[c].parent = Some(id);
                }
                t.nodes.push(CliqueNode {
                    vars: t.nodes[i].vars.clone(),
                    sets: vec![],
                    parent: Some(i),
                    children: moved,
                    copy: true,
                });
                t.nodes[i].children.push(id);
            }
            i += 1;
        }
        t.check()?;
        Ok(t)
    }

    fn orient(&mut self, r: usize) {
        // on entry `children` holds undirected neighbours
        let n = self.nodes.len();
        let adj: Vec<Vec<usize>> = self.nodes.iter().map(|x| x.children.clone()).collect();
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([r]);
        visited[r] = true;
        for x in self.nodes.iter_mut() {
            x.parent = None;
            x.children.clear();
        }
        while let Some(i) = queue.pop_front() {
            let mut kids: Vec<usize> = adj[i].iter().copied().filter(|&j| !visited[j]).collect();
            kids.sort_unstable();
            for &j in &kids {
                visited[j] = true;
                self.nodes[j].parent = Some(i);
                queue.push_back(j);
            }
            self.nodes[i].children = kids;
        }
        self.root = r;
    }

    /// Model and evidence sets go to the lowest-id node covering their
    /// scope; a decision set goes to the node where its variable is
    /// eliminated.
    fn assign_sets(&mut self) -> Result<(), TreeError> {
        for n in self.nodes.iter_mut() {
            n.sets.clear();
        }
        for (s, info) in self.set_info.iter().enumerate() {
            let target = match info.decision {
                Some(v) => (0..self.nodes.len()).find(|&i| {
                    self.nodes[i].contains(v)
                        && self.nodes[i].parent.is_none_or(|p| !self.nodes[p].contains(v))
                }),
                None => (0..self.nodes.len())
                    .find(|&i| info.vars.iter().all(|v| self.nodes[i].contains(*v))),
            };
            let i = target.ok_or(TreeError::Uncovered(s))?;
            self.nodes[i].sets.push(s);
        }
        Ok(())
    }

    /// Checks tree shape, running intersection, set coverage and `h(r) = [n]`.
    pub fn check(&self) -> Result<(), TreeError> {
        let bad = |m: String| Err(TreeError::Invariant(m));
        let n = self.nodes.len();
        if self.nodes[self.root].parent.is_some() {
            return bad("root has a parent".into());
        }
        let mut reached = vec![false; n];
        for i in self.postorder() {
            if reached[i] {
                return bad(format!("node {i} reached twice"));
            }
            reached[i] = true;
            for &c in &self.nodes[i].children {
                if self.nodes[c].parent != Some(i) {
                    return bad(format!("child {c} of {i} points elsewhere"));
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return bad("tree is disconnected".into());
        }
        // running intersection: every variable's nodes have exactly one top
        for v in 0..self.n_vars() {
            let v = VarId(v);
            let tops = (0..n)
                .filter(|&i| {
                    self.nodes[i].contains(v) && self.nodes[i].parent.is_none_or(|p| !self.nodes[p].contains(v))
                })
                .count();
            if tops > 1 {
                return bad(format!("nodes holding {v} are not connected"));
            }
        }
        let mut count = vec![0; self.set_info.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            for &s in &node.sets {
                count[s] += 1;
                if !self.set_info[s].vars.iter().all(|v| node.contains(*v)) {
                    return bad(format!("set {s} does not fit node {i}"));
                }
            }
        }
        if let Some(s) = count.iter().position(|&c| c != 1) {
            return bad(format!("set {s} assigned {} times", count[s]));
        }
        if self.subtree_eliminated(self.root).len() != self.n_vars() {
            return bad("root subtree does not cover every variable".into());
        }
        Ok(())
    }

    /// Line-oriented dump: `node <id> parent <p|-> vars <..> sets <..>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "root {} width {} nodes {}", self.root, self.width(), self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let vars: Vec<String> = n.vars.iter().map(|v| v.0.to_string()).collect();
            let sets: Vec<String> = n.sets.iter().map(|s| s.to_string()).collect();
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let _ = writeln!(
                out,
                "node {i} parent {parent} vars [{}] sets [{}]{}",
                vars.join(" "),
                sets.join(" "),
                if n.copy { " copy" } else { "" }
            );
        }
        out
    }
}

/// First node of each connected component of the undirected adjacency
/// currently stored in `children`.
fn components(nodes: &[CliqueNode]) -> Vec<usize> {
    let mut seen = vec![false; nodes.len()];
    let mut firsts = vec![];
    for s in 0..nodes.len() {
        if seen[s] {
            continue;
        }
        firsts.push(s);
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(i) = stack.pop() {
            for &j in &nodes[i].children {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    firsts
}
