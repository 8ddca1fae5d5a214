//! Graphical models, marginal MAP problems, and their reformulation as a
//! choice of one factor from each of a family of factor sets.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::factor::{Factor, FactorError, Scope, VarId};

/// Full or partial assignment of states to variables.
pub type Assignment = BTreeMap<VarId, usize>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("factor {factor} references variable {var}, model has {n_vars} variables")]
    VariableOutOfRange { factor: usize, var: usize, n_vars: usize },
    #[error("factor {factor}: {var} declared with {declared} states, model says {model}")]
    CardinalityMismatch { factor: usize, var: VarId, declared: usize, model: usize },
    #[error("variable {0} has zero states")]
    EmptyDomain(VarId),
    #[error("variable index {0} out of range")]
    UnknownVariable(usize),
    #[error("variable {0} is both a decision variable and evidence")]
    DecisionIsEvidence(VarId),
    #[error("variable {0} listed twice")]
    Duplicate(VarId),
    #[error("evidence {var}={state} out of range ({card} states)")]
    EvidenceOutOfRange { var: VarId, state: usize, card: usize },
    #[error("decision variable {0} is not assigned")]
    MissingDecision(VarId),
    #[error("assignment {var}={state} out of range ({card} states)")]
    StateOutOfRange { var: VarId, state: usize, card: usize },
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// A product of nonnegative factors over discrete variables.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphicalModel {
    cards: Vec<usize>,
    factors: Vec<Factor>,
    explicit: usize,
}

impl GraphicalModel {
    /// Validates scopes against `cards` and appends a uniform unary factor
    /// for every variable no factor mentions.
    pub fn new(cards: Vec<usize>, factors: Vec<Factor>) -> Result<GraphicalModel, ModelError> {
        let n = cards.len();
        if let Some(v) = cards.iter().position(|&c| c == 0) {
            return Err(ModelError::EmptyDomain(VarId(v)));
        }
        let mut covered = vec![false; n];
        for (i, f) in factors.iter().enumerate() {
            for (&v, &c) in f.scope().vars().iter().zip(f.scope().cards()) {
                if v.0 >= n {
                    return Err(ModelError::VariableOutOfRange { factor: i, var: v.0, n_vars: n });
                }
                if cards[v.0] != c {
                    return Err(ModelError::CardinalityMismatch {
                        factor: i,
                        var: v,
                        declared: c,
                        model: cards[v.0],
                    });
                }
                covered[v.0] = true;
            }
        }
        let explicit = factors.len();
        let mut factors = factors;
        for (v, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
            let scope = Scope::new(vec![VarId(v)], vec![cards[v]])?;
            factors.push(Factor::constant(scope, 1.0));
        }
        Ok(GraphicalModel { cards, factors, explicit })
    }

    pub fn n_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn card(&self, var: VarId) -> usize {
        self.cards[var.0]
    }

    /// All factors, the implicit uniform ones last.
    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Factors as read from the input, without the implicit unary ones.
    pub fn explicit_factors(&self) -> &[Factor] {
        &self.factors[..self.explicit]
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (0..self.n_vars()).map(VarId)
    }
}

/// A model with its decision/latent partition and evidence.
#[derive(Clone, Debug, PartialEq)]
pub struct MmapProblem {
    model: GraphicalModel,
    decision: Vec<VarId>,
    latent: Vec<VarId>,
    evidence: Assignment,
}

impl MmapProblem {
    /// Every variable that is neither a decision nor evidence is latent.
    pub fn new(
        model: GraphicalModel,
        decision: Vec<VarId>,
        evidence: Assignment,
    ) -> Result<MmapProblem, ModelError> {
        let n = model.n_vars();
        let mut decision = decision;
        decision.sort();
        for w in decision.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::Duplicate(w[0]));
            }
        }
        if let Some(v) = decision.iter().find(|v| v.0 >= n) {
            return Err(ModelError::UnknownVariable(v.0));
        }
        for (&var, &state) in &evidence {
            if var.0 >= n {
                return Err(ModelError::UnknownVariable(var.0));
            }
            let card = model.card(var);
            if state >= card {
                return Err(ModelError::EvidenceOutOfRange { var, state, card });
            }
            if decision.binary_search(&var).is_ok() {
                return Err(ModelError::DecisionIsEvidence(var));
            }
        }
        let latent = model
            .vars()
            .filter(|v| decision.binary_search(v).is_err() && !evidence.contains_key(v))
            .collect();
        Ok(MmapProblem { model, decision, latent, evidence })
    }

    pub fn model(&self) -> &GraphicalModel {
        &self.model
    }

    /// Decision variables in ascending order.
    pub fn decision(&self) -> &[VarId] {
        &self.decision
    }

    pub fn latent(&self) -> &[VarId] {
        &self.latent
    }

    pub fn evidence(&self) -> &Assignment {
        &self.evidence
    }

    pub fn is_decision(&self, var: VarId) -> bool {
        self.decision.binary_search(&var).is_ok()
    }

    /// Number of full decision assignments, saturating.
    pub fn decision_space_size(&self) -> usize {
        self.decision
            .iter()
            .fold(1usize, |acc, &v| acc.saturating_mul(self.model.card(v)))
    }

    /// Errors unless `d` assigns every decision variable an in-range state.
    pub fn check_assignment(&self, d: &Assignment) -> Result<(), ModelError> {
        for &v in &self.decision {
            let state = *d.get(&v).ok_or(ModelError::MissingDecision(v))?;
            let card = self.model.card(v);
            if state >= card {
                return Err(ModelError::StateOutOfRange { var: v, state, card });
            }
        }
        Ok(())
    }

    /// `Z_d`: the model clamped to `d` and the evidence, all else summed.
    pub fn assignment_value(&self, d: &Assignment) -> Result<crate::Scaled, crate::Error> {
        self.check_assignment(d)?;
        let family = FactorSetFamily::build(self);
        let tree = crate::clique_tree::CliqueTree::for_family(&family, 2)?;
        crate::elimination::evaluate_assignment(&tree, &family, d)
    }
}

/// Where a factor set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetKind {
    /// Singleton holding model factor number `.0`.
    Model(usize),
    /// Singleton indicator clamping an evidence variable.
    Evidence(VarId),
    /// One indicator per state of a decision variable.
    Decision(VarId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    pub kind: SetKind,
    pub members: Vec<Factor>,
}

impl FactorSet {
    pub fn scope(&self) -> &Scope {
        self.members[0].scope()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Decision state that member `i` commits to, if this is a decision set.
    pub fn tag(&self, i: usize) -> Option<(VarId, usize)> {
        match self.kind {
            SetKind::Decision(v) => Some((v, i)),
            _ => None,
        }
    }
}

/// The sets `K_1 … K_{m+d}`; choosing one member from each yields the model
/// clamped to one decision assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSetFamily {
    sets: Vec<FactorSet>,
    cards: Vec<usize>,
    decision: Vec<VarId>,
}

impl FactorSetFamily {
    /// Model factors first in input order, then evidence indicators, then
    /// decision indicator sets, the latter two by ascending variable.
    pub fn build(problem: &MmapProblem) -> FactorSetFamily {
        let model = problem.model();
        let mut sets: Vec<FactorSet> = model
            .factors()
            .iter()
            .enumerate()
            .map(|(i, f)| FactorSet { kind: SetKind::Model(i), members: vec![f.clone()] })
            .collect();
        for (&var, &state) in problem.evidence() {
            let ind = Factor::indicator(var, model.card(var), state).expect("validated evidence");
            sets.push(FactorSet { kind: SetKind::Evidence(var), members: vec![ind] });
        }
        for &var in problem.decision() {
            let card = model.card(var);
            let members = (0..card)
                .map(|s| Factor::indicator(var, card, s).expect("state in range"))
                .collect();
            sets.push(FactorSet { kind: SetKind::Decision(var), members });
        }
        FactorSetFamily {
            sets,
            cards: model.cards().to_vec(),
            decision: problem.decision().to_vec(),
        }
    }

    pub fn sets(&self) -> &[FactorSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn n_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn decision(&self) -> &[VarId] {
        &self.decision
    }

    /// Number of distinct member combinations, saturating.
    pub fn combination_count(&self) -> usize {
        self.sets.iter().fold(1usize, |acc, s| acc.saturating_mul(s.len()))
    }

    /// Member index per set selecting the indicators of `d`.
    pub fn selection_for(&self, d: &Assignment) -> Result<Vec<usize>, ModelError> {
        self.sets
            .iter()
            .map(|s| match s.kind {
                SetKind::Decision(v) => {
                    let state = *d.get(&v).ok_or(ModelError::MissingDecision(v))?;
                    if state >= s.len() {
                        return Err(ModelError::StateOutOfRange { var: v, state, card: s.len() });
                    }
                    Ok(state)
                }
                _ => Ok(0),
            })
            .collect()
    }

    /// Decision assignment encoded by a selection.
    pub fn assignment_of(&self, selection: &[usize]) -> Assignment {
        self.sets
            .iter()
            .zip(selection)
            .filter_map(|(s, &i)| s.tag(i))
            .collect()
    }
}
