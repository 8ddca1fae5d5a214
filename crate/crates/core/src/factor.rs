//! Dense factors over discrete variables.
//!
//! Tables are row-major with the last scope variable iterating fastest.
//! All operations are pure; factors are immutable once built.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a variable in its owning model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("variable {var} has cardinality {left} in one factor and {right} in another")]
    CardinalityMismatch { var: VarId, left: usize, right: usize },
    #[error("scopes differ: {left:?} vs {right:?}")]
    ScopeMismatch { left: Vec<VarId>, right: Vec<VarId> },
    #[error("variable {0} is not in the factor scope")]
    NotInScope(VarId),
    #[error("state {state} out of range for {var} with {card} states")]
    StateOutOfRange { var: VarId, state: usize, card: usize },
    #[error("variable {0} appears twice in a scope")]
    DuplicateVariable(VarId),
    #[error("variable {0} has zero states")]
    EmptyDomain(VarId),
    #[error("table has {actual} entries, scope needs {expected}")]
    TableLength { expected: usize, actual: usize },
    #[error("table entry {index} is {value}, entries must be finite and nonnegative")]
    InvalidEntry { index: usize, value: f64 },
}

/// Ordered variables with their cardinalities.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Scope {
    vars: Vec<VarId>,
    cards: Vec<usize>,
}

impl Scope {
    pub fn new(vars: Vec<VarId>, cards: Vec<usize>) -> Result<Scope, FactorError> {
        assert_eq!(vars.len(), cards.len(), "one cardinality per variable");
        for (i, (&v, &c)) in vars.iter().zip(&cards).enumerate() {
            if c == 0 {
                return Err(FactorError::EmptyDomain(v));
            }
            if vars[..i].contains(&v) {
                return Err(FactorError::DuplicateVariable(v));
            }
        }
        Ok(Scope { vars, cards })
    }

    pub fn empty() -> Scope {
        Scope::default()
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn position(&self, var: VarId) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.position(var).is_some()
    }

    pub fn card_of(&self, var: VarId) -> Option<usize> {
        self.position(var).map(|p| self.cards[p])
    }

    /// Number of joint configurations (1 for the empty scope).
    pub fn config_count(&self) -> usize {
        self.cards.iter().product()
    }

    /// Row-major strides, last variable fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.len()];
        for k in (0..self.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.cards[k + 1];
        }
        strides
    }

    /// Ordered union: `self` followed by the variables of `other` it lacks.
    pub fn union(&self, other: &Scope) -> Result<Scope, FactorError> {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            match self.card_of(v) {
                Some(left) if left != c => {
                    return Err(FactorError::CardinalityMismatch { var: v, left, right: c })
                }
                Some(_) => {}
                None => {
                    vars.push(v);
                    cards.push(c);
                }
            }
        }
        Ok(Scope { vars, cards })
    }

    /// Subscope with the listed variables removed, order preserved.
    pub fn without(&self, drop: &[VarId]) -> Scope {
        let (vars, cards) = self
            .vars
            .iter()
            .zip(&self.cards)
            .filter(|(v, _)| !drop.contains(v))
            .map(|(&v, &c)| (v, c))
            .unzip();
        Scope { vars, cards }
    }

    /// Strides of `self` laid over the variables of `over`; zero where a
    /// variable of `over` is absent from `self`.
    pub fn strides_within(&self, over: &Scope) -> Vec<usize> {
        let own = self.strides();
        over.vars
            .iter()
            .map(|&v| self.position(v).map_or(0, |p| own[p]))
            .collect()
    }
}

/// Walks every configuration of `cards` in row-major order, calling `visit`
/// with one running offset per stride vector.
pub(crate) fn for_each_config(
    cards: &[usize],
    strides: &[&[usize]],
    mut visit: impl FnMut(&[usize]),
) {
    let n = cards.len();
    let mut states = vec![0usize; n];
    let mut offsets = vec![0usize; strides.len()];
    if cards.contains(&0) {
        return;
    }
    loop {
        visit(&offsets);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            states[k] += 1;
            if states[k] < cards[k] {
                for (o, s) in offsets.iter_mut().zip(strides) {
                    *o += s[k];
                }
                break;
            }
            for (o, s) in offsets.iter_mut().zip(strides) {
                *o -= s[k] * (cards[k] - 1);
            }
            states[k] = 0;
        }
    }
}

/// A nonnegative table over a scope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    scope: Scope,
    table: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Scope, table: Vec<f64>) -> Result<Factor, FactorError> {
        let expected = scope.config_count();
        if table.len() != expected {
            return Err(FactorError::TableLength { expected, actual: table.len() });
        }
        if let Some((index, &value)) =
            table.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(FactorError::InvalidEntry { index, value });
        }
        Ok(Factor { scope, table })
    }

    /// Builds a factor from a table already known to satisfy the invariants.
    pub(crate) fn from_parts(scope: Scope, table: Vec<f64>) -> Factor {
        debug_assert_eq!(scope.config_count(), table.len());
        Factor { scope, table }
    }

    pub fn scalar(value: f64) -> Factor {
        Factor { scope: Scope::empty(), table: vec![value] }
    }

    pub fn constant(scope: Scope, value: f64) -> Factor {
        let n = scope.config_count();
        Factor { scope, table: vec![value; n] }
    }

    /// One at `state`, zero elsewhere.
    pub fn indicator(var: VarId, card: usize, state: usize) -> Result<Factor, FactorError> {
        if state >= card {
            return Err(FactorError::StateOutOfRange { var, state, card });
        }
        let scope = Scope::new(vec![var], vec![card])?;
        let mut table = vec![0.0; card];
        table[state] = 1.0;
        Ok(Factor { scope, table })
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn vars(&self) -> &[VarId] {
        self.scope.vars()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn into_table(self) -> Vec<f64> {
        self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn max_entry(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }

    /// Value at a zero-ary factor.
    pub fn scalar_value(&self) -> Option<f64> {
        self.scope.is_empty().then(|| self.table[0])
    }

    /// Entry for the configuration given by `state_of` on each scope variable.
    pub fn value_at(&self, mut state_of: impl FnMut(VarId) -> usize) -> f64 {
        let strides = self.scope.strides();
        let idx: usize = self
            .scope
            .vars()
            .iter()
            .zip(&strides)
            .map(|(&v, &s)| state_of(v) * s)
            .sum();
        self.table[idx]
    }

    pub fn product(&self, other: &Factor) -> Result<Factor, FactorError> {
        let scope = self.scope.union(&other.scope)?;
        let a = self.scope.strides_within(&scope);
        let b = other.scope.strides_within(&scope);
        let mut table = Vec::with_capacity(scope.config_count());
        for_each_config(scope.cards(), &[&a, &b], |o| {
            table.push(self.table[o[0]] * other.table[o[1]]);
        });
        Ok(Factor { scope, table })
    }

    fn marginalize(
        &self,
        drop: &[VarId],
        init: f64,
        combine: impl Fn(f64, f64) -> f64,
    ) -> Result<Factor, FactorError> {
        if let Some(&v) = drop.iter().find(|v| !self.scope.contains(**v)) {
            return Err(FactorError::NotInScope(v));
        }
        let out_scope = self.scope.without(drop);
        let out_strides = out_scope.strides_within(&self.scope);
        let mut table = vec![init; out_scope.config_count()];
        let mut i = 0;
        for_each_config(self.scope.cards(), &[&out_strides], |o| {
            table[o[0]] = combine(table[o[0]], self.table[i]);
            i += 1;
        });
        Ok(Factor { scope: out_scope, table })
    }

    pub fn sum_marginalize(&self, drop: &[VarId]) -> Result<Factor, FactorError> {
        self.marginalize(drop, 0.0, |acc, v| acc + v)
    }

    pub fn max_marginalize(&self, drop: &[VarId]) -> Result<Factor, FactorError> {
        self.marginalize(drop, 0.0, f64::max)
    }

    /// Slice at `var = state`, dropping `var` from the scope.
    pub fn restrict(&self, var: VarId, state: usize) -> Result<Factor, FactorError> {
        let pos = self.scope.position(var).ok_or(FactorError::NotInScope(var))?;
        let card = self.scope.cards()[pos];
        if state >= card {
            return Err(FactorError::StateOutOfRange { var, state, card });
        }
        let out_scope = self.scope.without(&[var]);
        let own = self.scope.strides_within(&out_scope);
        let base = state * self.scope.strides()[pos];
        let mut table = Vec::with_capacity(out_scope.config_count());
        for_each_config(out_scope.cards(), &[&own], |o| table.push(self.table[base + o[0]]));
        Ok(Factor { scope: out_scope, table })
    }

    fn same_scope(&self, other: &Factor) -> Result<(), FactorError> {
        if self.scope != other.scope {
            return Err(FactorError::ScopeMismatch {
                left: self.scope.vars().to_vec(),
                right: other.scope.vars().to_vec(),
            });
        }
        Ok(())
    }

    pub fn pointwise_max(&self, other: &Factor) -> Result<Factor, FactorError> {
        self.same_scope(other)?;
        let table = self.table.iter().zip(&other.table).map(|(a, b)| a.max(*b)).collect();
        Ok(Factor { scope: self.scope.clone(), table })
    }

    /// Weak Pareto dominance: `self >= other` entrywise.
    pub fn dominates(&self, other: &Factor) -> Result<bool, FactorError> {
        self.same_scope(other)?;
        Ok(self.table.iter().zip(&other.table).all(|(a, b)| a >= b))
    }

    /// `max_x self(x) / other(x)` with `0/0 = 1` and `a/0 = +inf` for `a > 0`.
    pub fn divergence(&self, other: &Factor) -> Result<f64, FactorError> {
        self.same_scope(other)?;
        Ok(table_divergence(&self.table, &other.table, 1.0))
    }
}

/// Divergence of `a` from `b` where `a` is multiplied by `a_scale`.
pub(crate) fn table_divergence(a: &[f64], b: &[f64], a_scale: f64) -> f64 {
    let mut worst = 0.0_f64;
    let mut all_zero = true;
    for (&x, &y) in a.iter().zip(b) {
        let x = x * a_scale;
        if x == 0.0 {
            continue;
        }
        all_zero = false;
        if y == 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max(x / y);
    }
    if all_zero {
        // every ratio is 0/y = 0 or 0/0 = 1
        if a.iter().zip(b).any(|(_, &y)| y == 0.0) || a.is_empty() {
            return 1.0;
        }
        return 0.0;
    }
    if a.iter().zip(b).any(|(&x, &y)| x == 0.0 && y == 0.0) {
        worst = worst.max(1.0);
    }
    worst
}
