//! Anytime marginal MAP inference by propagating sets of factors over a
//! clique tree.
//!
//! The pipeline is: load a [`model::GraphicalModel`] and a query, build the
//! [`model::FactorSetFamily`], triangulate it into a
//! [`clique_tree::CliqueTree`], then run [`anytime::anytime_inference`]. Each
//! step of the loop yields a feasible lower bound with the assignment that
//! attains it and an upper bound on the optimum.

pub mod anytime;
pub mod clique_tree;
pub mod elimination;
pub mod factor;
pub mod generate;
pub mod model;
pub mod oracle;
mod plan;
pub mod propagation;
pub mod scaled;
pub mod uai;

use thiserror::Error;

pub use crate::anytime::{anytime_inference, AnytimeResult, BoundsTrace, Growth, SolverConfig, Step, Termination};
pub use crate::clique_tree::{CliqueTree, EliminationOrder, TreeError};
pub use crate::factor::{Factor, FactorError, Scope, VarId};
pub use crate::model::{Assignment, FactorSetFamily, GraphicalModel, MmapProblem, ModelError};
pub use crate::propagation::{factor_set_elimination, PropagationOptions, PropagationResult, PruneConfig};
pub use crate::scaled::Scaled;
pub use crate::uai::ParseError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("selection has {actual} entries but the family has {expected} sets")]
    SelectionLength { expected: usize, actual: usize },
    #[error("member {member} is out of range for factor set {set}")]
    MemberOutOfRange { set: usize, member: usize },
    #[error("tree and family disagree: {0}")]
    TreeMismatch(String),
    #[error("decision {0} committed twice with different states")]
    TraceCollision(VarId),
    #[error("trace misses decision {0}")]
    IncompleteTrace(VarId),
    #[error("message sets need about {needed} bytes, over the {budget} byte budget")]
    BudgetExhausted { needed: usize, budget: usize },
    #[error("propagation was interrupted")]
    Interrupted,
    #[error("{count} configurations exceed the enumeration cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },
    #[error("invalid configuration: {0}")]
    Config(String),
}
