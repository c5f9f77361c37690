//! Hierarchies of abstract MDPs built from options, and planning over them.
//!
//! A [`Hierarchy`] starts from a base MDP. Each added level takes a set of
//! options over the level below, derives a new state space from their
//! initiation and effect sets, and records how every abstract state grounds
//! down to the level beneath. Queries over base states are answered by
//! searching levels from the top and planning at the first level whose
//! states can express the query.

#[cfg(test)]
extern crate self as skillsym;

pub mod abstraction;
pub mod hierarchy;
pub mod mdp;
pub mod planner;
pub mod skill;
pub mod symbols;

#[cfg(test)]
#[path = "../tests/common/mod.rs"]
mod common;

pub use abstraction::{AbstractLevel, AbstractionError, OptionClass, RewardMode};
pub use hierarchy::{Hierarchy, HierarchyError, Violation, ViolationKind};
pub use mdp::{ActionId, Mdp, MdpError, StateId, StateSpace, Variable};
pub use planner::{answer_query, findplan, refine, Answer, Plan, PlanError, PlanMethod, PlanQuery};
pub use skill::{ExecutionTrace, OptionSkill};
pub use symbols::{GroundingSet, SymbolError};
