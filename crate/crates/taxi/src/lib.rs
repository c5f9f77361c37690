//! The Taxi domain on top of `skillsym`: layout, skills, queries, timing
//! harness and STRIPS export.

pub mod bench;
pub mod domain;
pub mod options;
pub mod pddl;
pub mod query;

use thiserror::Error;

pub use domain::{build_taxi, Cell, Taxi, TaxiSpec, TaxiState};
pub use options::{build_hierarchy, taxi_options_level1, taxi_options_level2};
pub use query::{benchmark_queries, QuerySpec, StatePredicate};

#[derive(Debug, Error)]
pub enum TaxiError {
    #[error("bad layout: {0}")]
    Layout(String),
    #[error("bad predicate: {0}")]
    Predicate(String),
    #[error("unknown depot `{0}`")]
    UnknownDepot(String),
    #[error("empty query set: {0}")]
    EmptyQuery(String),
    #[error("the hierarchy has no level {0}")]
    MissingLevel(usize),
    #[error("level {0} is not an abstract factored level")]
    NotFactored(usize),
    #[error("PDDL export: {0}")]
    Pddl(String),
    #[error("model error: {0}")]
    Model(String),
    #[error(transparent)]
    Mdp(#[from] skillsym::MdpError),
    #[error(transparent)]
    Hierarchy(#[from] skillsym::HierarchyError),
    #[error(transparent)]
    Plan(#[from] skillsym::PlanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
