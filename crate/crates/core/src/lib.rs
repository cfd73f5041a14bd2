//! Bayesian-network structure learning under ordered-block-model priors.
//!
//! Graphs are DAGs on at most 64 nodes stored as parent/child bitmasks
//! ([`dag`]). Nodes are grouped into ordered layers by an urn partition
//! ([`partition`]); [`priors`] assigns graph probabilities on top of that,
//! [`likelihood`] scores categorical data, [`inference`] explores the
//! posterior and [`eval`] runs and summarises experiments.

pub mod dag;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod inference;
pub mod likelihood;
pub mod partition;
pub mod priors;
pub mod special;

pub use dag::{Dag, Layering};
pub use error::{Error, Result};
pub use likelihood::{DataMatrix, FamilyCache};
pub use partition::UrnParams;
pub use priors::{BetaPolicy, MinimalEval, PriorMode, PriorParams};
