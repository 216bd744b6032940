//! Two-block chain graph models: binary treatments and confounders point
//! into one undirected block of interacting binary outcomes.
//!
//! The crate covers the model types ([`model`]), exact inference by
//! enumeration ([`exact`]), Gibbs sampling and synthetic data
//! ([`sampler`]), structure learning, fitting and bootstrap
//! ([`estimation`]), the temporal-contagion experiments ([`conjecture`])
//! and Supreme Court Database ingestion ([`scdb`]).

pub mod conjecture;
pub mod data;
pub mod error;
pub mod estimation;
pub mod exact;
pub mod graph;
pub mod model;
pub mod reference;
pub mod sampler;
pub mod scdb;
pub mod seed;

pub use data::{Case, CaseDataset};
pub use error::{Error, Result};
pub use exact::{CovariateLaw, EffectEstimate, EffectScale, EventPredicate, ExactEngine};
pub use graph::NetworkGraph;
pub use model::{ChainGraphModel, Covariates, Outcome, Treatment, TreatmentMode};
