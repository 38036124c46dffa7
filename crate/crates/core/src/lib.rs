//! Embedding-map construction, noise reduction and dictionary scoring for
//! text corpora.
//!
//! The crate is organised by stage: [`gateway`] talks to an embedding and
//! log-score backend, [`manifold`] projects embeddings and answers
//! neighbourhood queries, [`partition`] assigns regions and density cores,
//! [`cascade`] decides which documents stay on the map and [`semantics`]
//! turns pole log-scores into bounded scores and corpus profiles.
//! [`pipeline`] chains them through files in a work directory.

pub mod cascade;
pub mod error;
pub mod gateway;
pub mod graph;
pub mod io;
pub mod manifold;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod semantics;

pub use error::{Error, Result};
pub use model::{
    validate_corpus, DocumentRecord, EmbeddingVector, FilterVerdict, PositionalDictionary, ProjectedPoint,
    RegionAssignment, ScoreVector, SemanticDimension, ValidationReport,
};
