//! Tooling for measuring whether trait-based relational knowledge in word
//! embeddings depends on direct concept-trait co-occurrence.
//!
//! The pieces compose into one experiment: build concept-trait datasets from
//! feature norms ([`datasets`]), remove co-occurrences from an annotated
//! corpus ([`ablation`]), train paired CBOW models ([`embeddings`]) and probe
//! them ([`probing`]).

pub mod ablation;
pub mod corpus;
pub mod datasets;
pub mod embeddings;
pub mod error;
pub mod probing;
pub mod synth;

pub use error::{Error, Result};
