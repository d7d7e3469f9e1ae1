//! Triple relevance scoring.
//!
//! A three-stage pipeline for scoring how relevant each
//! `(entity, relation, value)` triple of a type-like relation is:
//!
//! 1. [`kg_model`] trains TransR embeddings on the knowledge base and ranks
//!    every entity's candidate values by the TransR score.
//! 2. [`ranking`] adjusts those ranks: professions by word-vector similarity
//!    to the top-ranked profession ([`similarity`]), nationalities by
//!    demonym-aware bag-of-words counts over annotated sentences.
//! 3. [`scoring`] maps ranks onto relevance scores with a step-down table.
//!
//! [`metrics`] implements the evaluation measures and [`ingest`] the input
//! formats.

pub mod error;
pub mod ingest;
pub mod kg_model;
pub mod metrics;
pub mod ranking;
pub mod scoring;
pub mod similarity;

pub use error::{Error, Result};
