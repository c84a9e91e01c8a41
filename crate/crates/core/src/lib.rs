//! Scholarly knowledge graph toolkit.
//!
//! Builds a curated heterogeneous graph (papers, authors, institutions,
//! concepts, topics) from flat CSV exports, trains TransE embeddings over it,
//! fuses them with semantic document vectors and evaluates top-k similar-paper
//! recommendations.
//!
//! The stages are plain functions over immutable values:
//!
//! ```text
//! ingest::load_corpus -> curation::curate -> graph::build_graph
//!     -> kge::train / semantic::embed_corpus -> similarity -> evaluation
//! ```

pub mod curation;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod ingest;
pub mod kge;
pub mod numeric;
pub mod semantic;
pub mod similarity;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
