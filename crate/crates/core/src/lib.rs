//! Untrained relational graph-convolutional embeddings for knowledge graphs.
//!
//! Every random tensor (initial node features, per-relation transforms and the
//! self-loop transform) is regenerated on demand from a single master seed, so
//! nothing but the seed needs to be stored. Embeddings are produced by frozen
//! relational message passing, optionally extended with PPV features (the
//! per-dimension proportion of strictly positive neighbour states).
//!
//! This crate is `no_std` and only needs `alloc`. File formats, the N-Triples
//! reader and the command line live in the `rrgcn` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod classify;
pub mod embed;
pub mod error;
pub mod graph;
pub mod linkpred;
pub mod matrix;
pub mod rng;

pub use embed::{embed, embed_overhead_bytes, estimate_memory, EmbedConfig, MemoryMode, NodeEmbeddings};
pub use error::{Error, Result};
pub use graph::{GraphIndex, GraphBuilder, LabeledSplit, TripleSplit};
pub use matrix::Matrix;
pub use rng::{SeedSchedule, WeightInit, WeightSpec};
