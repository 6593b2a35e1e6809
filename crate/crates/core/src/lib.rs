//! RACE-CMS: a one-pass, mergeable sketch for exact v-nearest-neighbor
//! identification over set-valued data.
//!
//! Every data point is a sparse set of 32-bit IDs (for graphs, an adjacency
//! list). The sketch is a `d x w` count-min grid in which every cell holds `R`
//! independent arrays of counts indexed by a concatenated MinHash. Querying
//! estimates each count-min measurement of the LSH kernel vector
//! `s_j = p(x_j, q)^K` with a median of means over the `R` arrays, recovers
//! every `s_j` with the count-min minimum rule, and reports the top-v indices.
//!
//! Modules:
//!
//! - [`core`]: domain types, configuration and validation.
//! - [`hashing`]: MinHash, K-wise concatenation with rehash, count-min hashes.
//! - [`race_cms`]: the sketch, merge, storage modes, binary format.
//! - [`recovery`]: median of means, count-min recovery, top-v selection.
//! - [`planner`]: parameter selection from query stability.
//! - [`oracle`]: brute-force ground truth.
//! - [`baselines`]: sparse random projection and random sampling.
//! - [`ingest`]: edge list parsing, dataset statistics, raw size accounting.
//! - [`harness`]: recall evaluation, memory sweeps, CSV output.

pub mod baselines;
pub mod codec;
pub mod core;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod ingest;
pub mod oracle;
pub mod planner;
pub mod race_cms;
pub mod recovery;

pub use crate::core::{
    make_sparse_vector, validate_config, Dataset, LshSharing, QueryResult, ScoreVector,
    SketchConfig, SparseVector, StorageMode,
};
pub use crate::error::{Error, Result};
pub use crate::hashing::{collision_model, HashPlan};
pub use crate::race_cms::RaceCmsSketch;
pub use crate::recovery::{query, MomPolicy};
