//! Utility-diversity online batch selection.
//!
//! Each candidate in a training batch is scored by the nuclear norm of its
//! logits matrix (utility and intra-sample diversity) plus a weighted mean
//! distance between a compact projection of those logits and the
//! projections of recently selected samples (inter-sample diversity). The
//! top `K` of every batch of `B` are trained on.
//!
//! The crate is organised bottom-up:
//!
//! - [`logits`] and [`norm`]: logits matrices, softmax, nuclear norm.
//! - [`transform`] and [`projection`]: the fast orthonormal transform and the
//!   two-sided structured projection with its dense Kronecker oracle.
//! - [`buffer`]: the FIFO embedding memory and the diversity distance.
//! - [`selector`]: score combination, top-K and the per-batch step.
//! - [`taylor`]: first-order loss-change diagnostics.
//! - [`toy`]: a desk-scale language model, optimizer and corpus.
//! - [`harness`]: seeded experiment runner, sweeps and acceptance checks.

pub mod buffer;
pub mod error;
pub mod harness;
pub mod logits;
pub mod norm;
pub mod projection;
pub mod selector;
pub mod taylor;
pub mod toy;
pub mod transform;

pub use buffer::{diversity_distance, MemoryBuffer};
pub use error::{Result, UdsError};
pub use logits::{softmax_rows, LogitsMatrix, ProbMatrix};
pub use norm::{lemma_bounds_check, nuclear_norm, BoundVerdict, NormReport};
pub use projection::{
    build_projection, jl_distortion_probe, project_dense_oracle, project_fast, Embedding,
    ProjectionFactor, ProjectionPair,
};
pub use selector::{combine_scores, select_topk, uds_step, ScoreRecord, Scorer, SelectionConfig};
