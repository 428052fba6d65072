//! Desk-scale language model, optimizer and corpus used to drive the
//! selection pipeline end to end.

pub mod corpus;
pub mod model;
pub mod optim;

pub use corpus::{make_corpus, CorpusSpec, Sample, SyntheticCorpus};
pub use model::{Architecture, ModelSpec, ToyModel};
pub use optim::{OptimizerSpec, OptimizerState};
