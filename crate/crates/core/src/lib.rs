//! Dynamic link prediction on discrete-time graphs.
//!
//! The model stacks three attention blocks over a sequence of graph
//! snapshots: neighbor-restricted (GAT-style) attention inside each snapshot,
//! unrestricted self-attention over all nodes of the snapshot, and causally
//! masked self-attention across each node's own history. Embeddings are
//! learned without labels from random-walk co-occurrences with negative
//! sampling, then scored with a logistic link predictor.
//!
//! Everything runs on a small dense reverse-mode autodiff engine
//! ([`tensor`]) in 64-bit floats.

pub mod diagnostics;
pub mod dyngraph;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod tensor;
pub mod training;

pub use dyngraph::{EdgeEvent, IdMap, Snapshot, SnapshotSequence};
pub use error::{Error, Result};
pub use eval::{EvalPairSet, MetricReport, Predictor};
pub use model::{EmbeddingCube, MaskMode, ModelConfig, ParameterSet, Variant};
pub use sampling::{PairBatch, WalkConfig};
pub use tensor::{Tape, Tensor, Var};
pub use training::{TrainConfig, TrainReport};
