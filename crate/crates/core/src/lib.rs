//! Toolkit for sentence- and paragraph-ordering benchmarks.
//!
//! * [`corpus`]: JSONL corpora, tokenization, vocabularies, embeddings, splits.
//! * [`metrics`]: PMR, accuracy, Kendall's tau and WLCS-l.
//! * [`noise`]: insert/remove/modify corruption at a contamination level.
//! * [`sampler`]: bootstrap mini-datasets for learnability sweeps.
//! * [`numkernel`]: dense tensors with reverse-mode differentiation.
//! * [`ordermodel`]: hierarchical LSTM encoder with a pointer decoder.
//! * [`harness`]: experiment grids, synthetic corpora and reports.
//! * [`humaneval`]: rater agreement and metric regressions.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod humaneval;
pub mod metrics;
pub mod noise;
pub mod numkernel;
pub mod ordermodel;
pub mod rng;
pub mod sampler;

pub use corpus::{Corpus, Document, Level, Sequence, Vocabulary};
pub use error::{Error, Result};
pub use harness::{ExperimentSpec, HarnessResults};
pub use humaneval::{AgreementReport, RatingMatrix};
pub use metrics::{EvalPair, MetricReport, Order, WlcsParams};
pub use noise::{NoiseAudit, NoiseConfig};
pub use ordermodel::{ModelConfig, OrderModel, TrainConfig};
pub use sampler::SamplePlan;
