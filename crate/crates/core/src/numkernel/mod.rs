//! Dense f64 tensors with a reverse-mode tape, sized for small recurrent
//! models: vectors, matrices, matrix-vector products and the handful of
//! nonlinearities an LSTM with pointer attention needs.

mod checkpoint;
mod gradcheck;
mod graph;
mod lstm;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{ParamCheckpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{log_softmax_values, softmax_values, Graph, NodeId};
pub use lstm::{lstm_cell, LstmParams};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Gradients, ParamId, ParamStore};
pub use tensor::Tensor;
