//! Hierarchical LSTM encoder with a multi-head pointer decoder.
//!
//! A sequence LSTM turns each sequence's embedded tokens into a vector
//! `s_i`; a document LSTM reads those vectors and its final state seeds the
//! decoder LSTM. At each step the decoder advances on the previously chosen
//! vector and scores every candidate with the affine form
//! `W'(W[s_i; h] + b) + b'`, averaged over the heads, followed by a softmax
//! over unvisited candidates.
//!
//! Because the score is affine in `h`, the decoder state shifts every
//! candidate's score by the same amount at a given step and so never changes
//! the step distribution. The model is kept literal anyway; see the README.

mod beam;
mod model;
mod train;

pub use beam::{beam_search, greedy_decode, order_logprob, BeamResult, DecodeState, EncodedDoc};
pub use model::{
    decode_step, encode_document, encode_sequence, pointer_score, DocumentEncoding, HeadParams,
    ModelConfig, ModelLayout, OrderModel, StepOutput, MODEL_FORMAT, MODEL_VERSION,
};
pub use train::{
    batch_loss, document_loss, init_seed, predict, prepare_documents, read_predictions, shuffle_document,
    pairs, train, train_model, write_predictions, EpochRecord, Prediction, PreparedDoc, StopReason, TrainConfig,
    TrainHistory,
};
