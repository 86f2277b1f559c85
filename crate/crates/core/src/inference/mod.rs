//! Next-state predictors on a causal graph: the message-passing network,
//! its training loop, and the strength-softmax, Markov and uniform baselines.

pub mod network;
mod predictor;
mod train;
mod unroll;

pub use network::{forward_layer, forward_logits, layer_loss_and_grad, softmax, LayerParams, FEATURE_DIM};
pub use predictor::{argmax, markov_baseline, predict_next, softmax_strength_predict, PredictMode, Predictor};
pub(crate) use predictor::choose;
pub use train::{forward, loss_and_grad, train, training_examples, PredictorParams, TrainConfig, TrainReport, Trained};
pub use unroll::{unroll_adjacency, Node, UnrolledGraph};
