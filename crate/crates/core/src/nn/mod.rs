//! Neural network engine: layers, the multi-branch model, training.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod train;

pub use gradcheck::{grad_check, grad_check_fn, GradCheckReport};
pub use layers::{forward_conv1d_maxpool, forward_dense, forward_lstm, Activation, LstmWeights};
pub use model::{InputDims, LayerKind, ModelInput, NetConfig, OmniRank, ParamGroup};
pub use train::{train, Optimizer, TrainConfig, TrainOutcome, TrainedModel};
