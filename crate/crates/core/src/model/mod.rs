//! The learner: encoder, filtration and prediction heads, loss and training.

pub mod checkpoint;
mod config;
mod network;
mod params;
pub mod prior;
mod train;

pub use config::Config;
pub use network::{
    batch_diagrams, forward, loss, predict, Architecture, Batch, Forward, LossTerms, Mode, Model, Prediction,
    SplitDiagrams, MIN_PRIOR_WIDTH,
};
pub use params::{bias, glorot, Adam, ParamStore};
pub use train::{
    architecture_for, evaluate, history_csv, initial_model, train, train_step, EpochRecord, Evaluation,
    GraphPrediction, TrainOutcome, HISTORY_HEADER,
};
