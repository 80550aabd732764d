//! Pre-training, the alternating training schedule, the optimizer and the
//! finite-difference gradient checker.

mod config;
pub mod gradcheck;
pub mod optimizer;
mod pretrain;
mod sweep;
mod trainer;

pub use config::{TrainConfig, LAMBDA_RANGE};
pub use gradcheck::{check_objective_terms, gradient_check, toy_model, toy_problem, GradCheckReport, TensorCheck, TermCheck};
pub use optimizer::{adam_update, Adam, AdamConfig, Moments};
pub use pretrain::{pretrain_encoder, PretrainedEncoder};
pub use sweep::{sweep_lambda, LambdaPoint, LambdaSweep, LAMBDA_GRID};
pub use trainer::{
    initial_state, train, train_from, BatchLosses, EpochRecord, TrainLog, Trainer, SELECTION_K,
};
