//! Gradient-matching training: losses, Adam, joint coordinate-map
//! training and the neural-ODE baseline.

pub mod loss;
pub mod model;
pub mod optim;
pub mod train;

pub use loss::{pnorm_loss, pnorm_loss_lipschitz, LossConfig, LossTarget};
pub use model::{ModelDoc, ModelKind, TrainedModel};
pub use optim::{Adam, AdamConfig, BatchSchedule, TrainConfig, TrainFailure, TrainReport, TrainResult};
pub use train::{
    align_mean, neural_ode_loss_gradient, train, train_neural_ode, train_transformed, transformed_loss_gradient,
    TransformedPair,
};
