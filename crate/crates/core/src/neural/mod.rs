//! From-scratch layers, losses, optimizer and training loop.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use layers::{Layer, LayerKind};
pub use loss::{bce_loss, mse_loss, reconstruction_error, Loss};
pub use model::{Arch, Gradients, Network};
pub use optim::Adam;
pub use tensor::{Shape3, Tensor4};
pub use train::{early_stopping, train, EpochRecord, History, Targets, TrainConfig, TrainData};
