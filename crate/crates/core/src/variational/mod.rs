//! Gaussian variational family, VI/PVI losses, Adam and the training loop.

mod adam;
mod loss;
mod state;
mod train;

pub use adam::{adam_step, AdamState};
pub(crate) use loss::kl_with_grad;
pub use loss::{pvi_explicit_loss, pvi_kde_loss, pvi_kde_loss_with_bandwidths, vi_loss, LossEval, LossKind};
pub use state::{init_state, sigmoid, softplus, softplus_inv, VariationalState};
pub use train::{sample_loss, train, train_with, RunResult, TrainConfig};
