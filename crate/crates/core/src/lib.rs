//! Standard and prediction-oriented variational inference for misspecified
//! physics-based models.
//!
//! The crate is organized bottom-up:
//!
//! - [`gaussian`], [`special`], [`transform`]: exact Gaussian machinery,
//!   normal CDF/quantile and the scalar bijections used by priors.
//! - [`kde`]: 1-D Gaussian KDE with Scott bandwidths and the component-wise
//!   product approximation used by the likelihood-free loss.
//! - [`variational`]: the reparameterized Gaussian family, the three losses
//!   (`vi_elbo`, `pvi_explicit`, `pvi_kde`), Adam and the training loop.
//! - [`polynomial`]: the linear-Gaussian testbed with closed-form oracles.
//! - [`transport`]: Fourier-spectral advection-diffusion models, including
//!   the fractional-dispersion (FRADE) model-form representation.
//! - [`harness`]: configs, end-to-end experiments and CSV/JSON artifacts.
//!
//! Runnable walkthroughs live in `examples/`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian;
pub mod harness;
pub mod kde;
pub mod model;
pub mod polynomial;
pub mod rng;
pub mod special;
pub mod transform;
pub mod transport;
pub mod variational;

pub use error::{Error, Result};
pub use gaussian::GaussianDensity;
pub use model::{ForwardModel, ObservationSet};
pub use transform::{ScalarTransform, TransformedPrior};
pub use variational::{LossKind, RunResult, TrainConfig, VariationalState};
