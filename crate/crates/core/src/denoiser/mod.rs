//! Denoisers `x0_hat(t, x_t, x_1)`, the closed-form Gaussian posterior and
//! the trainable preconditioned network.

mod gaussian;
mod model_file;
mod net;
mod precond;
mod train;

pub use gaussian::{analytic_posterior, GaussianPosterior, GaussianTaskParams};
pub use model_file::{load_model, save_model, ModelFile, MODEL_FORMAT_VERSION};
pub use net::{Dense, Gradients, TinyNet};
pub use precond::PreconditionedNet;
pub use train::{batch_loss, draw_batch, loss, train, train_with_progress, TrainConfig, TrainOutcome, TrainingBatch};

use crate::Result;

/// Estimator of the conditional mean `E[x0 | x_t, x1]`.
///
/// Implementations must be deterministic and return a vector of the same
/// length as `xt`.
pub trait Denoiser {
    fn predict(&self, t: f64, xt: &[f64], x1: &[f64]) -> Result<Vec<f64>>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict(&self, t: f64, xt: &[f64], x1: &[f64]) -> Result<Vec<f64>> {
        (**self).predict(t, xt, x1)
    }
}
