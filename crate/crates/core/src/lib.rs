//! Diffusion bridge models for paired volumetric image translation.
//!
//! The crate is organised bottom-up:
//!
//! * [`schedule`]: the bridge coefficients `alpha_t`, `beta_t`, `gamma_t`,
//!   their time derivatives and the inference noise level `epsilon_t`.
//! * [`bridge`]: the Gaussian transition kernel, noise recovery, dataset
//!   moments and the preconditioning coefficients.
//! * [`denoiser`]: the [`Denoiser`] abstraction, the closed-form Gaussian
//!   posterior, a small trainable network and its training loop.
//! * [`sampler`]: reverse-time integration from a source image to a target
//!   image with Euler and posterior-resample steps.
//! * [`metrics`]: MS-SSIM, PSNR, MMD, fractional anisotropy and the
//!   slice/subject report generators.
//! * [`data`]: volumes, the BVOL file format, preprocessing, dataset
//!   splitting and the paired phantom generator.
//! * [`verify`]: a self-check suite over the invariants above.

pub mod bridge;
pub mod data;
pub mod denoiser;
mod error;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod verify;

pub use bridge::{MomentStats, PrecondCoeffs};
pub use data::{Modality, PairedDataset, Split, Volume, VolumeMeta};
pub use denoiser::{Denoiser, GaussianPosterior, GaussianTaskParams, PreconditionedNet, TinyNet, TrainConfig};
pub use error::{Error, FormatError, Result};
pub use metrics::{MmdConfig, MsSsimConfig};
pub use sampler::SamplerConfig;
pub use schedule::{BridgeSchedule, Coefficients, Derivatives, ScheduleForm};
