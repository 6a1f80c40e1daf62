//! Reverse-time bridge sampling from a source image `x1` at `t = 1` to a
//! target estimate at `t = 0`.
//!
//! Interior steps use the Euler scheme
//!
//! ```text
//! x_{t-dt} = x_t - b(t, x_t, x1) dt + sqrt(2 eps_t dt) z,
//! b = alpha_dot x0_hat + beta_dot x1 + (gamma_dot + eps_t / gamma_t) z_hat
//! ```
//!
//! and the last step jumps straight to the grid end with the
//! posterior-resample form `alpha x0_hat + beta x1 + gamma z_hat`, whose
//! coefficients at `t = 0` are `(1, 0, 0)`. `eta = 0` gives a deterministic
//! ODE trajectory; `eta = 1` the stochastic sampler.
//!
//! On the first step from `t = 1` the state is exactly `x1` and
//! `gamma_1 = 0`, so `z_hat` is the `0/0` ratio; it is taken as its limit,
//! zero, and the `z_hat` terms of the drift vanish with it.

use rand::Rng;

use crate::bridge::zhat_unchecked;
use crate::denoiser::Denoiser;
use crate::rng::{fill_standard_normal, seeded};
use crate::schedule::{BridgeSchedule, Coefficients};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub steps: usize,
    pub eta: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 40,
            eta: 0.0,
            t_start: 1.0,
            t_end: 0.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("sampler needs at least one step".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Domain {
                what: "eta",
                value: self.eta,
                domain: "[0, 1]",
            });
        }
        if !(0.0 <= self.t_end && self.t_end < self.t_start && self.t_start <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= t_end < t_start <= 1, got t_start = {}, t_end = {}",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }
}

/// `steps + 1` uniformly spaced times from `t_start` down to `t_end`.
pub fn time_grid(config: &SamplerConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = config.steps;
    let span = config.t_start - config.t_end;
    let mut grid: Vec<f64> = (0..=n)
        .map(|k| config.t_start - span * (k as f64 / n as f64))
        .collect();
    grid[n] = config.t_end;
    Ok(grid)
}

fn check_lengths(a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::shape((a.len(), b.len()), c.len()));
    }
    Ok(())
}

/// Shared Euler update; `zhat = None` is the pinned start where the
/// `z_hat` terms vanish.
#[allow(clippy::too_many_arguments)]
fn euler_update<R: Rng + ?Sized>(
    xt: &[f64],
    x0_hat: &[f64],
    x1: &[f64],
    zhat: Option<&[f64]>,
    t: f64,
    dt: f64,
    sched: &BridgeSchedule,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let c = sched.coefficients(t)?;
    let (alpha_dot, beta_dot) = sched.mean_rates(t)?;
    let noise_scale = (2.0 * eps * dt).sqrt();
    let mut noise = vec![0.0; xt.len()];
    if noise_scale > 0.0 {
        fill_standard_normal(rng, &mut noise);
    }
    let out = match zhat {
        Some(z) => {
            let z_coef = sched.derivatives(t)?.gamma_dot + eps / c.gamma();
            xt.iter()
                .zip(x0_hat)
                .zip(x1)
                .zip(z)
                .zip(&noise)
                .map(|((((x, a), b), z), n)| {
                    let drift = alpha_dot * a + beta_dot * b + z_coef * z;
                    x - drift * dt + noise_scale * n
                })
                .collect()
        }
        None => xt
            .iter()
            .zip(x0_hat)
            .zip(x1)
            .zip(&noise)
            .map(|(((x, a), b), n)| x - (alpha_dot * a + beta_dot * b) * dt + noise_scale * n)
            .collect(),
    };
    Ok(out)
}

/// One Euler step from `t` to `t - dt`.
#[allow(clippy::too_many_arguments)]
pub fn euler_step<R: Rng + ?Sized>(
    xt: &[f64],
    x0_hat: &[f64],
    x1: &[f64],
    t: f64,
    dt: f64,
    sched: &BridgeSchedule,
    eta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_lengths(xt, x0_hat, x1)?;
    if !(dt >= 0.0 && t - dt >= 0.0) {
        return Err(Error::Domain {
            what: "dt",
            value: dt,
            domain: "[0, t]",
        });
    }
    let c = sched.coefficients(t)?;
    if c.gamma_sq <= 0.0 {
        return Err(Error::Singularity { what: "euler_step", t });
    }
    let eps = sched.epsilon(t, eta)?;
    let z = zhat_unchecked(&c, xt, x0_hat, x1);
    euler_update(xt, x0_hat, x1, Some(&z), t, dt, sched, eps, rng)
}

fn posterior_update<R: Rng + ?Sized>(
    x0_hat: &[f64],
    x1: &[f64],
    zhat: &[f64],
    next: &Coefficients,
    fresh_var: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let radicand = next.gamma_sq - fresh_var;
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand {
            what: "posterior step",
            value: radicand,
        });
    }
    let (keep, fresh) = (radicand.sqrt(), fresh_var.sqrt());
    let mut noise = vec![0.0; x0_hat.len()];
    if fresh > 0.0 {
        fill_standard_normal(rng, &mut noise);
    }
    Ok(x0_hat
        .iter()
        .zip(x1)
        .zip(zhat)
        .zip(&noise)
        .map(|(((a, b), z), n)| next.alpha * a + next.beta * b + keep * z + fresh * n)
        .collect())
}

/// Posterior-resample step to `t_next = t - dt`:
/// `alpha' x0_hat + beta' x1 + sqrt(gamma'^2 - 2 eps_t dt) z_hat + sqrt(2 eps_t dt) z`.
#[allow(clippy::too_many_arguments)]
pub fn posterior_step<R: Rng + ?Sized>(
    x0_hat: &[f64],
    x1: &[f64],
    zhat: &[f64],
    t_next: f64,
    dt: f64,
    sched: &BridgeSchedule,
    eta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_lengths(x0_hat, x1, zhat)?;
    if dt < 0.0 {
        return Err(Error::Domain {
            what: "dt",
            value: dt,
            domain: "[0, 1]",
        });
    }
    let next = sched.coefficients(t_next)?;
    let eps = sched.epsilon((t_next + dt).min(1.0), eta)?;
    posterior_update(x0_hat, x1, zhat, &next, 2.0 * eps * dt, rng)
}

/// Runs the full sampler from `x1` and returns the final state.
pub fn sample<D, R>(model: &D, x1: &[f64], config: &SamplerConfig, sched: &BridgeSchedule, rng: &mut R) -> Result<Vec<f64>>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    sample_trajectory(model, x1, config, sched, rng, |_, _| {})
}

/// [`sample`] with a generator seeded from `config.seed`.
pub fn sample_seeded<D: Denoiser + ?Sized>(model: &D, x1: &[f64], config: &SamplerConfig, sched: &BridgeSchedule) -> Result<Vec<f64>> {
    sample(model, x1, config, sched, &mut seeded(config.seed))
}

/// [`sample`], reporting each state `x_{i-1}` together with `i - 1`.
pub fn sample_trajectory<D, R, F>(
    model: &D,
    x1: &[f64],
    config: &SamplerConfig,
    sched: &BridgeSchedule,
    rng: &mut R,
    mut observe: F,
) -> Result<Vec<f64>>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &[f64]),
{
    if x1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: config.steps });
    }
    let grid = time_grid(config)?;
    let n = config.steps;
    let mut x = x1.to_vec();
    for k in 0..n {
        let i = n - k;
        let (t, t_next) = (grid[k], grid[k + 1]);
        let dt = t - t_next;
        let x0_hat = model.predict(t, &x, x1)?;
        if x0_hat.len() != x.len() {
            return Err(Error::shape(x0_hat.len(), x.len()));
        }
        let c = sched.coefficients(t)?;
        let pinned = c.gamma_sq == 0.0;
        let z = if pinned {
            vec![0.0; x.len()]
        } else {
            zhat_unchecked(&c, &x, &x0_hat, x1)
        };
        x = if i >= 2 {
            let eps = sched.epsilon(t, config.eta)?;
            euler_update(&x, &x0_hat, x1, (!pinned).then_some(z.as_slice()), t, dt, sched, eps, rng)?
        } else {
            let next = sched.coefficients(t_next)?;
            posterior_update(&x0_hat, x1, &z, &next, 0.0, rng)?
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i });
        }
        observe(i - 1, &x);
    }
    Ok(x)
}
