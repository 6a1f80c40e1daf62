//! Forward bridge machinery: kernel draws, noise recovery, dataset moments
//! and the preconditioning coefficients used around the raw network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::standard_normal;
use crate::schedule::{BridgeSchedule, Coefficients};
use crate::{Error, Result};

/// Pooled second moments of the paired training data.
///
/// `sigma1_sq` is the variance of the source (conditioning) images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub sigma01: f64,
}

impl MomentStats {
    pub fn new(sigma0_sq: f64, sigma1_sq: f64, sigma01: f64) -> Result<Self> {
        let m = Self {
            sigma0_sq,
            sigma1_sq,
            sigma01,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0_sq >= 0.0 && self.sigma1_sq >= 0.0 && self.sigma01.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid moments {self:?}")));
        }
        let bound = (self.sigma0_sq * self.sigma1_sq).sqrt();
        // rounding slack for moments estimated from perfectly correlated data
        if self.sigma01.abs() > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidConfig(format!(
                "covariance {} violates Cauchy-Schwarz bound {bound}",
                self.sigma01
            )));
        }
        Ok(())
    }
}

/// Preconditioning coefficients at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondCoeffs {
    pub c_in: f64,
    pub c_skip: f64,
    pub c_out: f64,
    pub loss_weight: f64,
    pub c_noise: f64,
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    Ok(())
}

/// Noise-free part of the kernel, `alpha x0 + beta x1`.
pub fn kernel_mean(c: &Coefficients, x0: &[f64], x1: &[f64]) -> Vec<f64> {
    x0.iter().zip(x1).map(|(a, b)| c.alpha * a + c.beta * b).collect()
}

/// Draws `x_t = alpha_t x0 + beta_t x1 + gamma_t z` with independent
/// standard normal coordinates `z`.
pub fn sample_xt<R: Rng + ?Sized>(
    x0: &[f64],
    x1: &[f64],
    t: f64,
    sched: &BridgeSchedule,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_same_len(x0, x1)?;
    let c = sched.coefficients(t)?;
    let gamma = c.gamma();
    Ok(x0
        .iter()
        .zip(x1)
        .map(|(a, b)| {
            let mean = c.alpha * a + c.beta * b;
            if gamma == 0.0 {
                mean
            } else {
                mean + gamma * standard_normal(rng)
            }
        })
        .collect())
}

/// Forward map with caller-supplied noise; `sample_xt` with `z = noise`.
pub fn forward_with_noise(x0: &[f64], x1: &[f64], noise: &[f64], t: f64, sched: &BridgeSchedule) -> Result<Vec<f64>> {
    check_same_len(x0, x1)?;
    check_same_len(x0, noise)?;
    let c = sched.coefficients(t)?;
    let gamma = c.gamma();
    Ok(x0
        .iter()
        .zip(x1)
        .zip(noise)
        .map(|((a, b), z)| c.alpha * a + c.beta * b + gamma * z)
        .collect())
}

/// Recovers the normalised residual `(x_t - alpha x0_hat - beta x1) / gamma`.
pub fn zhat(xt: &[f64], x0_hat: &[f64], x1: &[f64], t: f64, sched: &BridgeSchedule) -> Result<Vec<f64>> {
    check_same_len(xt, x0_hat)?;
    check_same_len(xt, x1)?;
    let c = sched.coefficients(t)?;
    if c.gamma_sq <= 0.0 {
        return Err(Error::Singularity { what: "zhat", t });
    }
    Ok(zhat_unchecked(&c, xt, x0_hat, x1))
}

pub(crate) fn zhat_unchecked(c: &Coefficients, xt: &[f64], x0_hat: &[f64], x1: &[f64]) -> Vec<f64> {
    let gamma = c.gamma();
    xt.iter()
        .zip(x0_hat)
        .zip(x1)
        .map(|((x, a), b)| (x - c.alpha * a - c.beta * b) / gamma)
        .collect()
}

/// Global scalar moments pooled over every coordinate of every pair, with
/// unbiased `n - 1` normalisation.
pub fn estimate_moments<A, B>(pairs: &[(A, B)]) -> Result<MomentStats>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "moment estimation needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let mut n = 0usize;
    let (mut s0, mut s1) = (0.0, 0.0);
    for (a, b) in pairs {
        let (a, b) = (a.as_ref(), b.as_ref());
        check_same_len(a, b)?;
        n += a.len();
        s0 += a.iter().sum::<f64>();
        s1 += b.iter().sum::<f64>();
    }
    if n < 2 {
        return Err(Error::InsufficientData("fewer than 2 coordinates in total".into()));
    }
    let (m0, m1) = (s0 / n as f64, s1 / n as f64);
    let (mut v0, mut v1, mut c01) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        for (x, y) in a.as_ref().iter().zip(b.as_ref()) {
            let (dx, dy) = (x - m0, y - m1);
            v0 += dx * dx;
            v1 += dy * dy;
            c01 += dx * dy;
        }
    }
    let denom = (n - 1) as f64;
    Ok(MomentStats {
        sigma0_sq: v0 / denom,
        sigma1_sq: v1 / denom,
        sigma01: c01 / denom,
    })
}

/// Preconditioning coefficients at `t` in `(0, 1]`:
///
/// ```text
/// c_in   = 1 / sqrt(a^2 s0 + b^2 s1 + 2 a b s01 + g^2)
/// c_skip = (a s0 + b s01) c_in^2
/// c_out  = sqrt(b^2 s0 s1 - b^2 s01^2 + g^2 s0) c_in
/// lambda = 1 / c_out^2,   c_noise = log(t) / 4
/// ```
pub fn precond(t: f64, sched: &BridgeSchedule, moments: &MomentStats) -> Result<PrecondCoeffs> {
    // t = 0 is excluded by log(t) and c_out = 0; t = 1 is where sampling
    // starts
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain {
            what: "t",
            value: t,
            domain: "(0, 1]",
        });
    }
    let c = sched.coefficients(t)?;
    let MomentStats {
        sigma0_sq: s0,
        sigma1_sq: s1,
        sigma01: s01,
    } = *moments;
    let (a, b, g2) = (c.alpha, c.beta, c.gamma_sq);
    let var_xt = a * a * s0 + b * b * s1 + 2.0 * a * b * s01 + g2;
    let c_in = 1.0 / var_xt.sqrt();
    let c_skip = (a * s0 + b * s01) * c_in * c_in;
    let radicand = b * b * s0 * s1 - b * b * s01 * s01 + g2 * s0;
    // Cauchy-Schwarz makes the radicand non-negative; clip rounding noise.
    let c_out = radicand.max(0.0).sqrt() * c_in;
    if !(c_out > 0.0 && c_out.is_finite()) {
        return Err(Error::Degenerate(format!("c_out = {c_out} at t = {t}")));
    }
    Ok(PrecondCoeffs {
        c_in,
        c_skip,
        c_out,
        loss_weight: 1.0 / (c_out * c_out),
        c_noise: 0.25 * t.ln(),
    })
}
