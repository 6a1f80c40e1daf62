use rand::Rng;

use crate::bridge::MomentStats;
use crate::rng::standard_normal;
use crate::schedule::BridgeSchedule;
use crate::{Error, Result};

use super::Denoiser;

/// Coordinatewise jointly Gaussian pair `(x0, x1)`; coordinates independent.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTaskParams {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub var0: Vec<f64>,
    pub var1: Vec<f64>,
    pub cov01: Vec<f64>,
}

impl GaussianTaskParams {
    pub fn scalar(mu0: f64, mu1: f64, var0: f64, var1: f64, cov01: f64) -> Result<Self> {
        Self::isotropic(1, mu0, mu1, var0, var1, cov01)
    }

    /// `dim` independent copies of the same scalar task.
    pub fn isotropic(dim: usize, mu0: f64, mu1: f64, var0: f64, var1: f64, cov01: f64) -> Result<Self> {
        let p = Self {
            mu0: vec![mu0; dim],
            mu1: vec![mu1; dim],
            var0: vec![var0; dim],
            var1: vec![var1; dim],
            cov01: vec![cov01; dim],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for len in [self.mu1.len(), self.var0.len(), self.var1.len(), self.cov01.len()] {
            if len != d {
                return Err(Error::shape(d, len));
            }
        }
        for i in 0..d {
            let (v0, v1, c) = (self.var0[i], self.var1[i], self.cov01[i]);
            if !(v0 >= 0.0 && v1 >= 0.0) || c * c > v0 * v1 * (1.0 + 1e-12) {
                return Err(Error::InvalidConfig(format!(
                    "coordinate {i}: var0 = {v0}, var1 = {v1}, cov01 = {c} is not a covariance"
                )));
            }
        }
        Ok(())
    }

    /// Draws one pair `(x0, x1)`.
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut x0 = Vec::with_capacity(d);
        let mut x1 = Vec::with_capacity(d);
        for i in 0..d {
            // x1 = mu1 + sd1 u,  x0 = mu0 + (cov/var1)(x1 - mu1) + sd_{0|1} w
            let u = standard_normal(rng);
            let w = standard_normal(rng);
            let a = self.mu1[i] + self.var1[i].sqrt() * u;
            let (m, s) = self.conditional_on_source(i, a);
            x1.push(a);
            x0.push(m + s.sqrt() * w);
        }
        (x0, x1)
    }

    /// Draws a source image `x1 ~ pi_1`.
    pub fn draw_source<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.mu1[i] + self.var1[i].sqrt() * standard_normal(rng))
            .collect()
    }

    /// Mean and variance of `x0[i] | x1[i] = value`.
    pub fn conditional_on_source(&self, i: usize, value: f64) -> (f64, f64) {
        if self.var1[i] == 0.0 {
            return (self.mu0[i], self.var0[i]);
        }
        let k = self.cov01[i] / self.var1[i];
        let var = (self.var0[i] - k * self.cov01[i]).max(0.0);
        (self.mu0[i] + k * (value - self.mu1[i]), var)
    }

    /// The population moments, pooled across coordinates when the task is
    /// isotropic.
    pub fn moments(&self) -> Result<MomentStats> {
        let d = self.dim() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / d;
        let spread = |m: &[f64], n: &[f64], mm: f64, nm: f64| {
            m.iter().zip(n).map(|(a, b)| (a - mm) * (b - nm)).sum::<f64>() / d
        };
        let (m0, m1) = (mean(&self.mu0), mean(&self.mu1));
        MomentStats::new(
            mean(&self.var0) + spread(&self.mu0, &self.mu0, m0, m0),
            mean(&self.var1) + spread(&self.mu1, &self.mu1, m1, m1),
            mean(&self.cov01) + spread(&self.mu0, &self.mu1, m0, m1),
        )
    }
}

/// Exact `E[x0 | x_t, x1]` for a [`GaussianTaskParams`] task.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub params: GaussianTaskParams,
    pub schedule: BridgeSchedule,
}

impl GaussianPosterior {
    pub fn new(params: GaussianTaskParams, schedule: BridgeSchedule) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, schedule })
    }
}

/// Given `x1`, `x0 ~ N(m, s)` and `x_t = alpha x0 + beta x1 + gamma z`, so
/// `E[x0 | x_t, x1] = m + alpha s / (alpha^2 s + gamma^2) (x_t - alpha m - beta x1)`.
pub fn analytic_posterior(
    params: &GaussianTaskParams,
    t: f64,
    xt: &[f64],
    x1: &[f64],
    sched: &BridgeSchedule,
) -> Result<Vec<f64>> {
    let d = params.dim();
    if xt.len() != d || x1.len() != d {
        return Err(Error::shape((xt.len(), x1.len()), d));
    }
    let c = sched.coefficients(t)?;
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        if params.var1[i] == 0.0 && c.gamma_sq == 0.0 {
            return Err(Error::Degenerate(format!(
                "coordinate {i}: var1 = 0 and gamma_t = 0 at t = {t}"
            )));
        }
        let (m, s) = params.conditional_on_source(i, x1[i]);
        let var_t = c.alpha * c.alpha * s + c.gamma_sq;
        let est = if var_t == 0.0 {
            // x_t carries nothing beyond x1 (t = 1), or x0 is pinned by x1
            if c.alpha == 0.0 {
                m
            } else {
                (xt[i] - c.beta * x1[i]) / c.alpha
            }
        } else {
            m + c.alpha * s / var_t * (xt[i] - c.alpha * m - c.beta * x1[i])
        };
        out.push(est);
    }
    Ok(out)
}

impl Denoiser for GaussianPosterior {
    fn predict(&self, t: f64, xt: &[f64], x1: &[f64]) -> Result<Vec<f64>> {
        analytic_posterior(&self.params, t, xt, x1, &self.schedule)
    }
}
