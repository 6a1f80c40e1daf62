//! Bridge coefficients.
//!
//! A bridge schedule fixes the transition kernel
//! `x_t ~ N(alpha_t x_0 + beta_t x_1, gamma_t^2 I)` connecting the target
//! distribution at `t = 0` to the source distribution at `t = 1`. The only
//! form implemented is the linear one,
//!
//! ```text
//! alpha_t = 1 - t,   beta_t = t,   gamma_t^2 = 4 gamma_max^2 t (1 - t)
//! ```
//!
//! whose noise peaks at `t = 0.5` with variance `gamma_max^2`. Values of
//! `gamma_max` between 0.125 and 0.25 work well for image translation; the
//! default is 0.125.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_GAMMA_MAX: f64 = 0.125;

/// Parameterization of the coefficient triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleForm {
    #[default]
    Linear,
}

impl fmt::Display for ScheduleForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleForm::Linear => f.write_str("linear"),
        }
    }
}

impl FromStr for ScheduleForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleForm::Linear),
            other => Err(Error::InvalidConfig(format!("unknown schedule form {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_sq: f64,
}

impl Coefficients {
    pub fn gamma(&self) -> f64 {
        self.gamma_sq.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub gamma_dot: f64,
}

/// Anything that yields a coefficient triple over `[0, 1]`.
///
/// Only used to run [`validate_boundaries`] against schedules other than
/// [`BridgeSchedule`], e.g. deliberately broken ones.
pub trait Interpolant {
    fn coefficients(&self, t: f64) -> Result<Coefficients>;
}

/// The bridge schedule. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeSchedule {
    gamma_max: f64,
    form: ScheduleForm,
}

impl Default for BridgeSchedule {
    fn default() -> Self {
        Self {
            gamma_max: DEFAULT_GAMMA_MAX,
            form: ScheduleForm::Linear,
        }
    }
}

fn check_unit(what: &'static str, t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: t,
            domain: "[0, 1]",
        })
    }
}

impl BridgeSchedule {
    pub fn new(gamma_max: f64, form: ScheduleForm) -> Result<Self> {
        if !(gamma_max.is_finite() && gamma_max > 0.0) {
            return Err(Error::Domain {
                what: "gamma_max",
                value: gamma_max,
                domain: "(0, inf)",
            });
        }
        Ok(Self { gamma_max, form })
    }

    pub fn linear(gamma_max: f64) -> Result<Self> {
        Self::new(gamma_max, ScheduleForm::Linear)
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn form(&self) -> ScheduleForm {
        self.form
    }

    pub fn coefficients(&self, t: f64) -> Result<Coefficients> {
        check_unit("t", t)?;
        let ScheduleForm::Linear = self.form;
        Ok(Coefficients {
            alpha: 1.0 - t,
            beta: t,
            gamma_sq: 4.0 * self.gamma_max * self.gamma_max * t * (1.0 - t),
        })
    }

    /// `(d alpha/dt, d beta/dt)`, which stay finite on the closed interval.
    pub fn mean_rates(&self, t: f64) -> Result<(f64, f64)> {
        check_unit("t", t)?;
        let ScheduleForm::Linear = self.form;
        Ok((-1.0, 1.0))
    }

    /// Time derivatives of the coefficients on the open interval.
    ///
    /// `gamma_dot = gamma_max (1 - 2t) / sqrt(t (1 - t))` diverges at both
    /// endpoints.
    pub fn derivatives(&self, t: f64) -> Result<Derivatives> {
        check_unit("t", t)?;
        if t == 0.0 || t == 1.0 {
            return Err(Error::Singularity { what: "gamma_dot", t });
        }
        let (alpha_dot, beta_dot) = self.mean_rates(t)?;
        Ok(Derivatives {
            alpha_dot,
            beta_dot,
            gamma_dot: self.gamma_max * (1.0 - 2.0 * t) / (t * (1.0 - t)).sqrt(),
        })
    }

    /// Inference noise level `eta (gamma gamma_dot - alpha_dot / alpha gamma^2)`.
    ///
    /// Evaluated through its simplified closed form. For the linear schedule
    /// `gamma gamma_dot = 2 gamma_max^2 (1 - 2t)` and
    /// `-alpha_dot / alpha gamma^2 = 4 gamma_max^2 t`, so the sum is the
    /// constant `2 gamma_max^2`, which also gives the continuous extension to
    /// `t = 0` and `t = 1` where the literal expression is `0/0`.
    pub fn epsilon(&self, t: f64, eta: f64) -> Result<f64> {
        check_unit("t", t)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain {
                what: "eta",
                value: eta,
                domain: "[0, 1]",
            });
        }
        let ScheduleForm::Linear = self.form;
        Ok(eta * 2.0 * self.gamma_max * self.gamma_max)
    }
}

impl Interpolant for BridgeSchedule {
    fn coefficients(&self, t: f64) -> Result<Coefficients> {
        BridgeSchedule::coefficients(self, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub grid_points: usize,
    /// Largest absolute deviation from the six endpoint identities.
    pub max_boundary_violation: f64,
    /// Smallest `alpha^2 + beta^2 + gamma^2` seen on the grid.
    pub min_total_magnitude: f64,
    /// Smallest `gamma^2` seen on the grid.
    pub min_gamma_sq: f64,
}

impl BoundaryReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_boundary_violation <= tol && self.min_total_magnitude > 0.0 && self.min_gamma_sq >= 0.0
    }
}

/// Checks `alpha_0 = beta_1 = 1`, `alpha_1 = beta_0 = gamma_0 = gamma_1 = 0`
/// and positivity of `alpha^2 + beta^2 + gamma^2` on a uniform grid.
pub fn validate_boundaries<S: Interpolant + ?Sized>(sched: &S, grid_points: usize) -> Result<BoundaryReport> {
    if grid_points < 2 {
        return Err(Error::InsufficientData(format!(
            "boundary validation needs at least 2 grid points, got {grid_points}"
        )));
    }
    let start = sched.coefficients(0.0)?;
    let end = sched.coefficients(1.0)?;
    let max_boundary_violation = [
        (start.alpha - 1.0).abs(),
        start.beta.abs(),
        start.gamma_sq.abs(),
        end.alpha.abs(),
        (end.beta - 1.0).abs(),
        end.gamma_sq.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let mut min_total_magnitude = f64::INFINITY;
    let mut min_gamma_sq = f64::INFINITY;
    let last = (grid_points - 1) as f64;
    for i in 0..grid_points {
        let c = sched.coefficients(i as f64 / last)?;
        min_total_magnitude = min_total_magnitude.min(c.alpha * c.alpha + c.beta * c.beta + c.gamma_sq);
        min_gamma_sq = min_gamma_sq.min(c.gamma_sq);
    }
    Ok(BoundaryReport {
        grid_points,
        max_boundary_violation,
        min_total_magnitude,
        min_gamma_sq,
    })
}
