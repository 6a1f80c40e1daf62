//! A fast self-check suite over the invariants the other modules rely on.
//!
//! Each check is small enough to run in well under a second so the whole
//! suite fits in an interactive `verify` command. Monte Carlo checks use
//! fixed seeds and generous multiples of their standard errors.

use std::fmt;

use rand::Rng;

use crate::bridge::{estimate_moments, precond, sample_xt, zhat, MomentStats};
use crate::data::{decode_volume, encode_volume, phantom_pair, split_indices, zero_pad, crop_center, Volume, DEFAULT_SPLIT_RATIOS};
use crate::denoiser::{analytic_posterior, batch_loss, draw_batch, GaussianPosterior, GaussianTaskParams, PreconditionedNet, TinyNet, TrainingBatch};
use crate::metrics::{fractional_anisotropy, mmd, ms_ssim_volume, psnr_from_mse, MmdConfig, MsSsimConfig};
use crate::rng::{seeded, standard_normal};
use crate::sampler::{euler_step, posterior_step, sample, SamplerConfig};
use crate::schedule::{validate_boundaries, BridgeSchedule, Coefficients, Interpolant};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}  {:<30} {}", self.name, self.detail)
    }
}

/// Test hooks for negative controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Runs the boundary check against a schedule whose `gamma(1)` is not 0.
    pub break_gamma_endpoint: bool,
}

struct BrokenEndpoint(BridgeSchedule);

impl Interpolant for BrokenEndpoint {
    fn coefficients(&self, t: f64) -> Result<Coefficients> {
        let mut c = self.0.coefficients(t)?;
        if t == 1.0 {
            c.gamma_sq = 0.01;
        }
        Ok(c)
    }
}

/// Central finite-difference check of [`batch_loss`] gradients at
/// `probes` randomly chosen parameters; returns the largest relative error.
pub fn fd_gradient_check(net: &TinyNet, batch: &TrainingBatch, probes: usize, seed: u64) -> f64 {
    let (_, grads) = batch_loss(net, batch);
    let analytic = grads.flatten();
    let params = net.params();
    let mut rng = seeded(seed);
    let mut probe_net = net.clone();
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let i = rng.random_range(0..params.len());
        let h = 1e-5 * params[i].abs().max(1.0);
        let mut p = params.clone();
        p[i] = params[i] + h;
        probe_net.set_params(&p).expect("same layout");
        let up = batch_loss(&probe_net, batch).0;
        p[i] = params[i] - h;
        probe_net.set_params(&p).expect("same layout");
        let down = batch_loss(&probe_net, batch).0;
        let fd = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(fd.abs()).max(1e-7);
        worst = worst.max((analytic[i] - fd).abs() / scale);
    }
    worst
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// The Gaussian task used by the sampling checks.
pub fn oracle_task() -> GaussianTaskParams {
    GaussianTaskParams::scalar(0.5, 0.5, 0.2, 0.2, 0.18).expect("valid covariance")
}

pub fn run_suite(opts: VerifyOptions) -> Vec<CheckResult> {
    let sched = BridgeSchedule::default();
    vec![
        check("schedule_boundaries", || {
            let r = if opts.break_gamma_endpoint {
                validate_boundaries(&BrokenEndpoint(sched), 1001)?
            } else {
                validate_boundaries(&sched, 1001)?
            };
            Ok((r.passed(1e-12), format!("max violation {:.3e}", r.max_boundary_violation)))
        }),
        check("epsilon_constant", || {
            let target = 2.0 * sched.gamma_max().powi(2);
            let mut worst = 0.0f64;
            for i in 0..=1000 {
                worst = worst.max((sched.epsilon(i as f64 / 1000.0, 1.0)? - target).abs());
            }
            Ok((worst <= 1e-12, format!("max |eps - {target}| = {worst:.3e}")))
        }),
        check("gamma_derivative", || {
            let h = 1e-6;
            let mut worst = 0.0f64;
            for i in 1..20 {
                let t = i as f64 / 20.0;
                let fd = (sched.coefficients(t + h)?.gamma() - sched.coefficients(t - h)?.gamma()) / (2.0 * h);
                worst = worst.max((fd - sched.derivatives(t)?.gamma_dot).abs());
            }
            Ok((worst < 1e-6, format!("max FD gap {worst:.3e}")))
        }),
        check("kernel_moments", || {
            let mut rng = seeded(11);
            let n = 20_000;
            let mut worst = 0.0f64;
            for &(x0, x1, t) in &[(0.2, 0.9, 0.3), (-1.0, 0.5, 0.5), (0.7, 0.1, 0.8)] {
                let c = sched.coefficients(t)?;
                let draws: Vec<f64> = (0..n)
                    .map(|_| sample_xt(&[x0], &[x1], t, &sched, &mut rng).map(|v| v[0]))
                    .collect::<Result<_>>()?;
                let (m, v) = mean_var(&draws);
                let se_m = (c.gamma_sq / n as f64).sqrt();
                let se_v = c.gamma_sq * (2.0 / (n as f64 - 1.0)).sqrt();
                worst = worst.max(((m - c.alpha * x0 - c.beta * x1) / se_m).abs());
                worst = worst.max(((v - c.gamma_sq) / se_v).abs());
            }
            Ok((worst < 4.0, format!("max deviation {worst:.2} SE")))
        }),
        check("zhat_inversion", || {
            let mut rng = seeded(12);
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let t = rng.random_range(0.01..0.99);
                let (x0, x1, z) = (rng.random::<f64>(), rng.random::<f64>(), standard_normal(&mut rng));
                let c = sched.coefficients(t)?;
                let xt = c.alpha * x0 + c.beta * x1 + c.gamma() * z;
                worst = worst.max((zhat(&[xt], &[x0], &[x1], t, &sched)?[0] - z).abs());
            }
            Ok((worst < 1e-9, format!("max error {worst:.3e}")))
        }),
        check("precond_loss_weight", || {
            let m = MomentStats::new(0.05, 0.04, 0.03)?;
            let mut worst = 0.0f64;
            for i in 1..=100 {
                let p = precond(i as f64 / 100.0, &sched, &m)?;
                worst = worst.max((p.loss_weight * p.c_out * p.c_out - 1.0).abs());
            }
            Ok((worst <= 1e-12, format!("max |lambda c_out^2 - 1| = {worst:.3e}")))
        }),
        check("precond_unit_variance", || {
            let task = oracle_task();
            let mut rng = seeded(13);
            let pairs: Vec<_> = (0..20_000).map(|_| task.draw_pair(&mut rng)).collect();
            let m = estimate_moments(&pairs)?;
            let mut worst = 0.0f64;
            for &t in &[0.1, 0.5, 0.9] {
                let p = precond(t, &sched, &m)?;
                let scaled: Vec<f64> = pairs
                    .iter()
                    .map(|(x0, x1)| sample_xt(x0, x1, t, &sched, &mut rng).map(|v| p.c_in * v[0]))
                    .collect::<Result<_>>()?;
                // centred second moment; preconditioning assumes centred data
                let mean_sq = {
                    let mu0 = task.mu0[0];
                    let mu1 = task.mu1[0];
                    let c = sched.coefficients(t)?;
                    let centre = p.c_in * (c.alpha * mu0 + c.beta * mu1);
                    scaled.iter().map(|v| (v - centre).powi(2)).sum::<f64>() / scaled.len() as f64
                };
                worst = worst.max((mean_sq - 1.0).abs());
            }
            Ok((worst < 0.04, format!("max |Var(c_in x_t) - 1| = {worst:.4}")))
        }),
        check("tinynet_gradients", || {
            let mut rng = seeded(14);
            let net = TinyNet::for_chunk(1, 16, &mut rng)?;
            let model = PreconditionedNet::new(net, sched, oracle_task().moments()?)?;
            let task = oracle_task();
            let data: Vec<_> = (0..16).map(|_| task.draw_pair(&mut rng)).collect();
            let items: Vec<(&[f64], &[f64])> = data.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
            let ts: Vec<f64> = (0..items.len()).map(|_| rng.random_range(0.05..0.95)).collect();
            let batch = draw_batch(&model, &items, &ts, None, &mut rng)?;
            let worst = fd_gradient_check(&model.net, &batch, 20, 15);
            Ok((worst < 1e-4, format!("max relative error {worst:.3e}")))
        }),
        check("posterior_boundaries", || {
            let task = oracle_task();
            let at0 = analytic_posterior(&task, 0.0, &[0.37], &[0.8], &sched)?[0];
            let at1 = analytic_posterior(&task, 1.0, &[0.8], &[0.8], &sched)?[0];
            let (m1, _) = task.conditional_on_source(0, 0.8);
            let gap = (at0 - 0.37).abs().max((at1 - m1).abs());
            Ok((gap < 1e-12, format!("max boundary gap {gap:.3e}")))
        }),
        check("sampler_ode_determinism", || {
            let model = GaussianPosterior::new(oracle_task(), sched)?;
            let cfg = SamplerConfig::default();
            let a = sample(&model, &[0.7], &cfg, &sched, &mut seeded(1))?;
            let b = sample(&model, &[0.7], &cfg, &sched, &mut seeded(2))?;
            Ok((a[0].to_bits() == b[0].to_bits(), format!("x0 = {}", a[0])))
        }),
        check("sampler_gaussian_moments", || {
            let task = oracle_task();
            let model = GaussianPosterior::new(task.clone(), sched)?;
            let cfg = SamplerConfig {
                eta: 1.0,
                ..Default::default()
            };
            let mut rng = seeded(16);
            let n = 20_000;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let x1 = task.draw_source(&mut rng);
                out.push(sample(&model, &x1, &cfg, &sched, &mut rng)?[0]);
            }
            let (m, v) = mean_var(&out);
            let (em, ev) = (task.mu0[0], task.var0[0]);
            let worst = ((m - em) / em).abs().max(((v - ev) / ev).abs());
            Ok((worst < 0.05, format!("mean {m:.4} (exact {em}), var {v:.4} (exact {ev})")))
        }),
        check("euler_vs_posterior_step", || {
            let task = oracle_task();
            let (t, dt, x1) = (0.5, 0.025, [0.6]);
            let c = sched.coefficients(t)?;
            let xt = [c.alpha * 0.45 + c.beta * x1[0] + c.gamma() * 0.3];
            let x0_hat = analytic_posterior(&task, t, &xt, &x1, &sched)?;
            let z = zhat(&xt, &x0_hat, &x1, t, &sched)?;
            let mut rng = seeded(0);
            let euler = euler_step(&xt, &x0_hat, &x1, t, dt, &sched, 0.0, &mut rng)?[0];
            let post = posterior_step(&x0_hat, &x1, &z, t - dt, dt, &sched, 0.0, &mut rng)?[0];
            let gap = (euler - post).abs();
            Ok((gap < 0.05, format!("|euler - posterior| = {gap:.3e}")))
        }),
        check("metric_golden_values", || {
            let fa = [
                fractional_anisotropy(1.0, 1.0, 1.0)?,
                fractional_anisotropy(1.0, 0.0, 0.0)? - 1.0,
                fractional_anisotropy(2.0, 1.0, 1.0)? - 1.0 / 6f64.sqrt(),
            ];
            let worst = fa.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let p = psnr_from_mse(0.01);
            Ok((worst < 1e-9 && p == 20.0, format!("FA error {worst:.2e}, PSNR(0.01) = {p}")))
        }),
        check("ms_ssim_self_similarity", || {
            let (t1, _) = phantom_pair(0, [32, 32, 32])?;
            let s = ms_ssim_volume(&t1, &t1, &MsSsimConfig::default().with_window(7))?;
            Ok(((s - 1.0).abs() < 1e-6, format!("MS-SSIM(x, x) = {s}")))
        }),
        check("mmd_identity", || {
            let mut rng = seeded(17);
            let x: Vec<Vec<f64>> = (0..30).map(|_| vec![standard_normal(&mut rng)]).collect();
            let v = mmd(&x, &x, &MmdConfig::default())?;
            Ok((v.abs() < 1e-12, format!("MMD(X, X) = {v:.3e}")))
        }),
        check("bvol_round_trip", || {
            let mut rng = seeded(18);
            let vals: Vec<f32> = (0..60).map(|_| f32::from_bits(rng.random())).collect();
            let v = Volume::new([3, 4, 5], vals)?;
            let back = decode_volume(&encode_volume(&v)).map_err(|source| crate::Error::Format {
                path: "<memory>".into(),
                source,
            })?;
            let same = v.voxels().iter().zip(back.voxels()).all(|(a, b)| a.to_bits() == b.to_bits());
            let padded = zero_pad(&v, [8, 8, 8])?;
            let cropped = crop_center(&padded, [3, 4, 5])?;
            let crop_same = v.voxels().iter().zip(cropped.voxels()).all(|(a, b)| a.to_bits() == b.to_bits());
            Ok((same && crop_same, "write/read and pad/crop bitwise".to_string()))
        }),
        check("split_partition", || {
            let mut ok = true;
            for seed in 0..20 {
                let parts = split_indices(20, DEFAULT_SPLIT_RATIOS, seed)?;
                let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
                all.sort_unstable();
                ok &= all == (0..20).collect::<Vec<_>>() && parts.clone().map(|p| p.len()) == [14, 3, 3];
            }
            Ok((ok, "20 seeds, sizes (14, 3, 3)".to_string()))
        }),
    ]
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}
