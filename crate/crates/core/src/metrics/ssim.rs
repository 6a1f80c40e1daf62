//! Multi-scale structural similarity for 2D slices and 3D volumes.
//!
//! At each scale the local statistics come from a separable Gaussian
//! window applied in "valid" mode (no padding). The contrast-structure
//! mean is taken at every scale but the last, where the full SSIM mean
//! (luminance included) is used instead; the terms are clamped at zero and
//! combined as `prod_i term_i ^ w_i`. Scales are separated by 2x average
//! pooling, with odd trailing samples dropped.

use ndarray::{ArrayD, ArrayViewD, Axis, IxDyn, Zip};
use serde::{Deserialize, Serialize};

use crate::data::Volume;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsSsimConfig {
    pub scale_weights: Vec<f64>,
    pub window: usize,
    pub sigma: f64,
    pub data_range: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        Self {
            scale_weights: vec![0.3, 0.5, 0.2],
            window: 11,
            sigma: 1.5,
            data_range: 1.0,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl MsSsimConfig {
    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.scale_weights;
        if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidConfig(format!("MS-SSIM weights must be positive, got {w:?}")));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!("MS-SSIM weights must sum to 1, got {w:?}")));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("MS-SSIM window must be odd, got {}", self.window)));
        }
        for (name, v) in [("sigma", self.sigma), ("data_range", self.data_range), ("k1", self.k1), ("k2", self.k2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("MS-SSIM {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn scales(&self) -> usize {
        self.scale_weights.len()
    }

    /// Smallest extent per dimension that survives every downsampling.
    pub fn min_extent(&self) -> usize {
        self.window << (self.scales() - 1)
    }

    fn kernel(&self) -> Vec<f64> {
        let half = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let x = i as f64 - half;
                (-x * x / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

fn filter_valid(a: &ArrayD<f64>, kernel: &[f64]) -> ArrayD<f64> {
    let mut cur = a.clone();
    for ax in 0..a.ndim() {
        let mut shape = cur.shape().to_vec();
        shape[ax] = shape[ax] + 1 - kernel.len();
        let mut out = ArrayD::zeros(IxDyn(&shape));
        Zip::from(out.lanes_mut(Axis(ax)))
            .and(cur.lanes(Axis(ax)))
            .for_each(|mut o, i| {
                for (n, slot) in o.iter_mut().enumerate() {
                    *slot = kernel.iter().enumerate().map(|(j, w)| w * i[n + j]).sum();
                }
            });
        cur = out;
    }
    cur
}

fn avg_pool2(a: &ArrayD<f64>) -> ArrayD<f64> {
    let shape: Vec<usize> = a.shape().iter().map(|e| e / 2).collect();
    let block = 1usize << a.ndim();
    let mut out = ArrayD::zeros(IxDyn(&shape));
    let mut src = vec![0usize; a.ndim()];
    for (idx, slot) in out.indexed_iter_mut() {
        let mut acc = 0.0;
        for corner in 0..block {
            for (d, s) in src.iter_mut().enumerate() {
                *s = 2 * idx[d] + ((corner >> d) & 1);
            }
            acc += a[IxDyn(&src)];
        }
        *slot = acc / block as f64;
    }
    out
}

/// Mean SSIM and mean contrast-structure at one scale.
fn ssim_terms(a: &ArrayD<f64>, b: &ArrayD<f64>, kernel: &[f64], c1: f64, c2: f64) -> (f64, f64) {
    let mu_a = filter_valid(a, kernel);
    let mu_b = filter_valid(b, kernel);
    let aa = filter_valid(&(a * a), kernel);
    let bb = filter_valid(&(b * b), kernel);
    let ab = filter_valid(&(a * b), kernel);
    let (mut ssim, mut cs) = (0.0, 0.0);
    let n = mu_a.len() as f64;
    Zip::from(&mu_a)
        .and(&mu_b)
        .and(&aa)
        .and(&bb)
        .and(&ab)
        .for_each(|&ma, &mb, &saa, &sbb, &sab| {
            let var_a = saa - ma * ma;
            let var_b = sbb - mb * mb;
            let cov = sab - ma * mb;
            let c = (2.0 * cov + c2) / (var_a + var_b + c2);
            let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            cs += c;
            ssim += l * c;
        });
    (ssim / n, cs / n)
}

/// MS-SSIM of two equally shaped arrays of any dimension.
pub fn ms_ssim(a: ArrayViewD<'_, f64>, b: ArrayViewD<'_, f64>, cfg: &MsSsimConfig) -> Result<f64> {
    cfg.validate()?;
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    let required = cfg.min_extent();
    for (dim, &extent) in a.shape().iter().enumerate() {
        if extent < required {
            return Err(Error::TooSmall {
                scales: cfg.scales(),
                dim,
                extent,
                required,
            });
        }
    }
    let kernel = cfg.kernel();
    let c1 = (cfg.k1 * cfg.data_range).powi(2);
    let c2 = (cfg.k2 * cfg.data_range).powi(2);
    let mut x = a.to_owned();
    let mut y = b.to_owned();
    let mut score = 1.0;
    let last = cfg.scales() - 1;
    for (i, &w) in cfg.scale_weights.iter().enumerate() {
        let (ssim, cs) = ssim_terms(&x, &y, &kernel, c1, c2);
        let term = if i == last { ssim } else { cs };
        score *= term.max(0.0).powf(w);
        if i < last {
            x = avg_pool2(&x);
            y = avg_pool2(&y);
        }
    }
    Ok(score)
}

pub fn ms_ssim_volume(a: &Volume, b: &Volume, cfg: &MsSsimConfig) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    let to_dyn = |v: &Volume| ArrayD::from_shape_vec(IxDyn(&v.shape()), v.to_f64()).expect("volume shape");
    ms_ssim(to_dyn(a).view(), to_dyn(b).view(), cfg)
}

/// MS-SSIM of two row-major 2D slices of extent `dims`.
pub fn ms_ssim_slice(a: &[f64], b: &[f64], dims: [usize; 2], cfg: &MsSsimConfig) -> Result<f64> {
    fn view<'a>(s: &'a [f64], dims: [usize; 2]) -> Result<ArrayViewD<'a, f64>> {
        ArrayViewD::from_shape(IxDyn(&dims), s).map_err(|_| Error::shape(dims, s.len()))
    }
    ms_ssim(view(a, dims)?, view(b, dims)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::phantom_pair;
    use crate::rng::seeded;
    use rand::Rng;

    fn cfg7() -> MsSsimConfig {
        MsSsimConfig::default().with_window(7)
    }

    fn noisy_slice(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = seeded(seed);
        (0..n * n)
            .map(|i| {
                let (r, c) = ((i / n) as f64, (i % n) as f64);
                0.5 + 0.3 * (r / 5.0).sin() * (c / 7.0).cos() + 0.05 * rng.random::<f64>()
            })
            .collect()
    }

    #[test]
    fn self_similarity_is_one() {
        let a = noisy_slice(0, 48);
        let s = ms_ssim_slice(&a, &a, [48, 48], &MsSsimConfig::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
        let (t1, _) = phantom_pair(3, [32, 32, 32]).unwrap();
        let s = ms_ssim_volume(&t1, &t1, &cfg7()).unwrap();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn symmetric() {
        let a = noisy_slice(1, 48);
        let b = noisy_slice(2, 48);
        let ab = ms_ssim_slice(&a, &b, [48, 48], &MsSsimConfig::default()).unwrap();
        let ba = ms_ssim_slice(&b, &a, [48, 48], &MsSsimConfig::default()).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        assert!(ab < 1.0);
    }

    #[test]
    fn inverted_phantom_scores_low() {
        let (_, fa) = phantom_pair(5, [32, 32, 32]).unwrap();
        let inv = Volume::new(fa.shape(), fa.voxels().iter().map(|v| 1.0 - v).collect()).unwrap();
        let s = ms_ssim_volume(&fa, &inv, &cfg7()).unwrap();
        assert!(s < 0.3, "{s}");
    }

    #[test]
    fn more_noise_scores_lower() {
        let n = 48;
        let base = vec![0.5; n * n];
        let mut rng = seeded(9);
        let mut noisy = |sigma: f64| -> Vec<f64> {
            // uniform noise with standard deviation sigma
            let half = sigma * 3f64.sqrt();
            base.iter().map(|v| v + rng.random_range(-half..half)).collect()
        };
        let weak = noisy(0.01);
        let strong = noisy(0.1);
        let c = MsSsimConfig::default();
        let s_weak = ms_ssim_slice(&base, &weak, [n, n], &c).unwrap();
        let s_strong = ms_ssim_slice(&base, &strong, [n, n], &c).unwrap();
        assert!(s_strong < s_weak, "{s_strong} vs {s_weak}");
    }

    #[test]
    fn too_small_names_dimension() {
        let a = vec![0.0; 44 * 40];
        let err = ms_ssim_slice(&a, &a, [44, 40], &MsSsimConfig::default()).unwrap_err();
        match err {
            Error::TooSmall {
                dim, extent, required, ..
            } => assert_eq!((dim, extent, required), (1, 40, 44)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut c = MsSsimConfig::default();
        c.scale_weights = vec![0.5, 0.6];
        assert!(c.validate().is_err());
        c.scale_weights = vec![1.0];
        assert!(c.validate().is_ok());
        assert!(MsSsimConfig::default().with_window(4).validate().is_err());
    }

    #[test]
    fn valid_filter_against_direct_sum() {
        let a = ArrayD::from_shape_fn(IxDyn(&[5, 6]), |ix| (ix[0] * 6 + ix[1]) as f64);
        let k = [0.25, 0.5, 0.25];
        let f = filter_valid(&a, &k);
        assert_eq!(f.shape(), &[3, 4]);
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                direct += k[i] * k[j] * a[[1 + i, 2 + j]];
            }
        }
        assert!((f[[1, 2]] - direct).abs() < 1e-12);
        let p = avg_pool2(&a);
        assert_eq!(p.shape(), &[2, 3]);
        assert_eq!(p[[0, 0]], (0.0 + 1.0 + 6.0 + 7.0) / 4.0);
    }
}
