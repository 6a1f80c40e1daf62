//! Squared maximum mean discrepancy with a Gaussian kernel.
//!
//! The estimator is the biased V-statistic
//! `mean K(X, X) + mean K(Y, Y) - 2 mean K(X, Y)` (diagonals included),
//! clipped at zero. Under the median rule the bandwidth is the median of
//! the strictly positive pairwise distances of the pooled sample.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Volume;
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdConfig {
    pub bandwidth: Bandwidth,
    /// Edge length of the cubic patches forming a volume's sample set.
    pub patch_size: usize,
    pub patch_stride: usize,
    /// Upper bound on patches per volume; larger sets are thinned by
    /// keeping every k-th patch.
    pub max_patches: usize,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Median,
            patch_size: 4,
            patch_stride: 4,
            max_patches: 1024,
        }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.patch_stride == 0 || self.max_patches < 2 {
            return Err(Error::InvalidConfig(format!(
                "MMD patches need positive size and stride and at least 2 samples, got {self:?}"
            )));
        }
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidConfig(format!("MMD bandwidth must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn check_samples(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<usize> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "MMD needs at least 2 samples per side, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().chain(y).find(|v| v.len() != d) {
        return Err(Error::shape(d, bad.len()));
    }
    Ok(d)
}

/// Symmetric matrix of squared distances over the pooled sample.
fn pooled_sq_distances(pooled: &[&[f64]]) -> Vec<f64> {
    let n = pooled.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(pooled[i], pooled[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

fn median_bandwidth(sq: &[f64], n: usize) -> Result<f64> {
    let mut dists: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| sq[i * n + j])
        .filter(|&v| v > 0.0)
        .map(f64::sqrt)
        .collect();
    if dists.is_empty() {
        return Err(Error::Degenerate("all pooled MMD samples are identical".into()));
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    Ok(if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    })
}

struct KernelMatrix {
    k: Vec<f64>,
    n: usize,
    sigma: f64,
}

impl KernelMatrix {
    fn build(x: &[Vec<f64>], y: &[Vec<f64>], bandwidth: Bandwidth) -> Result<Self> {
        check_samples(x, y)?;
        let pooled: Vec<&[f64]> = x.iter().chain(y).map(Vec::as_slice).collect();
        let n = pooled.len();
        let sq = pooled_sq_distances(&pooled);
        let sigma = match bandwidth {
            Bandwidth::Median => median_bandwidth(&sq, n)?,
            Bandwidth::Fixed(s) => s,
        };
        let scale = -0.5 / (sigma * sigma);
        Ok(Self {
            k: sq.into_iter().map(|d| (scale * d).exp()).collect(),
            n,
            sigma,
        })
    }

    /// V-statistic for the labelling `first[i] == true` meaning sample `i`
    /// is in the first set.
    fn statistic(&self, first: &[bool]) -> f64 {
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.k[i * self.n + j];
                match (first[i], first[j]) {
                    (true, true) => sxx += v,
                    (false, false) => syy += v,
                    _ => sxy += v,
                }
            }
        }
        let nx = first.iter().filter(|&&f| f).count() as f64;
        let ny = self.n as f64 - nx;
        // sxy counts each cross pair twice
        (sxx / (nx * nx) + syy / (ny * ny) - sxy / (nx * ny)).max(0.0)
    }
}

/// Squared MMD together with the bandwidth that was used.
pub fn mmd_with_bandwidth(x: &[Vec<f64>], y: &[Vec<f64>], cfg: &MmdConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let km = KernelMatrix::build(x, y, cfg.bandwidth)?;
    let labels: Vec<bool> = (0..km.n).map(|i| i < x.len()).collect();
    Ok((km.statistic(&labels), km.sigma))
}

pub fn mmd(x: &[Vec<f64>], y: &[Vec<f64>], cfg: &MmdConfig) -> Result<f64> {
    Ok(mmd_with_bandwidth(x, y, cfg)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationTest {
    pub statistic: f64,
    /// Statistics under random relabellings, sorted ascending.
    pub null: Vec<f64>,
    pub bandwidth: f64,
}

impl PermutationTest {
    /// Empirical `q`-quantile of the null distribution (nearest rank).
    pub fn null_quantile(&self, q: f64) -> f64 {
        let m = self.null.len();
        let rank = (q * m as f64).ceil() as usize;
        self.null[rank.clamp(1, m) - 1]
    }

    /// Fraction of null statistics at least as large as the observed one,
    /// with the usual `+1` correction.
    pub fn p_value(&self) -> f64 {
        let exceed = self.null.iter().filter(|&&v| v >= self.statistic).count();
        (exceed + 1) as f64 / (self.null.len() + 1) as f64
    }
}

/// Permutation test of `x` versus `y`. The pooled sample is fixed under
/// relabelling, so the median bandwidth is computed once.
pub fn permutation_test(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    cfg: &MmdConfig,
    permutations: usize,
    seed: u64,
) -> Result<PermutationTest> {
    cfg.validate()?;
    if permutations == 0 {
        return Err(Error::InvalidConfig("permutation test needs at least one permutation".into()));
    }
    let km = KernelMatrix::build(x, y, cfg.bandwidth)?;
    let mut labels: Vec<bool> = (0..km.n).map(|i| i < x.len()).collect();
    let statistic = km.statistic(&labels);
    let mut rng = seeded(seed);
    let mut null: Vec<f64> = (0..permutations)
        .map(|_| {
            labels.shuffle(&mut rng);
            km.statistic(&labels)
        })
        .collect();
    null.sort_by(f64::total_cmp);
    Ok(PermutationTest {
        statistic,
        null,
        bandwidth: km.sigma,
    })
}

/// Flattened cubic patches of edge `size` at every `stride`, thinned to at
/// most `max_patches` by keeping evenly spaced ones.
pub fn extract_patches(v: &Volume, size: usize, stride: usize, max_patches: usize) -> Result<Vec<Vec<f64>>> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidConfig("patch size and stride must be positive".into()));
    }
    let shape = v.shape();
    if shape.iter().any(|&e| e < size) {
        return Err(Error::ShapeMismatch {
            left: format!("volume {shape:?}"),
            right: format!("patch edge {size}"),
        });
    }
    let starts = |e: usize| (0..=e - size).step_by(stride).collect::<Vec<_>>();
    let (si, sj, sk) = (starts(shape[0]), starts(shape[1]), starts(shape[2]));
    let view = v.view();
    let mut patches: Vec<Vec<f64>> = Vec::with_capacity(si.len() * sj.len() * sk.len());
    for &i in &si {
        for &j in &sj {
            for &k in &sk {
                let block = view.slice(ndarray::s![i..i + size, j..j + size, k..k + size]);
                patches.push(block.iter().map(|&x| f64::from(x)).collect());
            }
        }
    }
    if patches.len() > max_patches {
        let total = patches.len();
        patches = (0..max_patches).map(|m| patches[m * total / max_patches].clone()).collect();
    }
    Ok(patches)
}
