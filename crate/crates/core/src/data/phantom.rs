//! Paired synthetic "T1-like" and "FA-like" volumes with shared geometry.
//!
//! Each phantom is a large brain-like ellipsoid plus 2 to 7 smaller inner
//! ellipsoids, painted in order so later ones cover earlier ones, on a zero
//! background. Every ellipsoid belongs to one of three tissue classes.
//!
//! | class  | t1 level | eigenvalue spread `s` |
//! |--------|----------|-----------------------|
//! | brain  | 1.00     | 2.5 .. 4.5            |
//! | grey   | 0.65     | 0.7 .. 1.2            |
//! | fluid  | 0.40     | 0.1 .. 0.35           |
//!
//! With `r` the normalized ellipsoid radius (`r < 1` inside), the t1
//! channel is `level (1 - 0.3 r^2)` and the FA channel is
//! `FA(1 + s, 1 + q s, 1) (0.5 + 0.5 r^2)` with `q` drawn from
//! `[0, 0.2]`. The t1 ranges of the classes do not overlap, so the FA
//! value is close to a function of the t1 value and the translation can be
//! learned voxel by voxel. Both channels are min-max scaled at the end.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::metrics::fractional_anisotropy;
use crate::rng::seeded;
use crate::{Error, Result};

use super::{minmax_normalize, Modality, Volume};

pub const MIN_PHANTOM_EXTENT: usize = 32;

struct TissueClass {
    t1_level: f64,
    spread: (f64, f64),
}

const CLASSES: [TissueClass; 3] = [
    TissueClass {
        t1_level: 1.0,
        spread: (2.5, 4.5),
    },
    TissueClass {
        t1_level: 0.65,
        spread: (0.7, 1.2),
    },
    TissueClass {
        t1_level: 0.4,
        spread: (0.1, 0.35),
    },
];

struct Ellipsoid {
    center: [f64; 3],
    semi_axes: [f64; 3],
    /// Rows are the body-frame axes.
    rotation: [[f64; 3]; 3],
    t1_level: f64,
    fa: f64,
}

impl Ellipsoid {
    fn radius_sq(&self, p: [f64; 3]) -> f64 {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        (0..3)
            .map(|k| {
                let row = self.rotation[k];
                let u = row[0] * d[0] + row[1] * d[1] + row[2] * d[2];
                (u / self.semi_axes[k]).powi(2)
            })
            .sum()
    }
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    let mut q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    q.iter_mut().for_each(|v| *v /= n);
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn draw_ellipsoid<R: Rng + ?Sized>(rng: &mut R, class: usize, inner: bool) -> Result<Ellipsoid> {
    let (center_half, axes) = if inner { (0.18, (0.07, 0.16)) } else { (0.03, (0.36, 0.46)) };
    let center = std::array::from_fn(|_| rng.random_range(-center_half..=center_half));
    let semi_axes = std::array::from_fn(|_| rng.random_range(axes.0..=axes.1));
    let rotation = random_rotation(rng);
    let c = &CLASSES[class];
    let s = rng.random_range(c.spread.0..=c.spread.1);
    let q = rng.random_range(0.0..=0.2);
    let fa = fractional_anisotropy(1.0 + s, 1.0 + q * s, 1.0)?;
    Ok(Ellipsoid {
        center,
        semi_axes,
        rotation,
        t1_level: c.t1_level,
        fa,
    })
}

/// Generates the `(t1_like, fa_like)` pair for `seed`; a pure function of
/// `(seed, shape)`. Coordinates are normalized per axis to `[-0.5, 0.5]`.
pub fn phantom_pair(seed: u64, shape: [usize; 3]) -> Result<(Volume, Volume)> {
    if shape.iter().any(|&e| e < MIN_PHANTOM_EXTENT) {
        return Err(Error::InvalidConfig(format!(
            "phantom extents must be at least {MIN_PHANTOM_EXTENT}, got {shape:?}"
        )));
    }
    let mut rng = seeded(seed);
    let count = rng.random_range(3..=8usize);
    let mut shapes = vec![draw_ellipsoid(&mut rng, 0, false)?];
    for _ in 1..count {
        let class = rng.random_range(1..=2usize);
        shapes.push(draw_ellipsoid(&mut rng, class, true)?);
    }

    let n: usize = shape.iter().product();
    let mut t1 = vec![0.0f64; n];
    let mut fa = vec![0.0f64; n];
    let mut idx = 0;
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                let p = [
                    (i as f64 + 0.5) / shape[0] as f64 - 0.5,
                    (j as f64 + 0.5) / shape[1] as f64 - 0.5,
                    (k as f64 + 0.5) / shape[2] as f64 - 0.5,
                ];
                for e in &shapes {
                    let r2 = e.radius_sq(p);
                    if r2 < 1.0 {
                        t1[idx] = e.t1_level * (1.0 - 0.3 * r2);
                        fa[idx] = e.fa * (0.5 + 0.5 * r2);
                    }
                }
                idx += 1;
            }
        }
    }

    let id = format!("phantom-{seed}");
    let mut out = Vec::with_capacity(2);
    for (values, modality) in [(t1, Modality::T1Like), (fa, Modality::FaLike)] {
        let mut v = minmax_normalize(&Volume::from_f64(shape, &values)?)?;
        v.meta.subject_id = id.clone();
        v.meta.modality = Some(modality);
        out.push(v);
    }
    let fa = out.pop().expect("two channels");
    let t1 = out.pop().expect("two channels");
    Ok((t1, fa))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHAPE: [usize; 3] = [32, 32, 32];

    #[test]
    fn deterministic_in_seed() {
        let a = phantom_pair(11, SHAPE).unwrap();
        let b = phantom_pair(11, SHAPE).unwrap();
        let bits = |v: &Volume| v.voxels().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.0), bits(&b.0));
        assert_eq!(bits(&a.1), bits(&b.1));
        let c = phantom_pair(12, SHAPE).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn background_is_zero_in_both_channels_and_range_is_unit() {
        for seed in 0..5 {
            let (t1, fa) = phantom_pair(seed, SHAPE).unwrap();
            // the corner lies outside every ellipsoid
            assert_eq!(t1.voxels()[0], 0.0);
            assert_eq!(fa.voxels()[0], 0.0);
            for (a, b) in t1.voxels().iter().zip(fa.voxels()) {
                assert_eq!(*a == 0.0, *b == 0.0);
            }
            assert_eq!(t1.min_max(), (0.0, 1.0));
            assert_eq!(fa.min_max(), (0.0, 1.0));
            assert_eq!(t1.meta.modality, Some(Modality::T1Like));
            assert_eq!(fa.meta.subject_id, format!("phantom-{seed}"));
        }
    }

    #[test]
    fn rejects_small_extents() {
        assert!(phantom_pair(0, [31, 32, 32]).is_err());
        assert!(phantom_pair(0, [32, 40, 36]).is_ok());
    }

    fn mutual_information(a: &[f32], b: &[f32], bins: usize) -> f64 {
        let bin = |v: f32| ((v.clamp(0.0, 1.0) * bins as f32) as usize).min(bins - 1);
        let mut joint = vec![0.0; bins * bins];
        for (&x, &y) in a.iter().zip(b) {
            joint[bin(x) * bins + bin(y)] += 1.0;
        }
        let n = a.len() as f64;
        let pa: Vec<f64> = (0..bins).map(|i| joint[i * bins..(i + 1) * bins].iter().sum::<f64>() / n).collect();
        let pb: Vec<f64> = (0..bins).map(|j| (0..bins).map(|i| joint[i * bins + j]).sum::<f64>() / n).collect();
        let mut mi = 0.0;
        for i in 0..bins {
            for j in 0..bins {
                let p = joint[i * bins + j] / n;
                if p > 0.0 {
                    mi += p * (p / (pa[i] * pb[j])).ln();
                }
            }
        }
        mi
    }

    #[test]
    fn channels_share_information() {
        let pairs: Vec<_> = (0..20).map(|s| phantom_pair(s, SHAPE).unwrap()).collect();
        let (mut matched, mut mismatched) = (0.0, 0.0);
        for s in 0..20 {
            let other = (s + 1) % 20;
            let m = mutual_information(pairs[s].0.voxels(), pairs[s].1.voxels(), 32);
            let x = mutual_information(pairs[s].0.voxels(), pairs[other].1.voxels(), 32);
            assert!(m > x, "seed {s}: {m} vs {x}");
            matched += m;
            mismatched += x;
        }
        assert!(matched > 1.5 * mismatched);
    }
}
