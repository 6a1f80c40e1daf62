use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView3, ArrayViewMut3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    T1Like,
    FaLike,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::T1Like => "t1-like",
            Modality::FaLike => "fa-like",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t1-like" => Ok(Modality::T1Like),
            "fa-like" => Ok(Modality::FaLike),
            other => Err(Error::InvalidConfig(format!("unknown modality `{other}`"))),
        }
    }
}

/// Intensity range of the raw data before min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub subject_id: String,
    pub modality: Option<Modality>,
    pub normalization: Option<NormRecord>,
}

/// The three spatial axes, named after the usual brain-imaging views.
/// Axis `k` indexes dimension `k` of the row-major volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Sagittal,
    Coronal,
    Axial,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Sagittal, Axis::Coronal, Axis::Axial];

    pub fn index(self) -> usize {
        match self {
            Axis::Sagittal => 0,
            Axis::Coronal => 1,
            Axis::Axial => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Sagittal => "sagittal",
            Axis::Coronal => "coronal",
            Axis::Axial => "axial",
        })
    }
}

/// Dense row-major scalar volume, innermost axis last.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    shape: [usize; 3],
    voxels: Vec<f32>,
    pub meta: VolumeMeta,
}

impl Volume {
    pub fn new(shape: [usize; 3], voxels: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidConfig(format!("volume extents must be positive, got {shape:?}")));
        }
        let count = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        if count != Some(voxels.len()) {
            return Err(Error::ShapeMismatch {
                left: format!("shape {shape:?}"),
                right: format!("{} voxels", voxels.len()),
            });
        }
        Ok(Self {
            shape,
            voxels,
            meta: VolumeMeta::default(),
        })
    }

    pub fn zeros(shape: [usize; 3]) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn from_f64(shape: [usize; 3], values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| v as f32).collect())
    }

    pub fn with_meta(mut self, meta: VolumeMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut [f32] {
        &mut self.voxels
    }

    pub fn into_voxels(self) -> Vec<f32> {
        self.voxels
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.voxels.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn view(&self) -> ArrayView3<'_, f32> {
        ArrayView3::from_shape(self.shape, &self.voxels).expect("shape checked at construction")
    }

    pub fn view_mut(&mut self) -> ArrayViewMut3<'_, f32> {
        ArrayViewMut3::from_shape(self.shape, &mut self.voxels).expect("shape checked at construction")
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.voxels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn sum(&self) -> f64 {
        self.voxels.iter().map(|&v| f64::from(v)).sum()
    }

    /// Extracts slice `index` along `axis` as a row-major 2D array.
    pub fn slice(&self, axis: Axis, index: usize) -> Result<(Vec<f64>, [usize; 2])> {
        let a = axis.index();
        if index >= self.shape[a] {
            return Err(Error::Domain {
                what: "slice index",
                value: index as f64,
                domain: "[0, extent)",
            });
        }
        let plane = self.view().index_axis_move(ndarray::Axis(a), index);
        let dims = [plane.shape()[0], plane.shape()[1]];
        Ok((plane.iter().map(|&v| f64::from(v)).collect(), dims))
    }
}

/// Min-max scaling to `[0, 1]`.
///
/// The affine map is evaluated in double precision. If the volume already
/// carries a normalization record, the new record is composed with it so
/// [`denormalize`] still returns the original intensities.
pub fn minmax_normalize(v: &Volume) -> Result<Volume> {
    if v.voxels.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("cannot normalize a volume with non-finite voxels".into()));
    }
    let (lo, hi) = v.min_max();
    if hi <= lo {
        return Err(Error::Degenerate(format!("constant volume (value {lo}) cannot be min-max scaled")));
    }
    let (lo, hi) = (f64::from(lo), f64::from(hi));
    let range = hi - lo;
    let voxels = v.voxels.iter().map(|&x| ((f64::from(x) - lo) / range) as f32).collect();
    let record = match v.meta.normalization {
        Some(prev) => {
            let span = prev.max - prev.min;
            NormRecord {
                min: lo * span + prev.min,
                max: hi * span + prev.min,
            }
        }
        None => NormRecord { min: lo, max: hi },
    };
    let mut out = Volume::new(v.shape, voxels)?.with_meta(v.meta.clone());
    out.meta.normalization = Some(record);
    Ok(out)
}

/// Undoes [`minmax_normalize`] using the recorded range.
pub fn denormalize(v: &Volume) -> Result<Volume> {
    let rec = v
        .meta
        .normalization
        .ok_or_else(|| Error::InvalidConfig("volume carries no normalization record".into()))?;
    let span = rec.max - rec.min;
    let voxels = v.voxels.iter().map(|&x| (f64::from(x) * span + rec.min) as f32).collect();
    let mut out = Volume::new(v.shape, voxels)?.with_meta(v.meta.clone());
    out.meta.normalization = None;
    Ok(out)
}

/// Per-axis offsets `floor((target - source) / 2)` that centre `source`
/// inside `target`.
pub fn pad_offsets(source: [usize; 3], target: [usize; 3]) -> Result<[usize; 3]> {
    let mut off = [0; 3];
    for k in 0..3 {
        if target[k] < source[k] {
            return Err(Error::ShapeMismatch {
                left: format!("target {target:?}"),
                right: format!("at least source {source:?} on every axis"),
            });
        }
        off[k] = (target[k] - source[k]) / 2;
    }
    Ok(off)
}

/// Zero-pads `v` to `target`, centred with floor offsets.
pub fn zero_pad(v: &Volume, target: [usize; 3]) -> Result<Volume> {
    let off = pad_offsets(v.shape, target)?;
    let mut out = Volume::zeros(target)?.with_meta(v.meta.clone());
    let src = v.view();
    let mut dst = out.view_mut();
    let mut window = dst.slice_mut(ndarray::s![
        off[0]..off[0] + v.shape[0],
        off[1]..off[1] + v.shape[1],
        off[2]..off[2] + v.shape[2]
    ]);
    window.assign(&src);
    Ok(out)
}

/// The box of extent `shape` starting at `offset`.
pub fn crop(v: &Volume, offset: [usize; 3], shape: [usize; 3]) -> Result<Volume> {
    for k in 0..3 {
        if shape[k] == 0 || offset[k] + shape[k] > v.shape[k] {
            return Err(Error::ShapeMismatch {
                left: format!("crop box offset {offset:?} extent {shape:?}"),
                right: format!("volume {:?}", v.shape),
            });
        }
    }
    let view = v.view();
    let window = view.slice(ndarray::s![
        offset[0]..offset[0] + shape[0],
        offset[1]..offset[1] + shape[1],
        offset[2]..offset[2] + shape[2]
    ]);
    Ok(Volume::new(shape, window.iter().copied().collect())?.with_meta(v.meta.clone()))
}

/// Inverse of [`zero_pad`]: the centred box of extent `shape`.
pub fn crop_center(v: &Volume, shape: [usize; 3]) -> Result<Volume> {
    let off = pad_offsets(shape, v.shape)?;
    crop(v, off, shape)
}

/// Block averaging by an integer `factor` per axis; trailing voxels that do
/// not fill a whole block are dropped.
pub fn downsample(v: &Volume, factor: usize) -> Result<Volume> {
    if factor == 0 {
        return Err(Error::InvalidConfig("downsampling factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(v.clone());
    }
    let shape = v.shape.map(|e| e / factor);
    if shape.contains(&0) {
        return Err(Error::ShapeMismatch {
            left: format!("volume {:?}", v.shape),
            right: format!("at least {factor} voxels per axis"),
        });
    }
    let src = v.view();
    let norm = (factor * factor * factor) as f64;
    let mut voxels = Vec::with_capacity(shape.iter().product());
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                let block = src.slice(ndarray::s![
                    i * factor..(i + 1) * factor,
                    j * factor..(j + 1) * factor,
                    k * factor..(k + 1) * factor
                ]);
                voxels.push((block.iter().map(|&x| f64::from(x)).sum::<f64>() / norm) as f32);
            }
        }
    }
    Ok(Volume::new(shape, voxels)?.with_meta(v.meta.clone()))
}
