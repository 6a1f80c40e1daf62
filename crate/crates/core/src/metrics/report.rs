use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Axis, Volume};
use crate::{Error, Result};

use super::{extract_patches, mmd, ms_ssim_slice, ms_ssim_volume, psnr, MmdConfig, MsSsimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub axis: Axis,
    pub slice_index: usize,
    /// Absent when the slice could not be scored.
    pub ms_ssim: Option<f64>,
    pub degenerate_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceReport {
    pub axis: Axis,
    pub rows: Vec<SliceRow>,
    /// Mean over the scored slices; `None` if no slice was scored.
    pub mean: Option<f64>,
}

fn is_constant(s: &[f64]) -> bool {
    s.iter().all(|&v| v == s[0])
}

/// Per-slice 2D MS-SSIM along `axis`.
///
/// A slice pair where both slices are constant has no structure to
/// compare; it is flagged and left out of the mean. Slices smaller than the
/// configured pyramid are flagged the same way.
pub fn slice_report(a: &Volume, b: &Volume, axis: Axis, cfg: &MsSsimConfig) -> Result<SliceReport> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    cfg.validate()?;
    let extent = a.shape()[axis.index()];
    let rows: Vec<SliceRow> = (0..extent)
        .into_par_iter()
        .map(|i| {
            let (sa, dims) = a.slice(axis, i)?;
            let (sb, _) = b.slice(axis, i)?;
            let score = if is_constant(&sa) && is_constant(&sb) {
                None
            } else {
                match ms_ssim_slice(&sa, &sb, dims, cfg) {
                    Ok(s) => Some(s),
                    Err(Error::TooSmall { .. }) => None,
                    Err(e) => return Err(e),
                }
            };
            Ok(SliceRow {
                axis,
                slice_index: i,
                ms_ssim: score,
                degenerate_flag: score.is_none(),
            })
        })
        .collect::<Result<_>>()?;
    let scored: Vec<f64> = rows.iter().filter_map(|r| r.ms_ssim).collect();
    let mean = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    Ok(SliceReport { axis, rows, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub subject_id: String,
    pub ms_ssim_3d: Option<f64>,
    pub psnr_db: Option<f64>,
    pub mmd: Option<f64>,
    /// Why a cell is absent; not part of the CSV.
    #[serde(skip)]
    pub issues: Vec<String>,
}

fn subject_row(id: &str, real: &Volume, synthetic: &Volume, ssim_cfg: &MsSsimConfig, mmd_cfg: &MmdConfig) -> SubjectRow {
    let mut issues = Vec::new();
    let mut keep = |name: &str, r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            issues.push(format!("{name}: {e}"));
            None
        }
    };
    let ms = keep("ms_ssim_3d", ms_ssim_volume(real, synthetic, ssim_cfg));
    let ps = keep("psnr_db", psnr(real, synthetic));
    let patches = |v: &Volume| extract_patches(v, mmd_cfg.patch_size, mmd_cfg.patch_stride, mmd_cfg.max_patches);
    let md = keep("mmd", patches(real).and_then(|x| mmd(&x, &patches(synthetic)?, mmd_cfg)));
    SubjectRow {
        subject_id: id.to_string(),
        ms_ssim_3d: ms,
        psnr_db: ps,
        mmd: md,
        issues,
    }
}

/// One row of 3D MS-SSIM, PSNR and patch-set MMD per `(id, real,
/// synthetic)` triple.
pub fn subject_report(
    pairs: &[(String, Volume, Volume)],
    ssim_cfg: &MsSsimConfig,
    mmd_cfg: &MmdConfig,
) -> Result<Vec<SubjectRow>> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("subject report needs at least one subject".into()));
    }
    ssim_cfg.validate()?;
    mmd_cfg.validate()?;
    Ok(pairs
        .par_iter()
        .map(|(id, real, synthetic)| subject_row(id, real, synthetic, ssim_cfg, mmd_cfg))
        .collect())
}

pub fn write_slice_csv(report: &SliceReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_subject_csv(rows: &[SubjectRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::phantom_pair;
    use crate::metrics::PSNR_CAP_DB;
    use crate::rng::seeded;
    use rand::Rng;

    fn cfg() -> MsSsimConfig {
        MsSsimConfig::default().with_window(7)
    }

    #[test]
    fn identical_volumes_score_one_everywhere() {
        let (t1, _) = phantom_pair(1, [32, 32, 32]).unwrap();
        for axis in Axis::ALL {
            let r = slice_report(&t1, &t1, axis, &cfg()).unwrap();
            assert_eq!(r.rows.len(), 32);
            for row in &r.rows {
                match row.ms_ssim {
                    Some(s) => assert!((s - 1.0).abs() < 1e-6),
                    None => assert!(row.degenerate_flag),
                }
            }
            assert!((r.mean.unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn background_slices_are_excluded() {
        let mut v = Volume::zeros([4, 28, 28]).unwrap();
        let mut rng = seeded(0);
        for x in v.view_mut().slice_mut(ndarray::s![1..3, .., ..]).iter_mut() {
            *x = rng.random();
        }
        let r = slice_report(&v, &v, Axis::Sagittal, &cfg()).unwrap();
        assert!(r.rows[0].degenerate_flag && r.rows[3].degenerate_flag);
        assert_eq!(r.rows[0].ms_ssim, None);
        assert!(!r.rows[1].degenerate_flag);
        assert!((r.mean.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn localized_corruption_shows_in_its_slices() {
        let (_, fa) = phantom_pair(2, [32, 32, 32]).unwrap();
        let mut bad = fa.clone();
        let mut rng = seeded(1);
        for x in bad.view_mut().slice_mut(ndarray::s![.., .., 14..18]).iter_mut() {
            *x = (*x + rng.random_range(-0.3..0.3f32)).clamp(0.0, 1.0);
        }
        let clean = slice_report(&fa, &fa, Axis::Axial, &cfg()).unwrap();
        let dirty = slice_report(&fa, &bad, Axis::Axial, &cfg()).unwrap();
        assert!(dirty.mean.unwrap() < clean.mean.unwrap());
        let worst = dirty
            .rows
            .iter()
            .filter(|r| r.ms_ssim.is_some())
            .min_by(|a, b| a.ms_ssim.partial_cmp(&b.ms_ssim).unwrap())
            .unwrap();
        assert!((14..18).contains(&worst.slice_index), "{}", worst.slice_index);
    }

    #[test]
    fn subject_rows_for_identical_and_noisy_pairs() {
        let mut pairs = Vec::new();
        let mut rng = seeded(3);
        for s in 0..3 {
            let (_, fa) = phantom_pair(s, [32, 32, 32]).unwrap();
            pairs.push((format!("s{s}"), fa.clone(), fa));
        }
        let rows = subject_report(&pairs, &cfg(), &MmdConfig::default()).unwrap();
        for r in &rows {
            assert!((r.ms_ssim_3d.unwrap() - 1.0).abs() < 1e-6);
            assert_eq!(r.psnr_db, Some(PSNR_CAP_DB));
            assert!(r.mmd.unwrap().abs() < 1e-12);
        }
        let noisy: Vec<_> = pairs
            .iter()
            .map(|(id, real, _)| {
                let vals = real
                    .voxels()
                    .iter()
                    .map(|v| v + 0.05 * crate::rng::standard_normal(&mut rng) as f32)
                    .collect();
                (id.clone(), real.clone(), Volume::new(real.shape(), vals).unwrap())
            })
            .collect();
        for r in subject_report(&noisy, &cfg(), &MmdConfig::default()).unwrap() {
            let p = r.psnr_db.unwrap();
            assert!((20.0..32.0).contains(&p), "{p}");
        }
        let one = subject_report(&pairs[..1], &cfg(), &MmdConfig::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert!(subject_report(&[], &cfg(), &MmdConfig::default()).is_err());
    }

    #[test]
    fn failing_metrics_become_absent_cells() {
        let v = Volume::new([8, 8, 8], vec![0.5; 512]).unwrap();
        let rows = subject_report(&[("c".into(), v.clone(), v)], &cfg(), &MmdConfig::default()).unwrap();
        assert_eq!(rows[0].ms_ssim_3d, None);
        assert_eq!(rows[0].mmd, None);
        assert_eq!(rows[0].psnr_db, Some(PSNR_CAP_DB));
        assert_eq!(rows[0].issues.len(), 2);
    }

    #[test]
    fn csv_headers_and_absent_cells() {
        let dir = tempfile::tempdir().unwrap();
        let report = SliceReport {
            axis: Axis::Axial,
            rows: vec![
                SliceRow {
                    axis: Axis::Axial,
                    slice_index: 0,
                    ms_ssim: None,
                    degenerate_flag: true,
                },
                SliceRow {
                    axis: Axis::Axial,
                    slice_index: 1,
                    ms_ssim: Some(0.1234567890123),
                    degenerate_flag: false,
                },
            ],
            mean: Some(0.1234567890123),
        };
        let p = dir.path().join("s.csv");
        write_slice_csv(&report, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "axis,slice_index,ms_ssim,degenerate_flag\naxial,0,,true\naxial,1,0.1234567890123,false\n"
        );
        let q = dir.path().join("subj.csv");
        write_subject_csv(
            &[SubjectRow {
                subject_id: "a".into(),
                ms_ssim_3d: Some(0.5),
                psnr_db: None,
                mmd: Some(0.0),
                issues: vec!["x".into()],
            }],
            &q,
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&q).unwrap(),
            "subject_id,ms_ssim_3d,psnr_db,mmd\na,0.5,,0.0\n"
        );
    }
}
