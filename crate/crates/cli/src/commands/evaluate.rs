use anyhow::Context as _;
use ddbridge_core::data::{crop_center, read_volume, Axis, Direction, Split, Volume};
use ddbridge_core::metrics::{slice_report, subject_report, write_slice_csv, write_subject_csv, SubjectRow};
use rayon::prelude::*;

use super::{direction, output_dir, split_rows, synthetic_path};
use crate::failure::data;
use crate::Context;

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Scores every test subject that has a synthetic volume. Writes one
/// slice CSV per axis and subject plus `subjects.csv` under `<out>/eval`,
/// and prints the per-axis slice means and the cohort means on stdout.
pub fn run(ctx: &Context, flag: Option<Direction>) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let direction = direction(ctx, flag);
    let split = split_rows(ctx, Split::Test)?;
    let out = output_dir(ctx)?;
    let eval_dir = out.join("eval");
    std::fs::create_dir_all(&eval_dir)?;

    let mut subjects: Vec<(String, Volume, Volume)> = Vec::new();
    for row in &split.rows {
        let path = synthetic_path(&out, &row.subject_id);
        if !path.exists() {
            eprintln!("warning: no synthetic volume for {}, skipping", row.subject_id);
            continue;
        }
        let (t1, fa) = row.load(&split.base).with_context(|| format!("loading {}", row.subject_id))?;
        let (real, _) = direction.orient(t1, fa);
        let mut synthetic = read_volume(&path)?;
        if synthetic.shape() != real.shape() {
            synthetic = crop_center(&synthetic, real.shape())
                .with_context(|| format!("matching {} to the real volume", path.display()))?;
        }
        subjects.push((row.subject_id.clone(), real, synthetic));
    }
    if subjects.is_empty() {
        return Err(data("no test subject has a synthetic volume; run translate first"));
    }

    let ssim_cfg = &cfg.metrics.ms_ssim;
    let slice_lines = subjects
        .par_iter()
        .map(|(id, real, synthetic)| -> anyhow::Result<Vec<String>> {
            let mut lines = Vec::new();
            for axis in Axis::ALL {
                let report = slice_report(real, synthetic, axis, ssim_cfg)?;
                write_slice_csv(&report, eval_dir.join(format!("{id}_slices_{axis}.csv")))?;
                lines.push(format!("slice_mu {id} {axis} {}", show(report.mean)));
            }
            Ok(lines)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    for line in slice_lines.into_iter().flatten() {
        println!("{line}");
    }

    let rows: Vec<SubjectRow> = subject_report(&subjects, ssim_cfg, &cfg.metrics.mmd)?;
    for row in &rows {
        for issue in &row.issues {
            eprintln!("warning: {}: {issue}", row.subject_id);
        }
    }
    write_subject_csv(&rows, eval_dir.join("subjects.csv"))?;
    println!("subjects {}", rows.len());
    println!("mean_ms_ssim_3d {}", show(mean(rows.iter().map(|r| r.ms_ssim_3d))));
    println!("mean_psnr_db {}", show(mean(rows.iter().map(|r| r.psnr_db))));
    println!("mean_mmd {}", show(mean(rows.iter().map(|r| r.mmd))));
    Ok(())
}
