use std::collections::BTreeMap;

use anyhow::Context as _;
use ddbridge_core::bridge::estimate_moments;
use ddbridge_core::data::{downsample, Split};
use ddbridge_core::denoiser::{save_model, train_with_progress};
use rayon::prelude::*;

use super::{output_dir, split_rows};
use crate::failure::data;
use crate::Context;

pub fn run(ctx: &Context) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let split = split_rows(ctx, Split::Train)?;
    if split.rows.is_empty() {
        return Err(data("the manifest has no training subjects"));
    }
    let direction = cfg.task.direction;
    let factor = cfg.train.downsample;
    let pairs = split
        .rows
        .par_iter()
        .map(|row| -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
            let (t1, fa) = row.load(&split.base).with_context(|| format!("loading {}", row.subject_id))?;
            let (x0, x1) = direction.orient(t1, fa);
            Ok((downsample(&x0, factor)?.to_f64(), downsample(&x1, factor)?.to_f64()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let sched = cfg.schedule()?;
    let moments = estimate_moments(&pairs)?;
    ctx.progress(format!(
        "training on {} subjects: s0^2={:.4} s1^2={:.4} s01={:.4}",
        pairs.len(),
        moments.sigma0_sq,
        moments.sigma1_sq,
        moments.sigma01
    ));
    let train_cfg = cfg.train_config();
    let every = (train_cfg.steps / 20).max(1);
    let outcome = train_with_progress(&pairs, &train_cfg, &sched, &moments, |step, loss| {
        if step % every == 0 || step + 1 == train_cfg.steps {
            ctx.progress(format!("step {step:>6} loss {loss:.6}"));
        }
    })?;

    let out = output_dir(ctx)?;
    let model_path = cfg.model_path()?;
    if let Some(parent) = model_path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let tags = BTreeMap::from([
        ("direction".to_string(), direction.to_string()),
        ("train_subjects".to_string(), pairs.len().to_string()),
        ("downsample".to_string(), factor.to_string()),
    ]);
    save_model(&outcome.model, tags, &model_path)?;

    let loss_path = out.join("train_loss.csv");
    let mut w = csv::Writer::from_path(&loss_path).with_context(|| format!("writing {}", loss_path.display()))?;
    w.write_record(["step", "loss"])?;
    for (step, loss) in outcome.losses.iter().enumerate() {
        w.write_record([step.to_string(), loss.to_string()])?;
    }
    w.flush()?;
    ctx.progress(format!("saved {} and {}", model_path.display(), loss_path.display()));
    Ok(())
}
