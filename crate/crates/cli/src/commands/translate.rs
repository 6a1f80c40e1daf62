use anyhow::Context as _;
use ddbridge_core::data::{crop_center, write_volume, zero_pad, Direction, Split, Volume};
use ddbridge_core::denoiser::load_model;
use ddbridge_core::rng::for_subject;
use ddbridge_core::sampler::sample;
use rayon::prelude::*;

use super::{direction, output_dir, split_rows, synthetic_path};
use crate::failure::{data, usage};
use crate::Context;

pub fn run(ctx: &Context, flag: Option<Direction>) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let direction = direction(ctx, flag);
    let model_path = cfg.model_path()?;
    if !model_path.exists() {
        return Err(data(format!("no trained model at {}", model_path.display())));
    }
    let (model, tags) = load_model(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let sched = cfg.schedule()?;
    if model.schedule != sched {
        return Err(usage(format!(
            "model was trained with gamma_max {} ({:?}) but the config asks for {} ({:?})",
            model.schedule.gamma_max(),
            model.schedule.form(),
            sched.gamma_max(),
            sched.form()
        )));
    }
    if let Some(tag) = tags.get("direction") {
        if tag.parse::<Direction>().ok() != Some(direction) {
            return Err(usage(format!("model was trained for {tag}, not {direction}")));
        }
    }

    let split = split_rows(ctx, Split::Test)?;
    if split.rows.is_empty() {
        return Err(data("the manifest has no test subjects"));
    }
    let out = output_dir(ctx)?;
    std::fs::create_dir_all(out.join("synthetic"))?;
    let sampler = cfg.sampler_config();
    let pad_to = cfg.task.pad_to;

    split
        .rows
        .par_iter()
        .enumerate()
        .try_for_each(|(i, row)| -> anyhow::Result<()> {
            let (t1, fa) = row.load(&split.base).with_context(|| format!("loading {}", row.subject_id))?;
            let (_, source) = direction.orient(t1, fa);
            let shape = source.shape();
            let padded = match pad_to {
                Some(p) => zero_pad(&source, p)?,
                None => source,
            };
            let mut rng = for_subject(sampler.seed, i);
            let x = sample(&model, &padded.to_f64(), &sampler, &sched, &mut rng)
                .with_context(|| format!("sampling {}", row.subject_id))?;
            let clamped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let mut synthetic = crop_center(&Volume::from_f64(padded.shape(), &clamped)?, shape)?;
            synthetic.meta.subject_id = row.subject_id.clone();
            synthetic.meta.modality = Some(direction.target());
            let path = synthetic_path(&out, &row.subject_id);
            write_volume(&synthetic, &path)?;
            ctx.progress(format!("translated {} -> {}", row.subject_id, path.display()));
            Ok(())
        })
}
