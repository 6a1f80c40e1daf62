use anyhow::Context as _;
use ddbridge_core::data::{phantom_pair, split_indices, write_manifest, write_volume, ManifestRow, Split, DEFAULT_SPLIT_RATIOS};
use rayon::prelude::*;

use crate::failure::usage;
use crate::Context;

/// Writes `count` phantom pairs and `manifest.csv` into the output
/// directory. Subject `i` uses phantom seed `seed + i`; the split is drawn
/// with `seed`.
pub fn run(ctx: &Context, count: usize, shape: [usize; 3]) -> anyhow::Result<()> {
    if count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let dir = match (&ctx.out_override, &ctx.config.paths.manifest) {
        (Some(out), _) => out.clone(),
        (None, Some(m)) => m.parent().map(|p| p.to_path_buf()).unwrap_or_default(),
        (None, None) => return Err(usage("phantom needs --out or paths.manifest")),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let seed = ctx.seed_override.unwrap_or(ctx.config.train.seed);

    let parts = split_indices(count, DEFAULT_SPLIT_RATIOS, seed)?;
    let mut split_of = vec![Split::Train; count];
    for (part, split) in parts.iter().zip(Split::ALL) {
        for &i in part {
            split_of[i] = split;
        }
    }

    let rows = (0..count)
        .into_par_iter()
        .map(|i| -> anyhow::Result<ManifestRow> {
            let id = format!("sub-{i:03}");
            let (t1, fa) = phantom_pair(seed.wrapping_add(i as u64), shape)?;
            let t1_name = format!("{id}_t1.bvol");
            let fa_name = format!("{id}_fa.bvol");
            write_volume(&t1, dir.join(&t1_name))?;
            write_volume(&fa, dir.join(&fa_name))?;
            Ok(ManifestRow {
                subject_id: id,
                t1_path: t1_name.into(),
                fa_path: fa_name.into(),
                split: split_of[i],
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let manifest = dir.join("manifest.csv");
    write_manifest(&rows, &manifest)?;
    ctx.progress(format!(
        "wrote {count} phantom pairs ({} train, {} val, {} test) to {}",
        parts[0].len(),
        parts[1].len(),
        parts[2].len(),
        manifest.display()
    ));
    Ok(())
}
