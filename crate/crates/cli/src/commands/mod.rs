pub mod evaluate;
pub mod phantom;
pub mod train;
pub mod translate;
pub mod verify;

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use ddbridge_core::data::{read_manifest, Direction, ManifestRow, Split};

use crate::failure::usage;
use crate::Context;

/// Manifest rows of one split together with the directory they are
/// relative to.
pub(crate) struct SplitRows {
    pub base: PathBuf,
    pub rows: Vec<ManifestRow>,
}

pub(crate) fn split_rows(ctx: &Context, split: Split) -> anyhow::Result<SplitRows> {
    let path = ctx.config.manifest().map_err(|e| usage(format!("{e:#}")))?;
    let rows = read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let rows = rows.into_iter().filter(|r| r.split == split).collect();
    Ok(SplitRows { base, rows })
}

pub(crate) fn output_dir(ctx: &Context) -> anyhow::Result<PathBuf> {
    let dir = ctx.config.output_dir().map_err(|e| usage(format!("{e:#}")))?.to_path_buf();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub(crate) fn direction(ctx: &Context, flag: Option<Direction>) -> Direction {
    flag.unwrap_or(ctx.config.task.direction)
}

pub(crate) fn synthetic_path(out: &Path, id: &str) -> PathBuf {
    out.join("synthetic").join(format!("{id}_synthetic.bvol"))
}
