//! The TOML run configuration.
//!
//! ```toml
//! [schedule]
//! gamma_max = 0.125
//! schedule_form = "linear"
//!
//! [train]
//! learning_rate = 5e-5
//! batch_size = 8
//! steps = 1000
//! seed = 0
//!
//! [sample]
//! steps = 40
//! eta = 0.0
//!
//! [metrics.ms_ssim]
//! window = 7
//!
//! [task]
//! direction = "t1-to-fa"
//!
//! [paths]
//! manifest = "data/manifest.csv"
//! output_dir = "out"
//! ```
//!
//! Every section and key is optional. Relative paths are resolved against
//! the directory of the config file.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use ddbridge_core::data::Direction;
use ddbridge_core::{BridgeSchedule, MmdConfig, MsSsimConfig, SamplerConfig, ScheduleForm, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub gamma_max: f64,
    pub schedule_form: ScheduleForm,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = BridgeSchedule::default();
        Self {
            gamma_max: s.gamma_max(),
            schedule_form: s.form(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
    pub hidden_width: usize,
    /// Voxels drawn from each volume per step.
    pub chunks_per_item: usize,
    /// Block-averaging factor applied to training volumes.
    pub downsample: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            steps: t.steps,
            t_min: t.t_min,
            t_max: t.t_max,
            seed: t.seed,
            hidden_width: t.hidden_width,
            chunks_per_item: 256,
            downsample: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub steps: usize,
    pub eta: f64,
    pub seed: u64,
}

impl Default for SampleSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            steps: s.steps,
            eta: s.eta,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub ms_ssim: MsSsimConfig,
    pub mmd: MmdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub direction: Direction,
    /// Translation runs on volumes zero-padded to this shape; outputs are
    /// cropped back to the original extents.
    pub pad_to: Option<[usize; 3]>,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self {
            direction: Direction::T1ToFa,
            pad_to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub manifest: Option<PathBuf>,
    /// Defaults to `<output_dir>/model.json`.
    pub model: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: ScheduleSection,
    pub train: TrainSection,
    pub sample: SampleSection,
    pub metrics: MetricsSection,
    pub task: TaskSection,
    pub paths: PathsSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.paths.manifest, &mut cfg.paths.model, &mut cfg.paths.output_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.schedule()?;
        self.train_config().validate()?;
        self.sampler_config().validate()?;
        self.metrics.ms_ssim.validate()?;
        self.metrics.mmd.validate()?;
        ensure!(self.train.downsample >= 1, "train.downsample must be at least 1");
        ensure!(self.train.chunks_per_item >= 1, "train.chunks_per_item must be at least 1");
        if let Some(p) = self.task.pad_to {
            ensure!(!p.contains(&0), "task.pad_to extents must be positive");
        }
        Ok(())
    }

    pub fn schedule(&self) -> anyhow::Result<BridgeSchedule> {
        Ok(BridgeSchedule::new(self.schedule.gamma_max, self.schedule.schedule_form)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            steps: t.steps,
            t_min: t.t_min,
            t_max: t.t_max,
            seed: t.seed,
            hidden_width: t.hidden_width,
            chunk: Some(1),
            chunks_per_item: Some(t.chunks_per_item),
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            steps: self.sample.steps,
            eta: self.sample.eta,
            seed: self.sample.seed,
            ..SamplerConfig::default()
        }
    }

    /// Applies the `--seed` override to every seeded section.
    pub fn override_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.sample.seed = seed;
    }

    pub fn output_dir(&self) -> anyhow::Result<&Path> {
        self.paths
            .output_dir
            .as_deref()
            .context("no output directory: set paths.output_dir or pass --out")
    }

    pub fn manifest(&self) -> anyhow::Result<&Path> {
        self.paths.manifest.as_deref().context("no manifest: set paths.manifest")
    }

    pub fn model_path(&self) -> anyhow::Result<PathBuf> {
        match &self.paths.model {
            Some(p) => Ok(p.clone()),
            None => Ok(self.output_dir()?.join("model.json")),
        }
    }
}
