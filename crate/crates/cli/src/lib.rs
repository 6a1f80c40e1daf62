//! The `ddbridge` command-line tool.
//!
//! Subcommands: `phantom`, `train`, `translate`, `evaluate` and `verify`.
//! Global flags `--config`, `--seed`, `--out` and `--quiet` apply to all
//! of them. Exit codes follow [`failure`].

pub mod commands;
pub mod config;
pub mod failure;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ddbridge_core::data::Direction;

pub use config::RunConfig;
use failure::{classify, IntoUsage, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "ddbridge", version, about = "Diffusion bridge translation between paired volumetric modalities")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Suppresses progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes paired phantom volumes and a split manifest.
    Phantom {
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Extents as `X,Y,Z`.
        #[arg(long, default_value = "32,32,32", value_parser = parse_shape)]
        shape: [usize; 3],
    },
    /// Trains the denoiser on the manifest's training split.
    Train,
    /// Translates the test split with a trained model.
    Translate {
        #[arg(long)]
        direction: Option<Direction>,
    },
    /// Scores synthetic test volumes against the real ones.
    Evaluate {
        #[arg(long)]
        direction: Option<Direction>,
    },
    /// Runs the built-in invariant suite.
    Verify {
        /// Negative control: evaluate the boundary check on a schedule
        /// with a broken endpoint.
        #[arg(long, hide = true)]
        break_gamma_endpoint: bool,
    },
}

fn parse_shape(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated extents, got `{s}`"));
    }
    let mut out = [0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a positive integer"))?;
        if *slot == 0 {
            return Err("extents must be positive".into());
        }
    }
    Ok(out)
}

/// Shared state handed to every command.
pub struct Context {
    pub config: RunConfig,
    pub quiet: bool,
    pub seed_override: Option<u64>,
    pub out_override: Option<PathBuf>,
}

impl Context {
    pub fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn build_context(cli: &Cli) -> anyhow::Result<Context> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).into_usage()?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.paths.output_dir = Some(out.clone());
    }
    Ok(Context {
        config,
        quiet: cli.quiet,
        seed_override: cli.seed,
        out_override: cli.out.clone(),
    })
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let ctx = build_context(&cli)?;
    match cli.command {
        Command::Phantom { count, shape } => commands::phantom::run(&ctx, count, shape),
        Command::Train => commands::train::run(&ctx),
        Command::Translate { direction } => commands::translate::run(&ctx, direction),
        Command::Evaluate { direction } => commands::evaluate::run(&ctx, direction),
        Command::Verify { break_gamma_endpoint } => commands::verify::run(&ctx, break_gamma_endpoint),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify(&e).exit_code()
        }
    }
}
