mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use firecast_core::dataset::{AoiSpec, LabelMode};
use firecast_core::models::Variant;

use crate::config::RunConfig;
use crate::error::CliError;

/// Forest-fire simulation and single-agent fire forecasting.
#[derive(Debug, Parser)]
#[command(name = "firecast", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (1 = deterministic single-threaded mode).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run fire simulations and write trajectories plus a summary.
    Simulate {
        #[command(flatten)]
        sim: SimFlags,
        /// Number of runs.
        #[arg(long)]
        sims: Option<usize>,
        /// Write every frame as a PPM image.
        #[arg(long)]
        export_frames: bool,
    },
    /// Generate chunked train/test datasets.
    Dataset {
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long)]
        train_sims: Option<usize>,
        #[arg(long)]
        test_sims: Option<usize>,
        #[arg(long)]
        max_chunks_per_sim: Option<usize>,
        #[arg(long)]
        label_mode: Option<LabelArg>,
    },
    /// Train a forecaster on a generated dataset.
    Train {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score a checkpoint (or the label oracle) per window.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Use the ground-truth labels as scores.
        #[arg(long)]
        oracle: bool,
        /// Dataset split to score.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        aoi: Option<AoiSpec>,
        #[arg(long)]
        label_mode: Option<LabelArg>,
    },
    /// Report parameter and activation counts against the reference budgets.
    Cost {
        /// Use the 251x251 calibrated architectures.
        #[arg(long)]
        paper_scale: bool,
        /// Model profile when not at paper scale.
        #[arg(long)]
        profile: Option<String>,
    },
}

#[derive(Debug, Default, Args)]
struct SimFlags {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Tree density in percent.
    #[arg(long)]
    density: Option<f64>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Debug, Args)]
struct ModelFlags {
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Debug, Args)]
struct TrainFlags {
    /// Dataset root holding `train/` and `test/`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// AOI as `x,y`.
    #[arg(long)]
    aoi: Option<AoiSpec>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    label_mode: Option<LabelArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelArg {
    Instantaneous,
    Latched,
}

impl From<LabelArg> for LabelMode {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Instantaneous => LabelMode::Instantaneous,
            LabelArg::Latched => LabelMode::Latched,
        }
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl SimFlags {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.sim.width, self.width);
        set(&mut cfg.sim.height, self.height);
        set(&mut cfg.sim.density, self.density);
        set(&mut cfg.sim.rng_seed, self.seed);
        set(&mut cfg.sim.max_steps, self.max_steps);
    }
}

/// Applies flags on top of the loaded configuration.
fn resolve(cli: Cli) -> Result<(RunConfig, Command), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    set(&mut cfg.paths.out, cli.out);
    set(&mut cfg.threads, cli.threads);
    let mut command = cli.command;
    match &mut command {
        Command::Simulate {
            sim,
            sims,
            export_frames,
        } => {
            std::mem::take(sim).apply(&mut cfg);
            set(&mut cfg.simulate.sims, *sims);
            cfg.simulate.export_frames |= *export_frames;
        }
        Command::Dataset {
            sim,
            train_sims,
            test_sims,
            max_chunks_per_sim,
            label_mode,
        } => {
            std::mem::take(sim).apply(&mut cfg);
            set(&mut cfg.dataset.train_sims, *train_sims);
            set(&mut cfg.dataset.test_sims, *test_sims);
            if max_chunks_per_sim.is_some() {
                cfg.dataset.max_chunks_per_sim = *max_chunks_per_sim;
            }
            set(&mut cfg.dataset.label_mode, label_mode.map(Into::into));
        }
        Command::Train { model, train } => {
            set(&mut cfg.model.profile, model.profile.take());
            set(&mut cfg.model.variant, model.variant);
            if train.data.is_some() {
                cfg.paths.data = train.data.take();
            }
            if train.aoi.is_some() {
                cfg.train.aoi = train.aoi;
            }
            set(&mut cfg.train.epochs, train.epochs);
            set(&mut cfg.train.lr, train.lr);
            set(&mut cfg.train.batch_size, train.batch_size);
            set(&mut cfg.train.seed, train.seed);
            set(&mut cfg.train.label_mode, train.label_mode.map(Into::into));
        }
        Command::Eval {
            data,
            checkpoint,
            oracle,
            split,
            aoi,
            label_mode,
        } => {
            if data.is_some() {
                cfg.paths.data = data.take();
            }
            if checkpoint.is_some() {
                cfg.eval.checkpoint = checkpoint.take();
            }
            cfg.eval.oracle |= *oracle;
            if split.is_some() {
                cfg.eval.split = split.take();
            }
            if aoi.is_some() {
                cfg.train.aoi = *aoi;
            }
            set(&mut cfg.train.label_mode, label_mode.map(Into::into));
        }
        Command::Cost {
            paper_scale,
            profile,
        } => {
            set(&mut cfg.model.profile, profile.take());
            if *paper_scale {
                cfg.model.profile = "paper".into();
            }
        }
    }
    cfg.validate()?;
    Ok((cfg, command))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, command) = resolve(cli)?;
    match command {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Dataset { .. } => commands::dataset(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Eval { .. } => commands::eval(&cfg),
        Command::Cost { .. } => commands::cost(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
