use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hetesn", version, about = "Echo state network speech experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (TOML with dotted keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides trials.master_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    pub log_level: LogLevel,

    /// Config override `key=value`; repeatable, applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset manifest; overrides data.manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute LHCB features for WAV files and write a feature manifest.
    Extract {
        /// A directory of `.wav` files with `<stem>.lab` labels, or a manifest.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Train one model on the training split and save it (default model.esnm).
    Train {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Score on the test split: a saved model, or fresh seed-averaged trials.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Evaluate this model instead of training new ones.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Grid search over the config's `grid.*` axes, scored on validation.
    Grid {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Memory capacity of the configured reservoir.
    BenchMc {
        /// Input sequence length.
        #[arg(long, default_value_t = 4000)]
        length: usize,
        /// Largest lag K.
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        /// Smallest lag included in the summed score.
        #[arg(long, default_value_t = 1)]
        min_lag: usize,
        /// Compare a homogeneous shallow reservoir with a heterogeneous one
        /// using these sub-group delays, e.g. `0,2,4`.
        #[arg(long, value_delimiter = ',')]
        compare_delays: Option<Vec<usize>>,
        /// Write the seed-averaged per-lag curve here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Seed-averaged frame recognition on the synthetic AR(2) task.
    BenchSynth {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 800)]
        train_frames: usize,
        #[arg(long, default_value_t = 200)]
        test_frames: usize,
        /// Seed of the generator parameters and data.
        #[arg(long, default_value_t = 2024)]
        task_seed: u64,
    },
    /// Describe a model container, feature file or manifest.
    Inspect { path: PathBuf },
}
