//! `lcr`: batch pipelines for similarity-sensitive dataset diversity.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data and integrity
//! errors, 3 for numeric-domain errors.

mod commands;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcr_core::diversity::Order;
use lcr_core::Error;

#[derive(Parser, Debug)]
#[command(name = "lcr", version, about = "Similarity-sensitive diversity of labeled image datasets")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Upper bound on worker threads. Outputs do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,

    /// Directory holding similarity caches.
    #[arg(long, global = true, default_value = ".lcr-cache")]
    pub cache_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute (or reuse) the pairwise similarity cache of a dataset.
    Similarity {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compute the 30-feature table for a subsets file or the whole dataset.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        /// Subsets JSONL; without it one `full` row is written.
        #[arg(long)]
        subsets: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Replace the similarity matrix by the identity (testing aid).
        #[arg(long, hide = true)]
        identity_z: bool,
    },
    /// Draw class-composition subsets binned by class balance.
    Sample {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 25)]
        bins: usize,
        #[arg(long, default_value_t = 4)]
        per_bin: usize,
        #[arg(long, default_value_t = 10_000)]
        pool: usize,
        /// Add size 2048 to the default sizes.
        #[arg(long)]
        include_2048: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score subsets with the distance-weighted k-NN proxy on a test set.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        test_manifest: PathBuf,
        #[arg(long)]
        subsets: Option<PathBuf>,
        #[arg(long, default_value_t = lcr_core::analysis::DEFAULT_K)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regress performance on every feature set up to the given arity.
    Regress {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        performance: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=3))]
        max_arity: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
        /// Rows per metric and arity in the printed summary.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Diversity profile of the whole dataset over a list of orders.
    Profile {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,inf")]
        q: Vec<Order>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic template dataset with a held-out test split.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 500)]
        per_class: usize,
        #[arg(long, default_value_t = 8)]
        templates: usize,
        #[arg(long, default_value_t = 16)]
        side: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 40)]
        test_per_class: usize,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::UndefinedR2 { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
