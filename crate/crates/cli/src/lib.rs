//! Command-line front end: file formats, commands and exit codes.
//!
//! Exit codes: 0 success or valid, 1 a negative answer (infeasible schedule,
//! invalid strategy, failed self-check), 2 bad input, 3 a resource cap.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub mod commands;
pub mod format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("resource cap: {0}")]
    Cap(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Cap(_) => 3,
        }
    }
}

/// What a command produced. `stdout` holds the emitted document unless it
/// went to `-o`; `stderr` holds the summary and any trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug, Parser)]
#[command(
    name = "cstree",
    version,
    about = "Connected search of weighted trees and time-dependent scheduling"
)]
pub struct Cli {
    /// Print the per-move `i:c+g` ledger of every strategy produced or checked.
    #[arg(long, global = true)]
    pub trace: bool,
    /// Worker threads for brute-force sweeps and multi-root solves.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Write the document here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal connected search strategy.
    Solve {
        tree: PathBuf,
        /// Minimise over all starting vertices.
        #[arg(long, conflicts_with = "root")]
        unrooted: bool,
        /// Start here instead of at the file's root.
        #[arg(long)]
        root: Option<usize>,
        /// Raise the budget one searcher at a time.
        #[arg(long)]
        naive_k: bool,
        #[arg(long, default_value_t = 8)]
        max_degree: usize,
        /// Skip child orders that only permute isomorphic siblings.
        #[arg(long)]
        dedup: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Exhaustive reference answer for small trees.
    Oracle {
        tree: PathBuf,
        #[arg(long, conflicts_with = "root")]
        unrooted: bool,
        #[arg(long)]
        root: Option<usize>,
        #[arg(long, default_value_t = cstree::oracle::DEFAULT_MAX_EDGES)]
        max_edges: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check a strategy against a budget.
    Verify {
        tree: PathBuf,
        strategy: PathBuf,
        /// Budget; defaults to the strategy file's `k`.
        #[arg(long)]
        k: Option<u64>,
    },
    /// Generate reduction instances.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        input: PathBuf,
        /// Rooted budget for `gadget-unrooted`; computed when absent.
        #[arg(long)]
        k: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Simulate a schedule, or sweep every order with `--brute`.
    Schedule {
        tds: PathBuf,
        /// Comma-separated task ids; file order when absent.
        #[arg(long, value_delimiter = ',', conflicts_with = "brute")]
        order: Option<Vec<u64>>,
        #[arg(long)]
        brute: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Move between schedules and strategies on the reduction tree.
    Translate {
        #[arg(value_enum)]
        direction: Direction,
        tds: PathBuf,
        /// The schedule or strategy file to translate.
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Apply the weight normalisations.
    Transform {
        tree: PathBuf,
        #[arg(long, value_enum, default_value_t = Stage::Normalize)]
        stage: Stage,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    #[value(name = "3p-to-tds")]
    ThreePartitionToTds,
    TdsToTree,
    GadgetUnrooted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    ScheduleToStrategy,
    StrategyToSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Leaves,
    Lift,
    Subdivide,
    Normalize,
}

/// Runs a parsed command line. Errors carry their exit code.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Input("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli))
}
