//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use saradc::harness::{self, Invocation};

#[derive(Parser)]
#[command(
    name = "saradc",
    about = "Semantic-aware resource allocation simulator for 5G-V2X HetNets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the PPO policy; writes a checkpoint and a reward log.
    Train {
        /// Config file (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Training episodes, overriding the config.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a frozen policy or baseline; writes per-step metrics.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// One of: sarad, random_all, fixed_dc, random_dc, bit_based.
        #[arg(long, default_value = "sarad")]
        policy: String,
        /// Evaluation episodes, overriding the config.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Spectral efficiency vs bits-per-word for semantic and bit scoring.
    SweepMu {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Total semantic throughput under flexible, fixed, and random duty
    /// cycles on the same seeds.
    SweepDc {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Evaluation episodes per duty-cycle mode.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Exhaustive single-step upper bound on a frozen snapshot.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Reduce metrics files to per-policy summary tables.
    Summarize {
        /// Metrics or sweep CSV files.
        files: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let invocation = match cli.command {
        Command::Train {
            config,
            seed,
            out,
            episodes,
        } => Invocation::Train {
            config,
            seed,
            out,
            episodes,
        },
        Command::Eval {
            config,
            seed,
            out,
            policy,
            episodes,
        } => Invocation::Eval {
            config,
            seed,
            out,
            policy,
            episodes,
        },
        Command::SweepMu { config, seed, out } => Invocation::SweepMu { config, seed, out },
        Command::SweepDc {
            config,
            seed,
            out,
            episodes,
        } => Invocation::SweepDc {
            config,
            seed,
            out,
            episodes,
        },
        Command::Oracle { config, seed, out } => Invocation::Oracle { config, seed, out },
        Command::Summarize { files, out } => Invocation::Summarize { files, out },
    };
    match harness::run(invocation) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
