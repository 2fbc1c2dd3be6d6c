//! Experiment orchestration: configuration, seeding, the command surface,
//! and metrics persistence. Exit codes: 0 success, 2 config error, 3 I/O
//! error, 4 numeric failure.

pub mod commands;
pub mod config;
pub mod metrics;

use std::path::PathBuf;

use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Numeric(_) => 4,
        }
    }
}

/// A parsed CLI invocation, decoupled from the argument parser so commands
/// can be driven programmatically (and deterministically) from tests.
#[derive(Debug, Clone)]
pub enum Invocation {
    Train {
        config: Option<PathBuf>,
        seed: Option<u64>,
        out: PathBuf,
        episodes: Option<usize>,
    },
    Eval {
        config: Option<PathBuf>,
        seed: Option<u64>,
        out: PathBuf,
        policy: String,
        episodes: Option<usize>,
    },
    SweepMu {
        config: Option<PathBuf>,
        seed: Option<u64>,
        out: PathBuf,
    },
    SweepDc {
        config: Option<PathBuf>,
        seed: Option<u64>,
        out: PathBuf,
        episodes: Option<usize>,
    },
    Oracle {
        config: Option<PathBuf>,
        seed: Option<u64>,
        out: PathBuf,
    },
    Summarize {
        files: Vec<PathBuf>,
        out: PathBuf,
    },
}

fn load_config(
    path: &Option<PathBuf>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::load(path.as_deref())?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    Ok(config)
}

/// Runs one command to completion.
pub fn run(invocation: Invocation) -> Result<(), HarnessError> {
    match invocation {
        Invocation::Train {
            config,
            seed,
            out,
            episodes,
        } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(episodes) = episodes {
                cfg.learner.episodes = episodes;
            }
            commands::cmd_train(&cfg, &out)
        }
        Invocation::Eval {
            config,
            seed,
            out,
            policy,
            episodes,
        } => {
            let cfg = load_config(&config, seed)?;
            let episodes = episodes.unwrap_or(cfg.run.eval_episodes);
            if policy != "sarad" {
                // Validate the tag up front so typos exit with a config error.
                crate::baselines::PolicyKind::parse(&policy)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            }
            commands::cmd_eval(&cfg, &out, &policy, episodes)
        }
        Invocation::SweepMu { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            commands::cmd_sweep_mu(&cfg, &out)
        }
        Invocation::SweepDc {
            config,
            seed,
            out,
            episodes,
        } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(episodes) = episodes {
                cfg.run.eval_episodes = episodes;
            }
            commands::cmd_sweep_dc(&cfg, &out)
        }
        Invocation::Oracle { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            commands::cmd_oracle(&cfg, &out)
        }
        Invocation::Summarize { files, out } => commands::cmd_summarize(&files, &out),
    }
}
