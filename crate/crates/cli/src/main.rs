use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use podpo_cli::config::RunConfig;
use podpo_cli::{diag, gradcheck, run};

/// PODPO training, evaluation and diagnostics.
#[derive(Parser)]
#[command(name = "podpo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy; writes config.json, metrics.csv and checkpoints.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: $PODPO_OUT_DIR/<algorithm>_<env>_seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config overrides: `--key value`, `--flag`, `--no-flag`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Greedy rollouts of a checkpoint; prints the mean return.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Run config (default: config.json next to the checkpoint).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Drifting-field diagnostics: equilibrium, variance compression, temperature sweep.
    Diag {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also diagnose the candidate sets of this generative-actor checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Finite-difference checks of every analytic gradient.
    GradCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt_backward: bool,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train {
            config,
            out,
            overrides,
        } => {
            let cfg = RunConfig::load(config.as_deref(), &overrides)?;
            let dir = out.unwrap_or_else(|| run::default_run_dir(&cfg.train));
            let a = run::run_train(&cfg, &dir)?;
            println!("metrics: {}", a.metrics.display());
            println!(
                "checkpoint: {}",
                a.checkpoints.last().expect("final checkpoint").display()
            );
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
        } => {
            if !checkpoint.is_file() {
                bail!("checkpoint {} does not exist", checkpoint.display());
            }
            let config = config.unwrap_or_else(|| checkpoint.with_file_name("config.json"));
            let cfg = RunConfig::load(Some(&config), &[])?;
            let t = run::load_trainer(&cfg, &checkpoint)?;
            let returns = run::greedy_returns(&t, episodes, cfg.train.seed)?;
            let mean = returns.iter().sum::<f64>() / returns.len() as f64;
            println!("episodes = {episodes}\nmean_return = {mean}");
        }
        Command::Diag {
            config,
            checkpoint,
            out,
            overrides,
        } => {
            let cfg = RunConfig::load(config.as_deref(), &overrides)?;
            let seed = cfg.train.seed;
            let eq = diag::equilibrium_check(seed)?;
            let mm = diag::mismatch_check(seed, &cfg.train.temps)?;
            let policy = match checkpoint {
                Some(p) => {
                    let mut t = run::load_trainer(&cfg, &p)?;
                    Some(diag::policy_diagnostics(&mut t, 256)?)
                }
                None => None,
            };
            let report = diag::render_report(seed, &eq, &mm, policy.as_ref());
            print!("{report}");
            if let Some(p) = out {
                fs::write(&p, &report).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::GradCheck {
            config,
            corrupt_backward,
            overrides,
        } => {
            let cfg = RunConfig::load(config.as_deref(), &overrides)?;
            let reports = gradcheck::run(&cfg.train, corrupt_backward)?;
            print!("{}", gradcheck::render(&reports));
            if reports.iter().any(|r| !r.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
