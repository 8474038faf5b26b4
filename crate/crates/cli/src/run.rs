use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use podpo_core::envs::EnvSet;
use podpo_core::tensor::Matrix;
use podpo_core::trainer::{MetricsRow, PolicyState, TrainConfig, Trainer};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::metrics::MetricsWriter;

/// Root directory for run outputs when `--out` is not given.
pub const OUT_DIR_ENV: &str = "PODPO_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub metrics: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

fn algorithm_name(cfg: &TrainConfig) -> String {
    serde_json::to_value(cfg.algorithm)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_else(|| "run".to_owned())
}

/// `$PODPO_OUT_DIR/<algorithm>_<env>_seed<seed>`, with `runs` as the default root.
pub fn default_run_dir(cfg: &TrainConfig) -> PathBuf {
    let root = env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(format!(
        "{}_{}_seed{}",
        algorithm_name(cfg),
        cfg.env.name(),
        cfg.seed
    ))
}

pub fn checkpoint_path(dir: &Path, iteration: Option<usize>) -> PathBuf {
    match iteration {
        Some(i) => dir.join(format!("checkpoint_{i:06}.bin")),
        None => dir.join("checkpoint_final.bin"),
    }
}

/// Writes the config snapshot, then trains, appending one metrics row per
/// iteration and saving checkpoints on the configured interval and at the end.
pub fn run_train(cfg: &RunConfig, dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let config_path = dir.join("config.json");
    fs::write(&config_path, cfg.to_json())?;
    let metrics_path = dir.join("metrics.csv");
    let mut writer = MetricsWriter::create(&metrics_path)?;
    let mut trainer = Trainer::new(cfg.train.clone())?;
    let mut checkpoints = Vec::new();
    let mut last: Option<MetricsRow> = None;

    for i in 0..cfg.train.iterations {
        let start = Instant::now();
        let mut row = match trainer.train_iteration() {
            Ok(row) => row,
            Err(e) => {
                let dump = last
                    .as_ref()
                    .map_or_else(|| "none".to_owned(), |r| format!("{r:?}"));
                eprintln!("iteration {i} aborted; last metrics row: {dump}");
                return Err(e).with_context(|| format!("training iteration {i}"));
            }
        };
        if cfg.options.record_wall_time {
            row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        writer.append(&row)?;
        last = Some(row);
        let done = i + 1;
        let every = cfg.options.checkpoint_interval;
        if every > 0 && done % every == 0 && done < cfg.train.iterations {
            let p = checkpoint_path(dir, Some(done));
            checkpoint::save(&trainer, &p)?;
            checkpoints.push(p);
        }
    }
    let p = checkpoint_path(dir, None);
    checkpoint::save(&trainer, &p)?;
    checkpoints.push(p);
    Ok(RunArtifacts {
        dir: dir.to_owned(),
        config: config_path,
        metrics: metrics_path,
        checkpoints,
    })
}

/// Rebuilds the trainer described by `cfg` and loads `path` into it.
pub fn load_trainer(cfg: &RunConfig, path: &Path) -> Result<Trainer> {
    let mut t = Trainer::new(cfg.train.clone())?;
    checkpoint::load_into(&mut t, path).with_context(|| format!("loading {}", path.display()))?;
    Ok(t)
}

/// Noise-free actions: zero noise for the generative actor, the mean for the
/// Gaussian baseline.
pub fn greedy_actions(policy: &PolicyState, obs: &Matrix) -> Result<Matrix> {
    Ok(match policy {
        PolicyState::Podpo { actor, .. } => {
            actor.generate_action(obs, &Matrix::zeros(obs.rows(), actor.noise_dim))?
        }
        PolicyState::Baseline { actor, .. } => actor.mean(obs)?,
    })
}

/// Returns of `episodes` greedy episodes, one per environment instance.
pub fn greedy_returns(trainer: &Trainer, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let cfg = &trainer.config;
    let mut envs = EnvSet::new(cfg.env, &cfg.env_params, episodes, seed);
    let mut returns = Vec::with_capacity(episodes);
    while returns.len() < episodes {
        let actions = greedy_actions(&trainer.policy, envs.obs())?;
        envs.step(&actions)?;
        returns.extend(envs.take_finished_returns());
    }
    returns.truncate(episodes);
    Ok(returns)
}
