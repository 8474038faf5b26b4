//! Training configuration, per-iteration metrics and the training loops.
//!
//! [`Trainer`] owns every parameter, optimizer, environment and RNG stream of
//! a run. Each [`Trainer::train_iteration`] call performs one
//! collect → advantage → update pass and returns a [`MetricsRow`].

mod config;
mod losses;
mod podpo;
mod ppo;

use alloc::vec::Vec;

use crate::envs::{self, EnvSet};
use crate::nn::{AdamConfig, AdamState};
use crate::policy::{Critic, GaussianActor, GenerativeActor};
use crate::rng::{self, Rng, Stream};
use crate::Result;

pub use config::{Algorithm, TrainConfig};
pub use losses::{drifting_loss, ppo_surrogate_loss, value_loss_clipped, DriftWeighting};
pub use podpo::{drift_actor_gradient, positive_only_actor_gradient, DriftSettings, DriftStep};

/// Scalars describing one training iteration. `None` marks a column that does
/// not apply (e.g. the surrogate loss under PODPO).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsRow {
    pub iteration: usize,
    pub mean_episode_return: f64,
    pub frac_positive: f64,
    pub loss_drift: Option<f64>,
    pub loss_value: f64,
    pub loss_surrogate: Option<f64>,
    pub rv_total: Option<f64>,
    /// One entry per configured temperature (PODPO only).
    pub ess_ratio: Vec<f64>,
    pub max_p: Vec<f64>,
    /// Filled in by callers that measure time; the core never reads a clock.
    pub wall_ms: Option<f64>,
}

/// The policy being trained and its optimizer.
#[derive(Debug, Clone)]
pub enum PolicyState {
    Podpo {
        actor: GenerativeActor,
        opt: AdamState,
    },
    Baseline {
        actor: GaussianActor,
        opt: AdamState,
    },
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub envs: EnvSet,
    pub policy: PolicyState,
    pub critic: Critic,
    pub critic_opt: AdamState,
    iteration: usize,
    policy_rng: Rng,
    candidate_rng: Rng,
    minibatch_rng: Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let obs_dim = envs::obs_dim(config.env);
        let action_dim = envs::action_dim(config.env);
        let policy = match config.algorithm {
            Algorithm::Podpo => {
                let actor = GenerativeActor::init(
                    obs_dim,
                    config.noise_dim.unwrap_or(action_dim),
                    action_dim,
                    &config.hidden,
                    &mut rng::stream(seed, Stream::ActorInit),
                );
                let opt = AdamState::new(&actor, AdamConfig::with_lr(config.actor_lr));
                PolicyState::Podpo { actor, opt }
            }
            Algorithm::PpoBaseline => {
                let actor = GaussianActor::init(
                    obs_dim,
                    action_dim,
                    &config.hidden,
                    &mut rng::stream(seed, Stream::BaselineInit),
                );
                let opt = AdamState::new(&actor, AdamConfig::with_lr(config.actor_lr));
                PolicyState::Baseline { actor, opt }
            }
        };
        let critic = Critic::init(
            obs_dim,
            &config.hidden,
            &mut rng::stream(seed, Stream::CriticInit),
        );
        let critic_opt = AdamState::new(&critic, AdamConfig::with_lr(config.critic_lr));
        let envs = EnvSet::new(config.env, &config.env_params, config.num_envs, seed);
        Ok(Self {
            envs,
            policy,
            critic,
            critic_opt,
            iteration: 0,
            policy_rng: rng::stream(seed, Stream::Policy),
            candidate_rng: rng::stream(seed, Stream::Candidates),
            minibatch_rng: rng::stream(seed, Stream::Minibatch),
            config,
        })
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn train_iteration(&mut self) -> Result<MetricsRow> {
        let row = match &mut self.policy {
            PolicyState::Podpo { actor, opt } => podpo::iteration(
                &self.config,
                self.iteration,
                &mut self.envs,
                actor,
                opt,
                &mut self.critic,
                &mut self.critic_opt,
                podpo::Streams {
                    policy: &mut self.policy_rng,
                    candidates: &mut self.candidate_rng,
                    minibatch: &mut self.minibatch_rng,
                },
            )?,
            PolicyState::Baseline { actor, opt } => ppo::iteration(
                &self.config,
                self.iteration,
                &mut self.envs,
                actor,
                opt,
                &mut self.critic,
                &mut self.critic_opt,
                &mut self.policy_rng,
                &mut self.minibatch_rng,
            )?,
        };
        self.iteration += 1;
        Ok(row)
    }

    /// Runs `n` iterations, collecting their metrics.
    pub fn run(&mut self, n: usize) -> Result<Vec<MetricsRow>> {
        (0..n).map(|_| self.train_iteration()).collect()
    }
}

/// Splits `0..len` (already permuted in `perm`) into `parts` nearly equal chunks.
pub(crate) fn chunk(perm: &[usize], parts: usize, i: usize) -> &[usize] {
    let len = perm.len();
    &perm[i * len / parts..(i + 1) * len / parts]
}

pub(crate) fn mean_or(values: &[f64], fallback: f64) -> f64 {
    if values.is_empty() {
        fallback
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Mean finished-episode return, or the mean per-env reward sum of the
/// rollout when no episode finished inside it.
pub(crate) fn episode_return(traj: &crate::rollout::Trajectory) -> f64 {
    if !traj.episode_returns.is_empty() {
        return mean_or(&traj.episode_returns, 0.0);
    }
    traj.rewards.iter().sum::<f64>() / traj.num_envs as f64
}
