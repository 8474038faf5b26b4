use alloc::vec;
use alloc::vec::Vec;

use crate::drift::DEFAULT_TEMPERATURES;
use crate::envs::{EnvKind, EnvParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Algorithm {
    #[default]
    Podpo,
    PpoBaseline,
}

/// Every hyperparameter of a run. All fields have defaults.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub env_params: EnvParams,
    pub num_envs: usize,
    /// Rollout length per env per iteration.
    pub steps_per_rollout: usize,
    pub iterations: usize,
    pub seed: u64,

    /// Candidate actions generated per positive observation.
    #[cfg_attr(feature = "serde", serde(alias = "G"))]
    pub num_candidates: usize,
    pub beta: f64,
    pub temps: Vec<f64>,
    pub advantage_weighting: bool,

    pub gamma: f64,
    pub lambda: f64,
    pub epochs: usize,
    /// Positives per minibatch (PODPO) or samples per minibatch (baseline).
    pub minibatch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub value_clip: f64,
    pub value_coef: f64,
    /// Ratio clip of the baseline surrogate; unused by PODPO.
    pub clip_eps: f64,

    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    /// Generative actor noise width; defaults to the action dimension.
    pub noise_dim: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Podpo,
            env: EnvKind::BimodalBandit,
            env_params: EnvParams::default(),
            num_envs: 256,
            steps_per_rollout: 1,
            iterations: 300,
            seed: 0,
            num_candidates: 8,
            beta: 0.1,
            temps: DEFAULT_TEMPERATURES.to_vec(),
            advantage_weighting: true,
            gamma: 0.99,
            lambda: 0.95,
            epochs: 4,
            minibatch_size: 256,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            value_clip: 0.2,
            value_coef: 0.5,
            clip_eps: 0.2,
            hidden: vec![64, 64],
            noise_dim: None,
        }
    }
}

/// Number of per-temperature metric columns in the metrics file.
pub const MAX_TEMPERATURES: usize = 3;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, field: &'static str, constraint: &'static str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config { field, constraint })
            }
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        check(self.num_envs >= 1, "num_envs", "must be >= 1")?;
        check(
            self.steps_per_rollout >= 1,
            "steps_per_rollout",
            "must be >= 1",
        )?;
        check(
            self.num_envs * self.steps_per_rollout >= 2,
            "num_envs",
            "num_envs * steps_per_rollout must be >= 2 for advantage normalization",
        )?;
        check(self.num_candidates >= 1, "num_candidates", "must be >= 1")?;
        check(
            self.beta >= 0.0 && self.beta.is_finite(),
            "beta",
            "must be finite and >= 0",
        )?;
        check(!self.temps.is_empty(), "temps", "must not be empty")?;
        check(
            self.temps.len() <= MAX_TEMPERATURES,
            "temps",
            "at most 3 temperatures (one metrics column each)",
        )?;
        check(
            self.temps.iter().all(|&t| pos(t)),
            "temps",
            "every temperature must be > 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.gamma),
            "gamma",
            "must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.lambda),
            "lambda",
            "must lie in [0, 1]",
        )?;
        check(self.epochs >= 1, "epochs", "must be >= 1")?;
        check(self.minibatch_size >= 1, "minibatch_size", "must be >= 1")?;
        check(pos(self.actor_lr), "actor_lr", "must be > 0")?;
        check(pos(self.critic_lr), "critic_lr", "must be > 0")?;
        check(pos(self.value_clip), "value_clip", "must be > 0")?;
        check(
            self.value_coef >= 0.0 && self.value_coef.is_finite(),
            "value_coef",
            "must be finite and >= 0",
        )?;
        check(pos(self.clip_eps), "clip_eps", "must be > 0")?;
        check(
            self.hidden.iter().all(|&h| h >= 1),
            "hidden",
            "layer widths must be >= 1",
        )?;
        check(self.noise_dim != Some(0), "noise_dim", "must be >= 1")?;
        let pm = &self.env_params.point_mass;
        check(pos(pm.dt), "env_params.point_mass.dt", "must be > 0")?;
        check(
            pm.horizon >= 1,
            "env_params.point_mass.horizon",
            "must be >= 1",
        )?;
        check(
            pos(self.env_params.bandit.sigma),
            "env_params.bandit.sigma",
            "must be > 0",
        )?;
        Ok(())
    }
}
