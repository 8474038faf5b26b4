//! Positive-only drifting updates for the generative actor.
//!
//! Only observations with a strictly positive normalized advantage reach the
//! actor. For each of them the actor generates `G` fresh candidates, which
//! serve both as the points being moved and as the negative set of the
//! drifting field, and the single rollout action is the positive target. The
//! field is treated as a constant and the candidates are regressed onto
//! `x + V`, weighted by `β|Â|`.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::config::TrainConfig;
use super::losses::{drifting_loss, value_loss_clipped, DriftWeighting};
use super::{chunk, episode_return, mean_or, MetricsRow};
use crate::drift::{self, DriftInputs};
use crate::envs::EnvSet;
use crate::nn::{AdamState, MlpParams};
use crate::policy::{Critic, GenerativeActor};
use crate::rng::Rng;
use crate::rollout::{collect_rollout, filter_positive, normalize_advantages, PositiveBatch};
use crate::tensor::{Matrix, Tensor3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSettings {
    pub num_candidates: usize,
    pub temps: Vec<f64>,
    pub weighting: DriftWeighting,
}

impl DriftSettings {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        Self {
            num_candidates: cfg.num_candidates,
            temps: cfg.temps.clone(),
            weighting: DriftWeighting {
                beta: cfg.beta,
                advantage_weighting: cfg.advantage_weighting,
            },
        }
    }
}

/// Result of one drifting-loss evaluation on a batch of positives.
#[derive(Debug, Clone)]
pub struct DriftStep {
    pub loss: f64,
    /// Gradient with respect to the actor network, shaped like `actor.net`.
    pub grads: MlpParams,
    /// The contrastive sets the field was computed from (`None` for an empty batch).
    pub inputs: Option<DriftInputs>,
    /// The frozen drifting field, `B × G × D`.
    pub field: Tensor3,
}

/// Candidates → drifting field (constant) → weighted loss → actor gradient.
pub fn drift_actor_gradient(
    actor: &GenerativeActor,
    batch: &PositiveBatch,
    settings: &DriftSettings,
    rng: &mut Rng,
) -> Result<DriftStep> {
    let d = actor.action_dim();
    let g = settings.num_candidates;
    if batch.is_empty() {
        return Ok(DriftStep {
            loss: 0.0,
            grads: actor.net.zeros_like(),
            inputs: None,
            field: Tensor3::zeros(0, g, d),
        });
    }
    let cands = actor.sample_candidates(&batch.obs, g, rng)?;
    let y_pos = Tensor3::from_matrix(batch.actions.clone(), 1)?;
    let inputs = DriftInputs::contrastive(cands.actions.clone(), y_pos, settings.temps.clone())?;
    let field = drift::compute_v(&inputs)?;
    let (loss, dx) = drifting_loss(&cands.actions, &field, &batch.adv, settings.weighting)?;
    let (grads, _) = actor.net.backward_from(&cands.trace, &dx.into_matrix())?;
    Ok(DriftStep {
        loss,
        grads,
        inputs: Some(inputs),
        field,
    })
}

/// Actor gradient for a whole set of samples: keeps `Â > 0` rows and
/// discards the rest before anything touches the actor.
pub fn positive_only_actor_gradient(
    actor: &GenerativeActor,
    obs: &Matrix,
    actions: &Matrix,
    normalized_adv: &[f64],
    settings: &DriftSettings,
    rng: &mut Rng,
) -> Result<DriftStep> {
    let batch = filter_positive(obs, actions, normalized_adv)?;
    drift_actor_gradient(actor, &batch, settings, rng)
}

pub(super) struct Streams<'a> {
    pub policy: &'a mut Rng,
    pub candidates: &'a mut Rng,
    pub minibatch: &'a mut Rng,
}

#[allow(clippy::too_many_arguments)]
pub(super) fn iteration(
    cfg: &TrainConfig,
    index: usize,
    envs: &mut EnvSet,
    actor: &mut GenerativeActor,
    actor_opt: &mut AdamState,
    critic: &mut Critic,
    critic_opt: &mut AdamState,
    rngs: Streams<'_>,
) -> Result<MetricsRow> {
    let mut traj = collect_rollout(envs, &*actor, critic, cfg.steps_per_rollout, rngs.policy)?;
    traj.compute_advantages(cfg.gamma, cfg.lambda)?;
    let adv = normalize_advantages(&traj.advantages)?;
    let positives = filter_positive(&traj.obs, &traj.actions, &adv)?;
    let settings = DriftSettings::from_config(cfg);

    let n_all = traj.len();
    let batches = if positives.is_empty() {
        n_all.div_ceil(cfg.minibatch_size)
    } else {
        positives.len().div_ceil(cfg.minibatch_size)
    };
    let mut pos_perm: Vec<usize> = (0..positives.len()).collect();
    let mut all_perm: Vec<usize> = (0..n_all).collect();
    let mut drift_losses = Vec::new();
    let mut value_losses = Vec::new();
    let mut diag = None;

    for _ in 0..cfg.epochs {
        pos_perm.shuffle(rngs.minibatch);
        all_perm.shuffle(rngs.minibatch);
        for i in 0..batches {
            let pos_idx = chunk(&pos_perm, batches, i);
            if !pos_idx.is_empty() {
                let step = drift_actor_gradient(
                    actor,
                    &positives.select(pos_idx),
                    &settings,
                    rngs.candidates,
                )?;
                if !step.loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        iteration: index,
                        term: "drifting loss",
                    });
                }
                if diag.is_none() {
                    if let Some(inputs) = &step.inputs {
                        diag = Some(drift::diagnose(inputs)?);
                    }
                }
                drift_losses.push(step.loss);
                let grads = GenerativeActor {
                    net: step.grads,
                    obs_dim: actor.obs_dim,
                    noise_dim: actor.noise_dim,
                };
                actor_opt.step(actor, &grads)?;
            }

            let idx = chunk(&all_perm, batches, i);
            if idx.is_empty() {
                continue;
            }
            let obs = traj.obs.select_rows(idx);
            let v_new = critic.value(&obs)?;
            let v_old: Vec<f64> = idx.iter().map(|&j| traj.values[j]).collect();
            let returns: Vec<f64> = idx.iter().map(|&j| traj.returns[j]).collect();
            let (vl, dv) =
                value_loss_clipped(&v_new, &v_old, &returns, cfg.value_clip, cfg.value_coef)?;
            if !vl.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: index,
                    term: "value loss",
                });
            }
            value_losses.push(vl);
            let grads = critic.backward(&obs, &dv)?;
            critic_opt.step(critic, &Critic { net: grads })?;
        }
    }

    let (ess_ratio, max_p, rv_total) = match diag {
        Some(d) => (
            d.per_temperature.iter().map(|t| t.ess_ratio).collect(),
            d.per_temperature.iter().map(|t| t.max_p).collect(),
            Some(d.rv_total),
        ),
        None => (Vec::new(), Vec::new(), None),
    };
    Ok(MetricsRow {
        iteration: index,
        mean_episode_return: episode_return(&traj),
        frac_positive: positives.len() as f64 / n_all as f64,
        loss_drift: Some(mean_or(&drift_losses, 0.0)),
        loss_value: mean_or(&value_losses, 0.0),
        loss_surrogate: None,
        rv_total,
        ess_ratio,
        max_p,
        wall_ms: None,
    })
}
