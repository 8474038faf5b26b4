//! Clipped-surrogate PPO with a diagonal Gaussian actor, sharing the rollout,
//! advantage and critic plumbing with PODPO.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::config::TrainConfig;
use super::losses::{ppo_surrogate_loss, value_loss_clipped};
use super::{chunk, episode_return, mean_or, MetricsRow};
use crate::envs::EnvSet;
use crate::nn::AdamState;
use crate::policy::{Critic, GaussianActor};
use crate::rng::Rng;
use crate::rollout::{collect_rollout, normalize_advantages};
use crate::{Error, Result};

#[allow(clippy::too_many_arguments)]
pub(super) fn iteration(
    cfg: &TrainConfig,
    index: usize,
    envs: &mut EnvSet,
    actor: &mut GaussianActor,
    actor_opt: &mut AdamState,
    critic: &mut Critic,
    critic_opt: &mut AdamState,
    policy_rng: &mut Rng,
    minibatch_rng: &mut Rng,
) -> Result<MetricsRow> {
    let mut traj = collect_rollout(envs, &*actor, critic, cfg.steps_per_rollout, policy_rng)?;
    traj.compute_advantages(cfg.gamma, cfg.lambda)?;
    let adv = normalize_advantages(&traj.advantages)?;
    let logp_old = traj
        .log_probs
        .clone()
        .expect("gaussian rollouts record log-densities");

    let n = traj.len();
    let batches = n.div_ceil(cfg.minibatch_size);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut surrogate_losses = Vec::new();
    let mut value_losses = Vec::new();

    for _ in 0..cfg.epochs {
        perm.shuffle(minibatch_rng);
        for i in 0..batches {
            let idx = chunk(&perm, batches, i);
            if idx.is_empty() {
                continue;
            }
            let obs = traj.obs.select_rows(idx);
            let actions = traj.actions.select_rows(idx);
            let pick = |src: &[f64]| idx.iter().map(|&j| src[j]).collect::<Vec<f64>>();

            let logp_new = actor.log_prob(&obs, &actions)?;
            let (sl, dlogp) =
                ppo_surrogate_loss(&logp_new, &pick(&logp_old), &pick(&adv), cfg.clip_eps)?;
            if !sl.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: index,
                    term: "surrogate loss",
                });
            }
            surrogate_losses.push(sl);
            let grads = actor.log_prob_backward(&obs, &actions, &dlogp)?;
            actor_opt.step(actor, &grads)?;

            let v_new = critic.value(&obs)?;
            let (vl, dv) = value_loss_clipped(
                &v_new,
                &pick(&traj.values),
                &pick(&traj.returns),
                cfg.value_clip,
                cfg.value_coef,
            )?;
            if !vl.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: index,
                    term: "value loss",
                });
            }
            value_losses.push(vl);
            let cgrads = critic.backward(&obs, &dv)?;
            critic_opt.step(critic, &Critic { net: cgrads })?;
        }
    }

    let positives = adv.iter().filter(|&&a| a > 0.0).count();
    Ok(MetricsRow {
        iteration: index,
        mean_episode_return: episode_return(&traj),
        frac_positive: positives as f64 / n as f64,
        loss_drift: None,
        loss_value: mean_or(&value_losses, 0.0),
        loss_surrogate: Some(mean_or(&surrogate_losses, 0.0)),
        rv_total: None,
        ess_ratio: Vec::new(),
        max_p: Vec::new(),
        wall_ms: None,
    })
}
