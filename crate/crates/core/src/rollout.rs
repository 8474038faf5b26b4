//! On-policy data collection and advantage processing.
//!
//! All per-step arrays are flattened step-major: entry `t * num_envs + e` is
//! step `t` of env `e`.

use alloc::vec;
use alloc::vec::Vec;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;

use crate::envs::EnvSet;
use crate::policy::{Critic, GaussianActor, GenerativeActor};
use crate::rng::Rng;
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Anything that can pick actions for a batch of observations.
pub trait RolloutPolicy {
    /// Actions for every row of `obs`, plus log-densities when the policy has one.
    fn act(&self, obs: &Matrix, rng: &mut Rng) -> Result<(Matrix, Option<Vec<f64>>)>;
}

impl RolloutPolicy for GenerativeActor {
    fn act(&self, obs: &Matrix, rng: &mut Rng) -> Result<(Matrix, Option<Vec<f64>>)> {
        Ok((GenerativeActor::act(self, obs, rng)?, None))
    }
}

impl RolloutPolicy for GaussianActor {
    fn act(&self, obs: &Matrix, rng: &mut Rng) -> Result<(Matrix, Option<Vec<f64>>)> {
        let (a, lp) = self.sample(obs, rng)?;
        Ok((a, Some(lp)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: usize,
    pub num_envs: usize,
    /// `(T·N) × obs_dim`: the observation each action was taken from.
    pub obs: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic values at collection time.
    pub values: Vec<f64>,
    /// Critic values of the observations following the last step.
    pub bootstrap_values: Vec<f64>,
    /// Behaviour log-densities, for policies that have one.
    pub log_probs: Option<Vec<f64>>,
    /// Filled by [`Trajectory::compute_advantages`].
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Returns of episodes that finished during collection, in completion order.
    pub episode_returns: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let (adv, ret) = compute_gae(
            &self.rewards,
            &self.values,
            &self.dones,
            &self.bootstrap_values,
            gamma,
            lambda,
        )?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

/// Steps every env `steps` times with on-policy actions, recording critic
/// values as it goes. Envs reset themselves when an episode ends.
pub fn collect_rollout<P: RolloutPolicy + ?Sized>(
    envs: &mut EnvSet,
    policy: &P,
    critic: &Critic,
    steps: usize,
    rng: &mut Rng,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::TooFewSamples {
            context: "rollout steps",
            needed: 1,
            found: 0,
        });
    }
    let n = envs.len();
    let obs_dim = envs.obs().cols();
    let total = steps * n;
    let mut obs = Matrix::zeros(total, obs_dim);
    let mut actions: Option<Matrix> = None;
    let mut rewards = Vec::with_capacity(total);
    let mut dones = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    let mut log_probs: Option<Vec<f64>> = None;
    envs.take_finished_returns();

    for t in 0..steps {
        let current = envs.obs().clone();
        let (act, lp) = policy.act(&current, rng)?;
        values.extend(critic.value(&current)?);
        for e in 0..n {
            obs.row_mut(t * n + e).copy_from_slice(current.row(e));
        }
        let acts = actions.get_or_insert_with(|| Matrix::zeros(total, act.cols()));
        for e in 0..n {
            acts.row_mut(t * n + e).copy_from_slice(act.row(e));
        }
        if let Some(lp) = lp {
            log_probs.get_or_insert_with(Vec::new).extend(lp);
        }
        let out = envs.step(&act)?;
        rewards.extend(out.rewards);
        dones.extend(out.dones);
    }
    let bootstrap_values = critic.value(envs.obs())?;
    Ok(Trajectory {
        steps,
        num_envs: n,
        obs,
        actions: actions.unwrap_or_else(|| Matrix::zeros(0, 0)),
        rewards,
        dones,
        values,
        bootstrap_values,
        log_probs,
        advantages: Vec::new(),
        returns: Vec::new(),
        episode_returns: envs.take_finished_returns(),
    })
}

/// Generalized advantage estimation over step-major arrays.
///
/// `δ_t = r_t + γ V_{t+1} (1 - done_t) - V_t`,
/// `Â_t = δ_t + γλ (1 - done_t) Â_{t+1}`, returns `Â + V`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config {
            field: "gamma",
            constraint: "must lie in [0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config {
            field: "lambda",
            constraint: "must lie in [0, 1]",
        });
    }
    let n = bootstrap.len();
    let total = rewards.len();
    if values.len() != total || dones.len() != total || n == 0 || total % n != 0 {
        return Err(Error::shape(
            "compute_gae",
            &[total, total, total],
            &[values.len(), dones.len(), n],
        ));
    }
    let steps = total / n;
    let mut adv = vec![0.0; total];
    for e in 0..n {
        let mut next_adv = 0.0;
        let mut next_value = bootstrap[e];
        for t in (0..steps).rev() {
            let i = t * n + e;
            let live = if dones[i] { 0.0 } else { 1.0 };
            let delta = rewards[i] + gamma * next_value * live - values[i];
            next_adv = delta + gamma * lambda * live * next_adv;
            adv[i] = next_adv;
            next_value = values[i];
        }
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Zero-mean, unit-variance advantages: `(a - mean) / (std + 1e-8)` with the population std.
pub fn normalize_advantages(adv: &[f64]) -> Result<Vec<f64>> {
    if adv.len() < 2 {
        return Err(Error::TooFewSamples {
            context: "advantage normalization",
            needed: 2,
            found: adv.len(),
        });
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    Ok(adv.iter().map(|a| (a - mean) / denom).collect())
}

/// Observations whose normalized advantage is strictly positive, with their
/// rollout actions, in collection order.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveBatch {
    pub obs: Matrix,
    pub actions: Matrix,
    pub adv: Vec<f64>,
    /// Source rows in the trajectory.
    pub indices: Vec<usize>,
}

impl PositiveBatch {
    pub fn len(&self) -> usize {
        self.adv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adv.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> PositiveBatch {
        PositiveBatch {
            obs: self.obs.select_rows(idx),
            actions: self.actions.select_rows(idx),
            adv: idx.iter().map(|&i| self.adv[i]).collect(),
            indices: idx.iter().map(|&i| self.indices[i]).collect(),
        }
    }
}

/// Keeps rows with `Â > 0`; `Â ≤ 0` rows are dropped.
pub fn filter_positive(obs: &Matrix, actions: &Matrix, adv: &[f64]) -> Result<PositiveBatch> {
    if obs.rows() != adv.len() || actions.rows() != adv.len() {
        return Err(Error::shape(
            "filter_positive rows",
            &[adv.len(), adv.len()],
            &[obs.rows(), actions.rows()],
        ));
    }
    let indices: Vec<usize> = (0..adv.len()).filter(|&i| adv[i] > 0.0).collect();
    Ok(PositiveBatch {
        obs: obs.select_rows(&indices),
        actions: actions.select_rows(&indices),
        adv: indices.iter().map(|&i| adv[i]).collect(),
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvKind, EnvParams};
    use crate::rng::{standard_normal, stream, Stream};

    #[test]
    fn gae_single_step() {
        let (a, r) = compute_gae(&[1.0], &[0.0], &[false], &[0.0], 1.0, 1.0).unwrap();
        assert_eq!((a[0], r[0]), (1.0, 1.0));
    }

    #[test]
    fn gae_null_signal() {
        let (a, _) = compute_gae(&[0.0; 6], &[0.0; 6], &[false; 6], &[0.0; 2], 0.99, 0.95).unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gae_three_step_hand_case() {
        // Â₂ = 1; Â₁ = 0.9·0.95·1 = 0.855; Â₀ = 0.855² = 0.731025.
        let (a, r) =
            compute_gae(&[0.0, 0.0, 1.0], &[0.0; 3], &[false; 3], &[0.0], 0.9, 0.95).unwrap();
        assert!((a[2] - 1.0).abs() < 1e-15);
        assert!((a[1] - 0.855).abs() < 1e-15);
        assert!((a[0] - 0.731025).abs() < 1e-15);
        assert_eq!(a, r);
    }

    #[test]
    fn gae_resets_at_episode_boundary() {
        // Reward after the boundary must not leak into the finished episode.
        let (a, _) =
            compute_gae(&[0.0, 5.0], &[0.0, 0.0], &[true, false], &[0.0], 0.9, 0.95).unwrap();
        assert_eq!(a[0], 0.0);
        assert_eq!(a[1], 5.0);
    }

    #[test]
    fn gae_matches_reward_to_go() {
        let mut rng = stream(0, Stream::Synthetic(0));
        let rewards: Vec<f64> = (0..24).map(|_| standard_normal(&mut rng)).collect();
        let mut dones = vec![false; 24];
        dones[2 * 3 + 1] = true; // env 1 ends at step 2
        let (a, _) = compute_gae(&rewards, &[0.0; 24], &dones, &[0.0; 3], 1.0, 1.0).unwrap();
        for e in 0..3 {
            for t in 0..8 {
                let mut expect = 0.0;
                for u in t..8 {
                    expect += rewards[u * 3 + e];
                    if dones[u * 3 + e] {
                        break;
                    }
                }
                assert!((a[t * 3 + e] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gae_rejects_bad_inputs() {
        assert!(compute_gae(&[0.0], &[0.0], &[false], &[0.0], 1.5, 0.9).is_err());
        assert!(compute_gae(&[0.0, 1.0], &[0.0], &[false], &[0.0], 0.9, 0.9).is_err());
    }

    #[test]
    fn normalize_closed_forms() {
        let z = normalize_advantages(&[1.0, 2.0, 3.0]).unwrap();
        let expect = [-1.224_744_871, 0.0, 1.224_744_871];
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(normalize_advantages(&[4.0; 5]).unwrap(), vec![0.0; 5]);
        assert!(normalize_advantages(&[1.0]).is_err());
    }

    #[test]
    fn normalize_random_input() {
        let mut rng = stream(3, Stream::Synthetic(0));
        let adv: Vec<f64> = (0..500)
            .map(|_| 3.0 + 7.0 * standard_normal(&mut rng))
            .collect();
        let z = normalize_advantages(&adv).unwrap();
        let mean = z.iter().sum::<f64>() / 500.0;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0).sqrt();
        assert!(mean.abs() < 1e-6);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn filter_is_strict() {
        let obs = Matrix::from_rows(&[&[1.0], &[2.0], &[3.0]]);
        let acts = Matrix::from_rows(&[&[10.0], &[20.0], &[30.0]]);
        let b = filter_positive(&obs, &acts, &[0.5, -0.3, 0.0]).unwrap();
        assert_eq!(b.indices, vec![0]);
        assert_eq!(b.actions.as_slice(), &[10.0]);
        assert!(filter_positive(&obs, &acts, &[-1.0, -2.0, -3.0])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn filter_keeps_about_half_of_normal_advantages() {
        let mut rng = stream(4, Stream::Synthetic(0));
        let adv: Vec<f64> = (0..10_000).map(|_| standard_normal(&mut rng)).collect();
        let z = normalize_advantages(&adv).unwrap();
        let obs = Matrix::zeros(10_000, 1);
        let frac = filter_positive(&obs, &obs, &z).unwrap().len() as f64 / 10_000.0;
        assert!((0.3..=0.7).contains(&frac), "{frac}");
    }

    fn tiny_setup(seed: u64) -> (EnvSet, GenerativeActor, Critic) {
        let envs = EnvSet::new(EnvKind::BimodalBandit, &EnvParams::default(), 1, seed);
        let actor = GenerativeActor::init(1, 2, 2, &[8], &mut stream(seed, Stream::ActorInit));
        let critic = Critic::init(1, &[8], &mut stream(seed, Stream::CriticInit));
        (envs, actor, critic)
    }

    #[test]
    fn single_step_rollout_uses_env_reward() {
        let (mut envs, actor, critic) = tiny_setup(0);
        let traj = collect_rollout(
            &mut envs,
            &actor,
            &critic,
            1,
            &mut stream(0, Stream::Policy),
        )
        .unwrap();
        assert_eq!(traj.obs.shape(), [1, 1]);
        assert_eq!(traj.actions.shape(), [1, 2]);
        assert_eq!(traj.rewards.len(), 1);
        assert_eq!(traj.bootstrap_values.len(), 1);
        assert_eq!(traj.dones, vec![true]);
        let a = traj.actions.row(0);
        let expect = crate::envs::BanditParams::default()
            .reward(&[a[0].clamp(-2.0, 2.0), a[1].clamp(-2.0, 2.0)]);
        assert_eq!(traj.rewards[0], expect);
        assert_eq!(traj.episode_returns, vec![expect]);
        assert!(traj.log_probs.is_none());
    }

    #[test]
    fn rollout_is_deterministic() {
        let run = || {
            let mut envs = EnvSet::new(EnvKind::PointMass, &EnvParams::default(), 3, 9);
            let actor = GenerativeActor::init(6, 2, 2, &[8], &mut stream(9, Stream::ActorInit));
            let critic = Critic::init(6, &[8], &mut stream(9, Stream::CriticInit));
            collect_rollout(
                &mut envs,
                &actor,
                &critic,
                70,
                &mut stream(9, Stream::Policy),
            )
            .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.episode_returns.len(), 3);
        assert!(a.dones[63 * 3..64 * 3].iter().all(|&d| d));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn positive_selection_is_scale_invariant(
                raw in proptest::collection::vec(-5.0f64..5.0, 2..64),
                scale in 0.01f64..100.0,
            ) {
                let obs = Matrix::zeros(raw.len(), 1);
                let a = normalize_advantages(&raw).unwrap();
                // values within rounding of the mean may legitimately flip sign
                prop_assume!(a.iter().all(|v| v.abs() > 1e-9));
                let scaled: Vec<f64> = raw.iter().map(|r| r * scale).collect();
                let b = normalize_advantages(&scaled).unwrap();
                let ia = filter_positive(&obs, &obs, &a).unwrap().indices;
                let ib = filter_positive(&obs, &obs, &b).unwrap().indices;
                prop_assert_eq!(ia, ib);
            }
        }
    }
}
