//! Small deterministic continuous-control environments.
//!
//! - `bimodal_bandit`: one-step, contextless, two equally good action modes.
//! - `point_mass`: 2-D double integrator that has to reach and hold a goal.
//!
//! Actions are clipped to each env's bounds before use. Randomness only enters
//! through the reset distribution, drawn from the RNG handed to [`Env::reset`].

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;

use crate::rng::{self, Rng, Stream};
use crate::tensor::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EnvKind {
    BimodalBandit,
    PointMass,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::BimodalBandit => "bimodal_bandit",
            EnvKind::PointMass => "point_mass",
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bimodal_bandit" => Ok(EnvKind::BimodalBandit),
            "point_mass" => Ok(EnvKind::PointMass),
            other => Err(Error::UnknownEnv(other.to_string())),
        }
    }
}

/// Reward `max_i exp(-‖a - c_i‖² / σ²)` over two mode centers; every episode is one step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BanditParams {
    pub centers: [[f64; 2]; 2],
    pub sigma: f64,
    /// Each action component is clipped to `[-action_bound, action_bound]`.
    pub action_bound: f64,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            centers: [[-1.0, 0.0], [1.0, 0.0]],
            sigma: 0.3,
            action_bound: 2.0,
        }
    }
}

impl BanditParams {
    pub fn reward(&self, a: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.centers
            .iter()
            .map(|c| {
                let d2 = (a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2);
                (-d2 / s2).exp()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `vel += clip(a)·dt; pos += vel·dt`; reward `-‖pos - goal‖ + bonus·[‖pos - goal‖ < radius]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PointMassParams {
    pub dt: f64,
    pub horizon: usize,
    pub action_bound: f64,
    pub bonus: f64,
    pub bonus_radius: f64,
    /// Start position and goal are uniform in `[-init_range, init_range]²`.
    pub init_range: f64,
}

impl Default for PointMassParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            horizon: 64,
            action_bound: 1.0,
            bonus: 5.0,
            bonus_radius: 0.05,
            init_range: 1.0,
        }
    }
}

impl PointMassParams {
    /// Best possible per-episode return: zero distance and the bonus on every step.
    pub fn return_upper_bound(&self) -> f64 {
        self.bonus * self.horizon as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EnvParams {
    pub bandit: BanditParams,
    pub point_mass: PointMassParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Dynamics {
    Bandit(BanditParams),
    PointMass {
        params: PointMassParams,
        pos: [f64; 2],
        vel: [f64; 2],
        goal: [f64; 2],
    },
}

/// One environment instance. Owns its state; the step counter never exceeds the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    id: usize,
    dynamics: Dynamics,
    steps: usize,
    done: bool,
}

impl Env {
    pub fn new(kind: EnvKind, params: &EnvParams, id: usize) -> Self {
        let dynamics = match kind {
            EnvKind::BimodalBandit => Dynamics::Bandit(params.bandit),
            EnvKind::PointMass => Dynamics::PointMass {
                params: params.point_mass,
                pos: [0.0; 2],
                vel: [0.0; 2],
                goal: [0.0; 2],
            },
        };
        Self {
            id,
            dynamics,
            steps: 0,
            done: false,
        }
    }

    pub fn obs_dim(&self) -> usize {
        obs_dim(self.kind())
    }

    pub fn action_dim(&self) -> usize {
        2
    }

    pub fn kind(&self) -> EnvKind {
        match self.dynamics {
            Dynamics::Bandit(_) => EnvKind::BimodalBandit,
            Dynamics::PointMass { .. } => EnvKind::PointMass,
        }
    }

    pub fn horizon(&self) -> usize {
        match &self.dynamics {
            Dynamics::Bandit(_) => 1,
            Dynamics::PointMass { params, .. } => params.horizon,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn observe(&self) -> Vec<f64> {
        match &self.dynamics {
            Dynamics::Bandit(_) => vec![0.0],
            Dynamics::PointMass { pos, vel, goal, .. } => {
                vec![pos[0], pos[1], vel[0], vel[1], goal[0], goal[1]]
            }
        }
    }

    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.steps = 0;
        self.done = false;
        if let Dynamics::PointMass {
            params,
            pos,
            vel,
            goal,
        } = &mut self.dynamics
        {
            let r = params.init_range;
            *pos = [rng.random_range(-r..=r), rng.random_range(-r..=r)];
            *vel = [0.0; 2];
            *goal = [rng.random_range(-r..=r), rng.random_range(-r..=r)];
        }
        self.observe()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished { env: self.id });
        }
        if action.len() != self.action_dim() {
            return Err(Error::shape(
                "env action",
                &[self.action_dim()],
                &[action.len()],
            ));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite(alloc::format!(
                "action for env {}",
                self.id
            )));
        }
        self.steps += 1;
        let horizon = self.horizon();
        let reward = match &mut self.dynamics {
            Dynamics::Bandit(p) => {
                let b = p.action_bound;
                let a = [action[0].clamp(-b, b), action[1].clamp(-b, b)];
                p.reward(&a)
            }
            Dynamics::PointMass {
                params,
                pos,
                vel,
                goal,
            } => {
                let b = params.action_bound;
                for k in 0..2 {
                    vel[k] += action[k].clamp(-b, b) * params.dt;
                    pos[k] += vel[k] * params.dt;
                }
                let dist = ((pos[0] - goal[0]).powi(2) + (pos[1] - goal[1]).powi(2)).sqrt();
                let bonus = if dist < params.bonus_radius {
                    params.bonus
                } else {
                    0.0
                };
                bonus - dist
            }
        };
        self.done = self.steps >= horizon;
        Ok(StepResult {
            obs: self.observe(),
            reward,
            done: self.done,
        })
    }
}

pub fn obs_dim(kind: EnvKind) -> usize {
    match kind {
        EnvKind::BimodalBandit => 1,
        EnvKind::PointMass => 6,
    }
}

pub fn action_dim(_kind: EnvKind) -> usize {
    2
}

/// Output of [`EnvSet::step`]: one entry per env, in env-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStep {
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Observation to act on next (already reset where `done`).
    pub next_obs: Matrix,
}

/// A fixed-order vector of environments with per-env RNG streams and automatic reset.
#[derive(Debug, Clone)]
pub struct EnvSet {
    envs: Vec<Env>,
    rngs: Vec<Rng>,
    obs: Matrix,
    running_return: Vec<f64>,
    finished: Vec<f64>,
}

impl EnvSet {
    pub fn new(kind: EnvKind, params: &EnvParams, count: usize, master_seed: u64) -> Self {
        let mut envs: Vec<Env> = (0..count).map(|i| Env::new(kind, params, i)).collect();
        let mut rngs: Vec<Rng> = (0..count)
            .map(|i| rng::stream(master_seed, Stream::Env(i as u32)))
            .collect();
        let mut obs = Matrix::zeros(count, obs_dim(kind));
        for (i, (env, rng)) in envs.iter_mut().zip(rngs.iter_mut()).enumerate() {
            obs.row_mut(i).copy_from_slice(&env.reset(rng));
        }
        Self {
            envs,
            rngs,
            obs,
            running_return: vec![0.0; count],
            finished: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn obs(&self) -> &Matrix {
        &self.obs
    }

    pub fn kind(&self) -> EnvKind {
        self.envs[0].kind()
    }

    pub fn step(&mut self, actions: &Matrix) -> Result<BatchStep> {
        if actions.rows() != self.envs.len() {
            return Err(Error::shape(
                "EnvSet::step rows",
                &[self.envs.len()],
                &[actions.rows()],
            ));
        }
        let mut rewards = Vec::with_capacity(self.envs.len());
        let mut dones = Vec::with_capacity(self.envs.len());
        for (i, env) in self.envs.iter_mut().enumerate() {
            let r = env.step(actions.row(i))?;
            self.running_return[i] += r.reward;
            let obs = if r.done {
                self.finished.push(self.running_return[i]);
                self.running_return[i] = 0.0;
                env.reset(&mut self.rngs[i])
            } else {
                r.obs
            };
            self.obs.row_mut(i).copy_from_slice(&obs);
            rewards.push(r.reward);
            dones.push(r.done);
        }
        Ok(BatchStep {
            rewards,
            dones,
            next_obs: self.obs.clone(),
        })
    }

    /// Returns of every episode completed since the last call.
    pub fn take_finished_returns(&mut self) -> Vec<f64> {
        core::mem::take(&mut self.finished)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn bandit_rewards() {
        let p = BanditParams::default();
        assert_eq!(p.reward(&[1.0, 0.0]), 1.0);
        let mid = p.reward(&[0.0, 0.0]);
        assert!((mid - (-1.0f64 / 0.09).exp()).abs() < 1e-18);
        assert!((mid - 1.5e-5).abs() < 1e-6);
    }

    #[test]
    fn bandit_is_one_step_and_contextless() {
        let mut env = Env::new(EnvKind::BimodalBandit, &EnvParams::default(), 3);
        let mut rng = stream(0, Stream::Env(0));
        assert_eq!(env.reset(&mut rng), vec![0.0]);
        let r = env.step(&[-1.0, 0.0]).unwrap();
        assert!(r.done);
        assert_eq!(r.reward, 1.0);
        assert_eq!(
            env.step(&[0.0, 0.0]),
            Err(Error::EpisodeFinished { env: 3 })
        );
    }

    #[test]
    fn bandit_clips_actions() {
        let mut env = Env::new(EnvKind::BimodalBandit, &EnvParams::default(), 0);
        env.reset(&mut stream(0, Stream::Env(0)));
        let far = env.step(&[50.0, 0.0]).unwrap().reward;
        assert_eq!(far, BanditParams::default().reward(&[2.0, 0.0]));
    }

    #[test]
    fn point_mass_reset_distribution() {
        let mut env = Env::new(EnvKind::PointMass, &EnvParams::default(), 0);
        for s in 0..50 {
            let o = env.reset(&mut stream(s, Stream::Env(0)));
            assert!(o[..2].iter().chain(&o[4..]).all(|v| v.abs() <= 1.0));
            assert_eq!(&o[2..4], &[0.0, 0.0]);
        }
        let a = env.clone().reset(&mut stream(9, Stream::Env(0)));
        let b = env.reset(&mut stream(9, Stream::Env(0)));
        assert_eq!(a, b);
    }

    #[test]
    fn point_mass_zero_action_from_rest() {
        let mut env = Env::new(EnvKind::PointMass, &EnvParams::default(), 0);
        let o = env.reset(&mut stream(1, Stream::Env(0)));
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(&r.obs[..2], &o[..2]);
        let dist = ((o[0] - o[4]).powi(2) + (o[1] - o[5]).powi(2)).sqrt();
        assert_eq!(r.reward, -dist);
        assert!(!r.done);
    }

    #[test]
    fn point_mass_horizon_and_bonus() {
        let mut env = Env::new(EnvKind::PointMass, &EnvParams::default(), 0);
        env.reset(&mut stream(2, Stream::Env(0)));
        for t in 1..=64 {
            let r = env.step(&[0.3, -0.2]).unwrap();
            assert_eq!(r.done, t == 64);
        }
        assert!(env.step(&[0.0, 0.0]).is_err());
        assert_eq!(PointMassParams::default().return_upper_bound(), 320.0);
    }

    #[test]
    fn env_set_auto_resets_and_tracks_returns() {
        let mut set = EnvSet::new(EnvKind::BimodalBandit, &EnvParams::default(), 3, 0);
        let acts = Matrix::from_rows(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 0.0]]);
        let out = set.step(&acts).unwrap();
        assert_eq!(out.dones, vec![true; 3]);
        assert_eq!(set.take_finished_returns().len(), 3);
        assert!(set.take_finished_returns().is_empty());
        assert!(set.step(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn env_names_round_trip() {
        for k in [EnvKind::BimodalBandit, EnvKind::PointMass] {
            assert_eq!(k.name().parse::<EnvKind>().unwrap(), k);
        }
        assert!("cartpole".parse::<EnvKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bandit_mirror_symmetry(a0 in -3.0f64..3.0, a1 in -3.0f64..3.0) {
                let p = BanditParams::default();
                prop_assert_eq!(p.reward(&[a0, a1]), p.reward(&[-a0, a1]));
            }

            #[test]
            fn point_mass_displacement_bounded(seed in 0u64..200, ax in -3.0f64..3.0, ay in -3.0f64..3.0) {
                let mut env = Env::new(EnvKind::PointMass, &EnvParams::default(), 0);
                let o = env.reset(&mut stream(seed, Stream::Env(0)));
                let mut prev = [o[0], o[1]];
                for _ in 0..5 {
                    let r = env.step(&[ax, ay]).unwrap();
                    let step = ((r.obs[0] - prev[0]).powi(2) + (r.obs[1] - prev[1]).powi(2)).sqrt();
                    let speed = (r.obs[2].powi(2) + r.obs[3].powi(2)).sqrt();
                    prop_assert!(step <= speed * 0.1 + 1e-12);
                    prev = [r.obs[0], r.obs[1]];
                }
            }
        }
    }
}
