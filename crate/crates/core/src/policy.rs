//! Actors and critic.
//!
//! [`GenerativeActor`] maps `(observation, noise)` to an action in one forward
//! pass and has no density; all of its stochasticity comes from the noise
//! input. [`GaussianActor`] is the unimodal PPO baseline.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;

use crate::nn::{ForwardTrace, MlpParams, ParamArrays};
use crate::rng::{standard_normal, Rng};
use crate::tensor::{Matrix, Tensor3};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(hidden.len() + 2);
    s.push(input);
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeActor {
    pub net: MlpParams,
    pub obs_dim: usize,
    pub noise_dim: usize,
}

/// Candidate actions for a batch of observations, with the network inputs
/// that produced them (needed to backpropagate into the actor).
#[derive(Debug, Clone)]
pub struct Candidates {
    /// `(B·G) × (obs_dim + noise_dim)`, observation-major.
    pub inputs: Matrix,
    pub trace: ForwardTrace,
    /// `B × G × action_dim`.
    pub actions: Tensor3,
}

impl GenerativeActor {
    pub fn init(
        obs_dim: usize,
        noise_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut Rng,
    ) -> Self {
        Self {
            net: MlpParams::init(&sizes(obs_dim + noise_dim, hidden, action_dim), rng),
            obs_dim,
            noise_dim,
        }
    }

    pub fn from_net(net: MlpParams, obs_dim: usize) -> Result<Self> {
        if net.input_dim() <= obs_dim {
            return Err(Error::shape(
                "GenerativeActor noise width",
                &[obs_dim + 1],
                &[net.input_dim()],
            ));
        }
        let noise_dim = net.input_dim() - obs_dim;
        Ok(Self {
            net,
            obs_dim,
            noise_dim,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn check(&self, obs: &Matrix, noise: &Matrix) -> Result<()> {
        if obs.cols() != self.obs_dim {
            return Err(Error::shape(
                "actor obs width",
                &[self.obs_dim],
                &[obs.cols()],
            ));
        }
        if noise.cols() != self.noise_dim || noise.rows() != obs.rows() {
            return Err(Error::shape(
                "actor noise",
                &[obs.rows(), self.noise_dim],
                &noise.shape(),
            ));
        }
        Ok(())
    }

    pub fn generate_action(&self, obs: &Matrix, noise: &Matrix) -> Result<Matrix> {
        self.check(obs, noise)?;
        self.net.forward(&obs.hcat(noise)?)
    }

    /// One fresh standard-normal noise row per observation.
    pub fn act(&self, obs: &Matrix, rng: &mut Rng) -> Result<Matrix> {
        let noise = crate::rng::normal_matrix(rng, obs.rows(), self.noise_dim);
        self.generate_action(obs, &noise)
    }

    /// `g` candidates per observation, each from its own noise draw. Noise is
    /// drawn observation by observation, candidate by candidate.
    pub fn sample_candidates(&self, obs: &Matrix, g: usize, rng: &mut Rng) -> Result<Candidates> {
        if g == 0 {
            return Err(Error::TooFewSamples {
                context: "candidates per observation",
                needed: 1,
                found: 0,
            });
        }
        if obs.cols() != self.obs_dim {
            return Err(Error::shape(
                "actor obs width",
                &[self.obs_dim],
                &[obs.cols()],
            ));
        }
        let width = self.obs_dim + self.noise_dim;
        let mut inputs = Matrix::zeros(obs.rows() * g, width);
        for b in 0..obs.rows() {
            for j in 0..g {
                let row = inputs.row_mut(b * g + j);
                row[..self.obs_dim].copy_from_slice(obs.row(b));
                for z in &mut row[self.obs_dim..] {
                    *z = standard_normal(rng);
                }
            }
        }
        let trace = self.net.forward_trace(&inputs)?;
        let actions = Tensor3::from_matrix(trace.output().clone(), g)?;
        Ok(Candidates {
            inputs,
            trace,
            actions,
        })
    }
}

impl ParamArrays for GenerativeActor {
    fn arrays(&self) -> Vec<&[f64]> {
        self.net.arrays()
    }
    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.arrays_mut()
    }
    fn array_shape(&self, i: usize) -> Vec<usize> {
        self.net.array_shape(i)
    }
    fn array_name(&self, i: usize) -> String {
        format!("actor {}", self.net.array_name(i))
    }
}

/// Diagonal Gaussian with a state-independent learned `log_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActor {
    pub mean_net: MlpParams,
    pub log_std: Vec<f64>,
}

impl GaussianActor {
    pub fn init(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        Self {
            mean_net: MlpParams::init(&sizes(obs_dim, hidden, action_dim), rng),
            log_std: vec![0.0; action_dim],
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean(&self, obs: &Matrix) -> Result<Matrix> {
        self.mean_net.forward(obs)
    }

    /// Samples actions and returns them with their log-densities.
    pub fn sample(&self, obs: &Matrix, rng: &mut Rng) -> Result<(Matrix, Vec<f64>)> {
        let mut actions = self.mean(obs)?;
        for r in 0..actions.rows() {
            for (a, ls) in actions.row_mut(r).iter_mut().zip(&self.log_std) {
                *a += ls.exp() * standard_normal(rng);
            }
        }
        let logp = self.log_prob(obs, &actions)?;
        Ok((actions, logp))
    }

    /// Sum over action dims of the univariate normal log-density.
    pub fn log_prob(&self, obs: &Matrix, actions: &Matrix) -> Result<Vec<f64>> {
        let mean = self.mean(obs)?;
        if actions.shape() != mean.shape() {
            return Err(Error::shape(
                "gaussian log_prob actions",
                &mean.shape(),
                &actions.shape(),
            ));
        }
        Ok((0..mean.rows())
            .map(|r| {
                mean.row(r)
                    .iter()
                    .zip(actions.row(r))
                    .zip(&self.log_std)
                    .map(|((mu, a), ls)| {
                        let z = (a - mu) / ls.exp();
                        -0.5 * z * z - ls - 0.5 * LN_2PI
                    })
                    .sum()
            })
            .collect())
    }

    /// Gradient of `Σ_r dlogp[r] · log_prob(obs_r, a_r)` with respect to every parameter.
    pub fn log_prob_backward(
        &self,
        obs: &Matrix,
        actions: &Matrix,
        dlogp: &[f64],
    ) -> Result<GaussianActor> {
        if dlogp.len() != obs.rows() {
            return Err(Error::shape(
                "gaussian dlogp",
                &[obs.rows()],
                &[dlogp.len()],
            ));
        }
        let trace = self.mean_net.forward_trace(obs)?;
        let mean = trace.output();
        if actions.shape() != mean.shape() {
            return Err(Error::shape(
                "gaussian log_prob actions",
                &mean.shape(),
                &actions.shape(),
            ));
        }
        let mut dmean = Matrix::zeros(mean.rows(), mean.cols());
        let mut dlog_std = vec![0.0; self.log_std.len()];
        for r in 0..mean.rows() {
            for d in 0..mean.cols() {
                let sigma = self.log_std[d].exp();
                let diff = actions.get(r, d) - mean.get(r, d);
                let z = diff / sigma;
                dmean.set(r, d, dlogp[r] * diff / (sigma * sigma));
                dlog_std[d] += dlogp[r] * (z * z - 1.0);
            }
        }
        let (mean_grads, _) = self.mean_net.backward_from(&trace, &dmean)?;
        Ok(GaussianActor {
            mean_net: mean_grads,
            log_std: dlog_std,
        })
    }
}

impl ParamArrays for GaussianActor {
    fn arrays(&self) -> Vec<&[f64]> {
        let mut a = self.mean_net.arrays();
        a.push(&self.log_std);
        a
    }
    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut a = self.mean_net.arrays_mut();
        a.push(&mut self.log_std);
        a
    }
    fn array_shape(&self, i: usize) -> Vec<usize> {
        if i < 2 * self.mean_net.layers().len() {
            self.mean_net.array_shape(i)
        } else {
            vec![self.log_std.len()]
        }
    }
    fn array_name(&self, i: usize) -> String {
        if i < 2 * self.mean_net.layers().len() {
            format!("baseline actor {}", self.mean_net.array_name(i))
        } else {
            "baseline actor log_std".into()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub net: MlpParams,
}

impl Critic {
    pub fn init(obs_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        Self {
            net: MlpParams::init(&sizes(obs_dim, hidden, 1), rng),
        }
    }

    pub fn value(&self, obs: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.forward(obs)?.into_vec())
    }

    /// Gradient of `Σ_r dvalue[r] · V(obs_r)` with respect to the critic parameters.
    pub fn backward(&self, obs: &Matrix, dvalue: &[f64]) -> Result<MlpParams> {
        let cot = Matrix::from_vec(dvalue.len(), 1, dvalue.to_vec())?;
        Ok(self.net.backward(obs, &cot)?.0)
    }
}

impl ParamArrays for Critic {
    fn arrays(&self) -> Vec<&[f64]> {
        self.net.arrays()
    }
    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.arrays_mut()
    }
    fn array_shape(&self, i: usize) -> Vec<usize> {
        self.net.array_shape(i)
    }
    fn array_name(&self, i: usize) -> String {
        format!("critic {}", self.net.array_name(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_diff_gradient, max_relative_error};
    use crate::rng::{normal_matrix, stream, Stream};

    fn actor(seed: u64) -> GenerativeActor {
        GenerativeActor::init(3, 2, 2, &[16, 16], &mut stream(seed, Stream::ActorInit))
    }

    #[test]
    fn zero_actor_outputs_zero() {
        let a = GenerativeActor::from_net(MlpParams::zeros(&[3, 4, 2]), 1).unwrap();
        let obs = Matrix::from_rows(&[&[1.0]]);
        let noise = Matrix::from_rows(&[&[5.0, -3.0]]);
        assert_eq!(
            a.generate_action(&obs, &noise).unwrap().as_slice(),
            &[0.0, 0.0]
        );
    }

    #[test]
    fn noise_changes_action_deterministically() {
        let a = actor(0);
        let obs = Matrix::from_rows(&[&[0.1, 0.2, 0.3]]);
        let n1 = Matrix::from_rows(&[&[0.5, -1.0]]);
        let n2 = Matrix::from_rows(&[&[-0.7, 0.4]]);
        let a1 = a.generate_action(&obs, &n1).unwrap();
        assert_ne!(a1, a.generate_action(&obs, &n2).unwrap());
        assert_eq!(a1, a.generate_action(&obs, &n1).unwrap());
        assert!(a.generate_action(&obs, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn candidates_shapes_and_determinism() {
        let a = actor(1);
        let obs = normal_matrix(&mut stream(1, Stream::Synthetic(0)), 5, 3);
        let c = a
            .sample_candidates(&obs, 8, &mut stream(1, Stream::Candidates))
            .unwrap();
        assert_eq!(c.actions.shape(), [5, 8, 2]);
        let again = a
            .sample_candidates(&obs, 8, &mut stream(1, Stream::Candidates))
            .unwrap();
        assert_eq!(c.actions, again.actions);
        assert!(a
            .sample_candidates(&obs, 0, &mut stream(1, Stream::Candidates))
            .is_err());
    }

    #[test]
    fn single_candidate_equals_generate_action() {
        let a = actor(2);
        let obs = normal_matrix(&mut stream(2, Stream::Synthetic(0)), 3, 3);
        let c = a
            .sample_candidates(&obs, 1, &mut stream(2, Stream::Candidates))
            .unwrap();
        assert_eq!(c.actions.shape(), [3, 1, 2]);
        let noise = normal_matrix(&mut stream(2, Stream::Candidates), 3, 2);
        let direct = a.generate_action(&obs, &noise).unwrap();
        assert_eq!(c.actions.as_slice(), direct.as_slice());
    }

    #[test]
    fn candidate_noise_is_observation_local() {
        // Observation b's candidates use the b-th block of G noise rows, so they
        // match a standalone call that consumes the stream the same way.
        let a = actor(3);
        let obs = normal_matrix(&mut stream(3, Stream::Synthetic(0)), 2, 3);
        let c = a
            .sample_candidates(&obs, 4, &mut stream(3, Stream::Candidates))
            .unwrap();
        let mut rng = stream(3, Stream::Candidates);
        let _first = a
            .sample_candidates(&obs.select_rows(&[0]), 4, &mut rng)
            .unwrap();
        let second = a
            .sample_candidates(&obs.select_rows(&[1]), 4, &mut rng)
            .unwrap();
        assert_eq!(c.actions.item(1), second.actions.item(0));
        assert_ne!(c.actions.item(0), c.actions.item(1));
    }

    #[test]
    fn gaussian_log_prob_closed_forms() {
        let g = GaussianActor {
            mean_net: MlpParams::zeros(&[1, 1]),
            log_std: vec![0.0],
        };
        let obs = Matrix::from_rows(&[&[0.0], &[0.0]]);
        let acts = Matrix::from_rows(&[&[0.0], &[1.0]]);
        let lp = g.log_prob(&obs, &acts).unwrap();
        assert!((lp[0] + 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((lp[1] - (-0.5 - 0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_log_prob_matches_scalar_formula() {
        let mut rng = stream(4, Stream::BaselineInit);
        let mut g = GaussianActor::init(3, 2, &[8], &mut rng);
        g.log_std = vec![0.3, -0.4];
        let obs = normal_matrix(&mut rng, 6, 3);
        let acts = normal_matrix(&mut rng, 6, 2);
        let lp = g.log_prob(&obs, &acts).unwrap();
        let mean = g.mean(&obs).unwrap();
        for r in 0..6 {
            let mut expect = 0.0;
            for d in 0..2 {
                let s = g.log_std[d].exp();
                let z = (acts.get(r, d) - mean.get(r, d)) / s;
                expect += -(z * z) / 2.0 - s.ln() - (2.0 * core::f64::consts::PI).ln() / 2.0;
            }
            assert!((lp[r] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_log_prob_gradient_matches_fd() {
        let mut rng = stream(5, Stream::BaselineInit);
        let mut g = GaussianActor::init(3, 2, &[8], &mut rng);
        g.log_std = vec![0.2, -0.1];
        let obs = normal_matrix(&mut rng, 5, 3);
        let acts = normal_matrix(&mut rng, 5, 2);
        let w = [0.3, -1.0, 0.5, 2.0, -0.2];
        let analytic = g.log_prob_backward(&obs, &acts, &w).unwrap();
        let fd = finite_diff_gradient(
            |p: &GaussianActor| {
                p.log_prob(&obs, &acts)
                    .unwrap()
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| a * b)
                    .sum()
            },
            &g,
            1e-5,
        );
        let err = max_relative_error(&analytic.arrays().concat(), &fd.arrays().concat());
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn critic_values() {
        let z = Critic {
            net: MlpParams::zeros(&[4, 3, 1]),
        };
        assert_eq!(z.value(&Matrix::zeros(2, 4)).unwrap(), vec![0.0, 0.0]);

        let c = Critic::init(4, &[8, 8], &mut stream(6, Stream::CriticInit));
        let obs = normal_matrix(&mut stream(6, Stream::Synthetic(0)), 5, 4);
        let all = c.value(&obs).unwrap();
        for r in 0..5 {
            let one = c.value(&obs.select_rows(&[r])).unwrap();
            assert_eq!(one[0], all[r]);
        }
        // scalar-loop oracle
        let l = c.net.layers();
        for r in 0..5 {
            let x = obs.row(r);
            let h1: Vec<f64> = (0..8)
                .map(|o| (l[0].bias[o] + (0..4).map(|i| l[0].w(o, i) * x[i]).sum::<f64>()).tanh())
                .collect();
            let h2: Vec<f64> = (0..8)
                .map(|o| (l[1].bias[o] + (0..8).map(|i| l[1].w(o, i) * h1[i]).sum::<f64>()).tanh())
                .collect();
            let v = l[2].bias[0] + (0..8).map(|i| l[2].w(0, i) * h2[i]).sum::<f64>();
            assert!((v - all[r]).abs() < 1e-14);
        }
        assert!(c.value(&Matrix::zeros(1, 3)).is_err());
    }
}
