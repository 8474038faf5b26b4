//! Finite-difference checks for every analytic gradient used in training.
//!
//! Each suite compares an analytic gradient against central differences
//! (step 1e-5) and reports the worst relative error. The `*_with` variants
//! take the analytic gradient as a closure so a deliberately broken backward
//! pass can be plugged in to prove the harness catches it.

use alloc::vec;
use alloc::vec::Vec;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;

use crate::drift::{self, DriftInputs};
use crate::nn::{finite_diff_gradient, max_relative_error, MlpParams, ParamArrays};
use crate::policy::{Critic, GaussianActor, GenerativeActor};
use crate::rng::{normal_matrix, stream, Stream};
use crate::rollout::PositiveBatch;
use crate::tensor::{Matrix, Tensor3};
use crate::trainer::{
    drift_actor_gradient, drifting_loss, ppo_surrogate_loss, value_loss_clipped, DriftSettings,
    DriftWeighting,
};
use crate::Result;

pub const FD_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuiteReport {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
    pub passed: bool,
}

impl SuiteReport {
    fn new(name: &'static str, analytic: &[f64], numeric: &[f64]) -> Self {
        let max_rel_error = max_relative_error(analytic, numeric);
        Self {
            name,
            max_rel_error,
            checked: analytic.len(),
            passed: max_rel_error <= TOLERANCE,
        }
    }
}

/// Network shapes and seed for the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSetup {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

pub type MlpBackward<'a> = &'a dyn Fn(&MlpParams, &Matrix, &Matrix) -> Result<MlpParams>;

fn exact_backward(p: &MlpParams, x: &Matrix, cot: &Matrix) -> Result<MlpParams> {
    Ok(p.backward(x, cot)?.0)
}

pub fn run_all(setup: &GradCheckSetup) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        check_mlp(setup)?,
        check_drifting_loss(setup)?,
        check_value_loss(setup)?,
        check_surrogate(setup)?,
    ])
}

pub fn check_mlp(setup: &GradCheckSetup) -> Result<SuiteReport> {
    check_mlp_with(setup, &exact_backward)
}

/// Parameter gradient of `Σ output ⊙ cotangent` for the actor-shaped network.
pub fn check_mlp_with(setup: &GradCheckSetup, backward: MlpBackward<'_>) -> Result<SuiteReport> {
    let mut rng = stream(setup.seed, Stream::Synthetic(100));
    let mut sizes = vec![setup.obs_dim + setup.noise_dim];
    sizes.extend_from_slice(&setup.hidden);
    sizes.push(setup.action_dim);
    let p = MlpParams::init(&sizes, &mut rng);
    let x = normal_matrix(&mut rng, 4, sizes[0]);
    let cot = normal_matrix(&mut rng, 4, setup.action_dim);
    let analytic = backward(&p, &x, &cot)?;
    let numeric = finite_diff_gradient(
        |q: &MlpParams| {
            let y = q.forward(&x).expect("shapes fixed above");
            y.as_slice()
                .iter()
                .zip(cot.as_slice())
                .map(|(a, b)| a * b)
                .sum()
        },
        &p,
        FD_STEP,
    );
    Ok(SuiteReport::new(
        "mlp",
        &analytic.arrays().concat(),
        &numeric.arrays().concat(),
    ))
}

/// Full actor pipeline: candidates → field (frozen at the base point) → loss.
pub fn check_drifting_loss(setup: &GradCheckSetup) -> Result<SuiteReport> {
    let mut rng = stream(setup.seed, Stream::Synthetic(101));
    let actor = GenerativeActor::init(
        setup.obs_dim,
        setup.noise_dim,
        setup.action_dim,
        &setup.hidden,
        &mut rng,
    );
    let b = 3;
    let obs = normal_matrix(&mut rng, b, setup.obs_dim);
    let actions = normal_matrix(&mut rng, b, setup.action_dim);
    let batch = PositiveBatch {
        obs,
        actions,
        adv: vec![0.4, 1.3, 2.2],
        indices: (0..b).collect(),
    };
    let settings = DriftSettings {
        num_candidates: 4,
        temps: drift::DEFAULT_TEMPERATURES.to_vec(),
        weighting: DriftWeighting {
            beta: 0.1,
            advantage_weighting: true,
        },
    };
    let cand_seed = stream(setup.seed, Stream::Candidates);
    let step = drift_actor_gradient(&actor, &batch, &settings, &mut cand_seed.clone())?;
    let field = step.field.clone();
    let numeric = finite_diff_gradient(
        |net: &MlpParams| {
            // Same noise, same frozen V: only x moves with the parameters.
            let probe = GenerativeActor {
                net: net.clone(),
                ..actor.clone()
            };
            let c = probe
                .sample_candidates(&batch.obs, settings.num_candidates, &mut cand_seed.clone())
                .expect("shapes fixed above");
            frozen_target_loss(&c.actions, &step, &field, &batch.adv, settings.weighting)
        },
        &actor.net,
        FD_STEP,
    );
    Ok(SuiteReport::new(
        "drifting_loss",
        &step.grads.arrays().concat(),
        &numeric.arrays().concat(),
    ))
}

fn frozen_target_loss(
    x: &Tensor3,
    base: &crate::trainer::DriftStep,
    field: &Tensor3,
    adv: &[f64],
    weighting: DriftWeighting,
) -> f64 {
    let base_x = &base.inputs.as_ref().expect("non-empty batch").x;
    let [b, g, _] = x.shape();
    let mut loss = 0.0;
    for bi in 0..b {
        let mut sq = 0.0;
        for gi in 0..g {
            for ((xv, x0), v) in x
                .point(bi, gi)
                .iter()
                .zip(base_x.point(bi, gi))
                .zip(field.point(bi, gi))
            {
                let target = x0 + v;
                sq += (xv - target).powi(2);
            }
        }
        loss += weighting.weight(adv[bi]) * sq / g as f64;
    }
    loss / b as f64
}

/// Critic gradient of the clipped value loss, with samples placed on both
/// sides of each clip boundary (`v_new − v_old = ±(ε ± 1e-3)`).
pub fn check_value_loss(setup: &GradCheckSetup) -> Result<SuiteReport> {
    let mut rng = stream(setup.seed, Stream::Synthetic(102));
    let critic = Critic::init(setup.obs_dim, &setup.hidden, &mut rng);
    let eps = 0.2;
    let offsets = [eps + 1e-3, eps - 1e-3, -eps + 1e-3, -eps - 1e-3, 0.5, -0.05];
    let obs = normal_matrix(&mut rng, offsets.len(), setup.obs_dim);
    let v0 = critic.value(&obs)?;
    let v_old: Vec<f64> = v0.iter().zip(&offsets).map(|(v, o)| v - o).collect();
    let returns: Vec<f64> = v0
        .iter()
        .enumerate()
        .map(|(i, v)| v + if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let (_, dv) = value_loss_clipped(&v0, &v_old, &returns, eps, 0.5)?;
    let analytic = critic.backward(&obs, &dv)?;
    let numeric = finite_diff_gradient(
        |c: &Critic| {
            let v = c.value(&obs).expect("shapes fixed above");
            value_loss_clipped(&v, &v_old, &returns, eps, 0.5)
                .expect("lengths match")
                .0
        },
        &critic,
        FD_STEP,
    );
    Ok(SuiteReport::new(
        "value_loss",
        &analytic.arrays().concat(),
        &numeric.arrays().concat(),
    ))
}

/// Gaussian actor gradient of the clipped surrogate, with ratios on both
/// sides of `1 ± ε`.
pub fn check_surrogate(setup: &GradCheckSetup) -> Result<SuiteReport> {
    let mut rng = stream(setup.seed, Stream::Synthetic(103));
    let mut actor = GaussianActor::init(setup.obs_dim, setup.action_dim, &setup.hidden, &mut rng);
    for (i, ls) in actor.log_std.iter_mut().enumerate() {
        *ls = 0.1 * i as f64 - 0.2;
    }
    let ratios = [0.5, 0.79, 0.81, 1.0, 1.19, 1.21, 1.5];
    let adv = [1.0, -1.0, 0.7, -0.4, 1.2, -2.0, -0.6];
    let obs = normal_matrix(&mut rng, ratios.len(), setup.obs_dim);
    let actions = normal_matrix(&mut rng, ratios.len(), setup.action_dim);
    let lp0 = actor.log_prob(&obs, &actions)?;
    let lp_old: Vec<f64> = lp0.iter().zip(&ratios).map(|(l, r)| l - r.ln()).collect();
    let (_, dlogp) = ppo_surrogate_loss(&lp0, &lp_old, &adv, 0.2)?;
    let analytic = actor.log_prob_backward(&obs, &actions, &dlogp)?;
    let numeric = finite_diff_gradient(
        |a: &GaussianActor| {
            let lp = a.log_prob(&obs, &actions).expect("shapes fixed above");
            ppo_surrogate_loss(&lp, &lp_old, &adv, 0.2)
                .expect("lengths match")
                .0
        },
        &actor,
        FD_STEP,
    );
    Ok(SuiteReport::new(
        "surrogate",
        &analytic.arrays().concat(),
        &numeric.arrays().concat(),
    ))
}

/// Drifting loss evaluated directly on candidate points, for callers that
/// want the loss without a network (e.g. the equilibrium check).
pub fn drifting_loss_at(
    inputs: &DriftInputs,
    adv: &[f64],
    weighting: DriftWeighting,
) -> Result<f64> {
    let v = drift::compute_v(inputs)?;
    Ok(drifting_loss(&inputs.x, &v, adv, weighting)?.0)
}
