use anyhow::Result;
use podpo_core::envs;
use podpo_core::gradcheck::{self, GradCheckSetup, SuiteReport};
use podpo_core::nn::{MlpParams, ParamArrays};
use podpo_core::tensor::Matrix;
use podpo_core::trainer::TrainConfig;

pub fn setup_for(cfg: &TrainConfig) -> GradCheckSetup {
    let action_dim = envs::action_dim(cfg.env);
    GradCheckSetup {
        obs_dim: envs::obs_dim(cfg.env),
        action_dim,
        noise_dim: cfg.noise_dim.unwrap_or(action_dim),
        hidden: cfg.hidden.clone(),
        seed: cfg.seed,
    }
}

fn sign_flipped(p: &MlpParams, x: &Matrix, cot: &Matrix) -> podpo_core::Result<MlpParams> {
    let mut g = p.backward(x, cot)?.0;
    for a in g.arrays_mut() {
        for v in a.iter_mut() {
            *v = -*v;
        }
    }
    Ok(g)
}

/// Runs every suite. `corrupt_backward` swaps the MLP backward pass for a
/// sign-flipped one, which must be reported as a failure.
pub fn run(cfg: &TrainConfig, corrupt_backward: bool) -> Result<Vec<SuiteReport>> {
    let setup = setup_for(cfg);
    let mut reports = gradcheck::run_all(&setup)?;
    if corrupt_backward {
        reports[0] = gradcheck::check_mlp_with(&setup, &sign_flipped)?;
    }
    Ok(reports)
}

pub fn render(reports: &[SuiteReport]) -> String {
    let mut s = format!(
        "{:<14} {:>14} {:>8}  status\n",
        "suite", "max_rel_error", "params"
    );
    for r in reports {
        s += &format!(
            "{:<14} {:>14.3e} {:>8}  {}\n",
            r.name,
            r.max_rel_error,
            r.checked,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    s
}
