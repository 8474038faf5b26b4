//! Scalar losses and their gradients with respect to the quantities the
//! networks produce (candidate actions, values, log-densities).

use alloc::vec;
use alloc::vec::Vec;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;

use crate::tensor::Tensor3;
use crate::{Error, Result};

/// Per-observation weight of the drifting loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftWeighting {
    pub beta: f64,
    /// When off, every positive observation gets weight 1.
    pub advantage_weighting: bool,
}

impl DriftWeighting {
    /// `β|Â|`, or 1 with weighting disabled.
    pub fn weight(&self, adv: f64) -> f64 {
        if self.advantage_weighting {
            self.beta * adv.abs()
        } else {
            1.0
        }
    }
}

/// Advantage-weighted squared distance between candidates and their frozen
/// drifting targets `x + V`:
///
/// `L = (1/B) Σ_b w_b (1/G) Σ_g ‖x_bg − target_bg‖²`
///
/// Returns the loss and `dL/dx` (same shape as `x`). The target is a constant,
/// so the gradient is `2 w_b / (B G) · (x − target)`.
pub fn drifting_loss(
    x: &Tensor3,
    v: &Tensor3,
    adv: &[f64],
    weighting: DriftWeighting,
) -> Result<(f64, Tensor3)> {
    if x.shape() != v.shape() {
        return Err(Error::shape("drifting_loss V", &x.shape(), &v.shape()));
    }
    if adv.len() != x.batch() {
        return Err(Error::shape(
            "drifting_loss advantages",
            &[x.batch()],
            &[adv.len()],
        ));
    }
    let [b, g, _] = x.shape();
    let mut grad = Tensor3::zeros(b, g, x.dim());
    if b == 0 {
        return Ok((0.0, grad));
    }
    let mut loss = 0.0;
    for bi in 0..b {
        let w = weighting.weight(adv[bi]);
        let coef = 2.0 * w / (b * g) as f64;
        let mut sq = 0.0;
        for gi in 0..g {
            let xp = x.point(bi, gi);
            let vp = v.point(bi, gi);
            let out = grad.point_mut(bi, gi);
            for ((o, &xv), &vv) in out.iter_mut().zip(xp).zip(vp) {
                let target = xv + vv;
                let diff = xv - target;
                sq += diff * diff;
                *o = coef * diff;
            }
        }
        loss += w * sq / g as f64;
    }
    Ok((loss / b as f64, grad))
}

/// PPO clipped value loss `c_v · mean max((v − R)², (v_old + clip(v − v_old, ±ε) − R)²)`
/// and its gradient with respect to `v_new`.
pub fn value_loss_clipped(
    v_new: &[f64],
    v_old: &[f64],
    returns: &[f64],
    clip: f64,
    coef: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = v_new.len();
    if v_old.len() != n || returns.len() != n {
        return Err(Error::shape(
            "value_loss_clipped",
            &[n, n],
            &[v_old.len(), returns.len()],
        ));
    }
    let mut grad = vec![0.0; n];
    if n == 0 {
        return Ok((0.0, grad));
    }
    let scale = coef / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let delta = v_new[i] - v_old[i];
        let clipped = v_old[i] + delta.clamp(-clip, clip);
        let plain_err = v_new[i] - returns[i];
        let clip_err = clipped - returns[i];
        let (a, b) = (plain_err * plain_err, clip_err * clip_err);
        if a >= b {
            total += a;
            grad[i] = scale * 2.0 * plain_err;
        } else {
            total += b;
            // The clipped branch only moves with v_new inside the clip window.
            grad[i] = if delta.abs() < clip {
                scale * 2.0 * clip_err
            } else {
                0.0
            };
        }
    }
    Ok((total * scale, grad))
}

/// Negative PPO clipped surrogate, `−mean min(r Â, clip(r, 1 ± ε) Â)` with
/// `r = exp(logp_new − logp_old)`, and its gradient with respect to `logp_new`.
pub fn ppo_surrogate_loss(
    logp_new: &[f64],
    logp_old: &[f64],
    adv: &[f64],
    clip_eps: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = logp_new.len();
    if logp_old.len() != n || adv.len() != n {
        return Err(Error::shape(
            "ppo_surrogate_loss",
            &[n, n],
            &[logp_old.len(), adv.len()],
        ));
    }
    let mut grad = vec![0.0; n];
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    for i in 0..n {
        let ratio = (logp_new[i] - logp_old[i]).exp();
        let unclipped = ratio * adv[i];
        let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv[i];
        if unclipped <= clipped {
            total += unclipped;
            grad[i] = -unclipped / n as f64;
        } else {
            total += clipped;
        }
    }
    Ok((-total / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{central_difference, max_relative_error};

    fn t3(b: usize, g: usize, d: usize, v: &[f64]) -> Tensor3 {
        Tensor3::from_vec(b, g, d, v.to_vec()).unwrap()
    }

    const WEIGHTED: DriftWeighting = DriftWeighting {
        beta: 0.1,
        advantage_weighting: true,
    };

    #[test]
    fn zero_field_gives_zero_loss() {
        let x = t3(2, 3, 2, &[0.3; 12]);
        let (l, g) = drifting_loss(&x, &Tensor3::zeros(2, 3, 2), &[1.0, 2.0], WEIGHTED).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn drifting_loss_hand_case() {
        let (l, g) =
            drifting_loss(&t3(1, 1, 1, &[0.0]), &t3(1, 1, 1, &[2.0]), &[1.0], WEIGHTED).unwrap();
        assert!((l - 0.4).abs() < 1e-15);
        assert!((g.as_slice()[0] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn weighting_off_uses_unit_weight() {
        let off = DriftWeighting {
            beta: 0.1,
            advantage_weighting: false,
        };
        assert_eq!(off.weight(3.7), 1.0);
        // |Â| = Â on positives
        assert_eq!(WEIGHTED.weight(2.5), 0.1 * 2.5);
        let (l, _) =
            drifting_loss(&t3(1, 1, 1, &[0.0]), &t3(1, 1, 1, &[2.0]), &[7.0], off).unwrap();
        assert!((l - 4.0).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_zero() {
        let (l, g) = drifting_loss(
            &Tensor3::zeros(0, 8, 2),
            &Tensor3::zeros(0, 8, 2),
            &[],
            WEIGHTED,
        )
        .unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().is_empty());
    }

    #[test]
    fn value_loss_cases() {
        let (l, _) = value_loss_clipped(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0], 0.2, 0.5).unwrap();
        assert_eq!(l, 0.0);
        let (l, g) = value_loss_clipped(&[1.0], &[0.0], &[0.0], 0.2, 0.5).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        assert!((g[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn value_loss_gradient_including_clip_edges() {
        let eps = 0.2;
        let v_old = [0.0; 8];
        let v_new = [
            eps + 1e-3,
            eps - 1e-3,
            -eps + 1e-3,
            -eps - 1e-3,
            0.7,
            -0.4,
            0.05,
            0.5,
        ];
        let returns = [1.0, -1.0, 1.0, -1.0, 0.1, 0.3, -0.2, 2.0];
        let (_, g) = value_loss_clipped(&v_new, &v_old, &returns, eps, 0.5).unwrap();
        let fd = central_difference(
            |v| value_loss_clipped(v, &v_old, &returns, eps, 0.5).unwrap().0,
            &v_new,
            1e-6,
        );
        assert!(max_relative_error(&g, &fd) < 1e-4, "{g:?} vs {fd:?}");
    }

    #[test]
    fn surrogate_cases() {
        let (l, _) = ppo_surrogate_loss(&[0.3, -0.2], &[0.3, -0.2], &[1.0, 3.0], 0.2).unwrap();
        assert!((l + 2.0).abs() < 1e-15);
        // r = 1.5, Â = 1 → min(1.5, 1.2) = 1.2
        let (l, g) = ppo_surrogate_loss(&[1.5f64.ln()], &[0.0], &[1.0], 0.2).unwrap();
        assert!((l + 1.2).abs() < 1e-12);
        assert_eq!(g[0], 0.0);
        // r = 0.5, Â = −1 → min(−0.5, −0.8) = −0.8
        let (l, _) = ppo_surrogate_loss(&[0.5f64.ln()], &[0.0], &[-1.0], 0.2).unwrap();
        assert!((l - 0.8).abs() < 1e-12);
    }

    #[test]
    fn surrogate_gradient_matches_fd() {
        let ratios = [0.5, 0.79, 0.81, 1.0, 1.19, 1.21, 1.5, 0.9];
        let adv = [1.0, -1.0, 0.5, -0.3, 2.0, -2.0, -1.0, 1.5];
        let old = [0.1; 8];
        let new: Vec<f64> = ratios.iter().map(|r: &f64| 0.1 + r.ln()).collect();
        let (_, g) = ppo_surrogate_loss(&new, &old, &adv, 0.2).unwrap();
        let fd = central_difference(
            |lp| ppo_surrogate_loss(lp, &old, &adv, 0.2).unwrap().0,
            &new,
            1e-6,
        );
        assert!(max_relative_error(&g, &fd) < 1e-4, "{g:?} vs {fd:?}");
    }
}
