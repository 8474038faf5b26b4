//! Multi-temperature adaptive contrastive drifting field.
//!
//! For each batch item, `G` candidate points `x` are attracted toward the
//! positive targets `y_pos` and repelled from the negative targets `y_neg`.
//! Attraction and repulsion weights come from a dual softmax (over targets and
//! over candidates) of negative scaled distances, evaluated at several
//! temperatures and summed without normalization.
//!
//! Steps, per call:
//!
//! 1. Euclidean distances `d_pos` (`B×G×N`) and `d_neg` (`B×G×M`).
//! 2. If `mask_self` and `G == M`, add [`MASK_OFFSET`] to the diagonal of `d_neg`.
//! 3. One scale shared by every temperature: the mean of all distances below
//!    [`MASK_THRESHOLD`] across the whole batch, floored at [`SCALE_FLOOR`].
//! 4. Per temperature `τ`: logits `-d/τ/scale`, `A = sqrt(softmax_targets ⊙ softmax_candidates)`,
//!    `W_pos = A_pos · ΣA_neg`, `W_neg = A_neg · ΣA_pos`, `V_τ = W_pos·y_pos − W_neg·y_neg`.
//! 5. `V = Σ_τ V_τ`.
//!
//! The field is a constant as far as training is concerned: nothing here is
//! differentiated.

use alloc::vec;
use alloc::vec::Vec;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;

use crate::tensor::{Matrix, Tensor3};
use crate::{Error, Result};

pub const DEFAULT_TEMPERATURES: [f64; 3] = [0.02, 0.15, 2.0];
/// Added to candidate-to-self distances when masking.
pub const MASK_OFFSET: f64 = 1e6;
/// Distances at or above this are treated as masked (excluded from the scale).
pub const MASK_THRESHOLD: f64 = 1e5;
pub const SCALE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DriftInputs {
    /// Candidates, `B×G×D`.
    pub x: Tensor3,
    /// Positive targets, `B×N×D`.
    pub y_pos: Tensor3,
    /// Negative targets, `B×M×D`.
    pub y_neg: Tensor3,
    pub temps: Vec<f64>,
    pub mask_self: bool,
}

impl DriftInputs {
    pub fn new(
        x: Tensor3,
        y_pos: Tensor3,
        y_neg: Tensor3,
        temps: Vec<f64>,
        mask_self: bool,
    ) -> Result<Self> {
        let inputs = Self {
            x,
            y_pos,
            y_neg,
            temps,
            mask_self,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// The per-observation contrastive set: one positive per observation and
    /// the candidates themselves as negatives, with self-masking.
    pub fn contrastive(x: Tensor3, y_pos: Tensor3, temps: Vec<f64>) -> Result<Self> {
        let y_neg = x.clone();
        Self::new(x, y_pos, y_neg, temps, true)
    }

    pub fn validate(&self) -> Result<()> {
        let [b, g, d] = self.x.shape();
        let [bp, n, dp] = self.y_pos.shape();
        let [bn, m, dn] = self.y_neg.shape();
        if bp != b || bn != b {
            return Err(Error::shape("drift inputs batch", &[b, b], &[bp, bn]));
        }
        if dp != d || dn != d {
            return Err(Error::shape("drift inputs point dim", &[d, d], &[dp, dn]));
        }
        if g == 0 {
            return Err(Error::TooFewSamples {
                context: "drift candidates",
                needed: 1,
                found: 0,
            });
        }
        if n == 0 || m == 0 {
            return Err(Error::TooFewSamples {
                context: "drift targets",
                needed: 1,
                found: n.min(m),
            });
        }
        if self.temps.is_empty() {
            return Err(Error::TooFewSamples {
                context: "drift temperatures",
                needed: 1,
                found: 0,
            });
        }
        if self.temps.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::Config {
                field: "temps",
                constraint: "every temperature must be finite and > 0",
            });
        }
        if !self.x.is_finite() {
            return Err(Error::NonFinite("drift candidates x".into()));
        }
        if !self.y_pos.is_finite() {
            return Err(Error::NonFinite("drift positives y_pos".into()));
        }
        if !self.y_neg.is_finite() {
            return Err(Error::NonFinite("drift negatives y_neg".into()));
        }
        Ok(())
    }

    fn masks(&self) -> bool {
        self.mask_self && self.x.n() == self.y_neg.n()
    }
}

/// Euclidean distances between every candidate and every target of the same
/// batch item: output `(b, g, n)` is stored as a `B×G×N` tensor.
pub fn pairwise_distances(x: &Tensor3, y: &Tensor3) -> Result<Tensor3> {
    if x.batch() != y.batch() || x.dim() != y.dim() {
        return Err(Error::shape(
            "pairwise_distances",
            &[x.batch(), x.dim()],
            &[y.batch(), y.dim()],
        ));
    }
    let mut out = Tensor3::zeros(x.batch(), x.n(), y.n());
    for b in 0..x.batch() {
        for g in 0..x.n() {
            let xp = x.point(b, g);
            let row = out.point_mut(b, g);
            for (k, d) in row.iter_mut().enumerate() {
                let yp = y.point(b, k);
                *d = xp
                    .iter()
                    .zip(yp)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
            }
        }
    }
    Ok(out)
}

/// Positive and negative distances after optional self-masking.
#[derive(Debug, Clone, PartialEq)]
pub struct Distances {
    pub pos: Tensor3,
    pub neg: Tensor3,
}

impl Distances {
    pub fn of(inputs: &DriftInputs) -> Result<Self> {
        inputs.validate()?;
        let pos = pairwise_distances(&inputs.x, &inputs.y_pos)?;
        let mut neg = pairwise_distances(&inputs.x, &inputs.y_neg)?;
        if inputs.masks() {
            for b in 0..neg.batch() {
                for g in 0..neg.n() {
                    neg.point_mut(b, g)[g] += MASK_OFFSET;
                }
            }
        }
        Ok(Self { pos, neg })
    }

    /// Mean of every unmasked distance in the batch, floored at [`SCALE_FLOOR`].
    pub fn adaptive_scale(&self) -> f64 {
        let (sum, count) = self
            .pos
            .as_slice()
            .iter()
            .chain(self.neg.as_slice())
            .filter(|&&d| d < MASK_THRESHOLD)
            .fold((0.0, 0usize), |(s, c), &d| (s + d, c + 1));
        if count == 0 {
            return SCALE_FLOOR;
        }
        (sum / count as f64).max(SCALE_FLOOR)
    }
}

/// Attraction (`pos`, `B×G×N`) and repulsion (`neg`, `B×G×M`) weights at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftWeights {
    pub pos: Tensor3,
    pub neg: Tensor3,
}

/// Scaled logits `-d/τ/scale` for one batch item, laid out `G × (N+M)`.
fn logits(dist: &Distances, b: usize, tau: f64, scale: f64) -> Matrix {
    let g = dist.pos.n();
    let n = dist.pos.dim();
    let m = dist.neg.dim();
    let mut out = Matrix::zeros(g, n + m);
    for i in 0..g {
        let row = out.row_mut(i);
        for (k, &d) in dist.pos.point(b, i).iter().enumerate() {
            row[k] = -(d / tau) / scale;
        }
        for (k, &d) in dist.neg.point(b, i).iter().enumerate() {
            row[n + k] = -(d / tau) / scale;
        }
    }
    out
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn drift_weights(dist: &Distances, scale: f64, tau: f64) -> DriftWeights {
    let bsz = dist.pos.batch();
    let g = dist.pos.n();
    let n = dist.pos.dim();
    let m = dist.neg.dim();
    let k_all = n + m;
    let mut w_pos = Tensor3::zeros(bsz, g, n);
    let mut w_neg = Tensor3::zeros(bsz, g, m);
    let mut col = vec![0.0; g];
    for b in 0..bsz {
        let lg = logits(dist, b, tau, scale);
        let mut over_targets = lg.clone();
        for i in 0..g {
            softmax_in_place(over_targets.row_mut(i));
        }
        let mut over_candidates = lg;
        for k in 0..k_all {
            for (i, c) in col.iter_mut().enumerate() {
                *c = over_candidates.get(i, k);
            }
            softmax_in_place(&mut col);
            for (i, &c) in col.iter().enumerate() {
                over_candidates.set(i, k, c);
            }
        }
        for i in 0..g {
            // A_k·ΣA_j taken as Σ sqrt(P_k·P_j) so that products of square
            // roots are never rounded twice; balanced cases come out exact.
            let p: Vec<f64> = over_targets
                .row(i)
                .iter()
                .zip(over_candidates.row(i))
                .map(|(r, c)| r * c)
                .collect();
            let (p_pos, p_neg) = p.split_at(n);
            for (w, &pk) in w_pos.point_mut(b, i).iter_mut().zip(p_pos) {
                *w = p_neg.iter().map(|pj| (pk * pj).sqrt()).sum();
            }
            for (w, &pk) in w_neg.point_mut(b, i).iter_mut().zip(p_neg) {
                *w = p_pos.iter().map(|pj| (pk * pj).sqrt()).sum();
            }
        }
    }
    DriftWeights {
        pos: w_pos,
        neg: w_neg,
    }
}

/// `V_τ = W_pos · y_pos − W_neg · y_neg`, contracting over the target index.
fn apply_weights(w: &DriftWeights, y_pos: &Tensor3, y_neg: &Tensor3, out: &mut Tensor3) {
    for b in 0..out.batch() {
        for g in 0..out.n() {
            let v = out.point_mut(b, g);
            for (k, &wk) in w.pos.point(b, g).iter().enumerate() {
                for (vd, yd) in v.iter_mut().zip(y_pos.point(b, k)) {
                    *vd += wk * yd;
                }
            }
            for (k, &wk) in w.neg.point(b, g).iter().enumerate() {
                for (vd, yd) in v.iter_mut().zip(y_neg.point(b, k)) {
                    *vd -= wk * yd;
                }
            }
        }
    }
}

/// Total drifting vector `Σ_τ V_τ`, shaped like `inputs.x`.
pub fn compute_v(inputs: &DriftInputs) -> Result<Tensor3> {
    let dist = Distances::of(inputs)?;
    let scale = dist.adaptive_scale();
    Ok(field(inputs, &dist, scale, None))
}

/// As [`compute_v`], but with the adaptive scale pinned by the caller.
pub fn compute_v_with_scale(inputs: &DriftInputs, scale: f64) -> Result<Tensor3> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Config {
            field: "scale",
            constraint: "must be finite and > 0",
        });
    }
    let dist = Distances::of(inputs)?;
    Ok(field(inputs, &dist, scale, None))
}

/// Total field plus each temperature's contribution, in `inputs.temps` order.
pub fn compute_v_per_temperature(inputs: &DriftInputs) -> Result<(Tensor3, Vec<Tensor3>)> {
    let dist = Distances::of(inputs)?;
    let scale = dist.adaptive_scale();
    let mut parts = Vec::with_capacity(inputs.temps.len());
    let total = field(inputs, &dist, scale, Some(&mut parts));
    Ok((total, parts))
}

fn field(
    inputs: &DriftInputs,
    dist: &Distances,
    scale: f64,
    mut parts: Option<&mut Vec<Tensor3>>,
) -> Tensor3 {
    let [b, g, d] = inputs.x.shape();
    let mut total = Tensor3::zeros(b, g, d);
    for &tau in &inputs.temps {
        let w = drift_weights(dist, scale, tau);
        let mut v_tau = Tensor3::zeros(b, g, d);
        apply_weights(&w, &inputs.y_pos, &inputs.y_neg, &mut v_tau);
        for (t, v) in total.as_mut_slice().iter_mut().zip(v_tau.as_slice()) {
            *t += v;
        }
        if let Some(parts) = parts.as_deref_mut() {
            parts.push(v_tau);
        }
    }
    total
}

/// `‖mean(v)‖² / mean(‖v‖²)` over the rows of `samples` (one drifting vector per row).
///
/// 1 for a deterministic vector, 0 for a zero-mean one. Returns 0 when every
/// sample is the zero vector.
pub fn relative_variance(samples: &Matrix) -> Result<f64> {
    if samples.rows() == 0 {
        return Err(Error::TooFewSamples {
            context: "relative_variance",
            needed: 1,
            found: 0,
        });
    }
    let s = samples.rows() as f64;
    let mut mean = vec![0.0; samples.cols()];
    let mut second = 0.0;
    for r in 0..samples.rows() {
        for (m, &v) in mean.iter_mut().zip(samples.row(r)) {
            *m += v;
            second += v * v;
        }
    }
    let mean_sq: f64 = mean.iter().map(|m| (m / s) * (m / s)).sum();
    let second = second / s;
    if second == 0.0 {
        return Ok(0.0);
    }
    Ok(mean_sq / second)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EssMetrics {
    pub ess_ratio: f64,
    pub max_p: f64,
}

/// Normalized effective sample size `1 / (K Σ p²)` and peak probability of
/// each candidate's softmax over its `K` unmasked targets at temperature `tau`,
/// averaged over candidates and batch items.
pub fn ess_metrics(inputs: &DriftInputs, tau: f64) -> Result<EssMetrics> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config {
            field: "temps",
            constraint: "every temperature must be finite and > 0",
        });
    }
    let dist = Distances::of(inputs)?;
    let scale = dist.adaptive_scale();
    Ok(ess_from_distances(&dist, scale, tau))
}

fn ess_from_distances(dist: &Distances, scale: f64, tau: f64) -> EssMetrics {
    let (mut ess_sum, mut max_sum, mut count) = (0.0, 0.0, 0usize);
    let mut logits = Vec::new();
    for b in 0..dist.pos.batch() {
        for g in 0..dist.pos.n() {
            logits.clear();
            logits.extend(
                dist.pos
                    .point(b, g)
                    .iter()
                    .chain(dist.neg.point(b, g))
                    .filter(|&&d| d < MASK_THRESHOLD)
                    .map(|&d| -(d / tau) / scale),
            );
            if logits.is_empty() {
                continue;
            }
            softmax_in_place(&mut logits);
            let k = logits.len() as f64;
            let sum_sq: f64 = logits.iter().map(|p| p * p).sum();
            ess_sum += 1.0 / (k * sum_sq);
            max_sum += logits.iter().copied().fold(0.0, f64::max);
            count += 1;
        }
    }
    if count == 0 {
        return EssMetrics {
            ess_ratio: 1.0,
            max_p: 1.0,
        };
    }
    EssMetrics {
        ess_ratio: ess_sum / count as f64,
        max_p: max_sum / count as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TemperatureDiagnostics {
    pub tau: f64,
    pub ess_ratio: f64,
    pub max_p: f64,
    pub rv: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftDiagnostics {
    pub per_temperature: Vec<TemperatureDiagnostics>,
    pub rv_total: f64,
}

/// RV of the total and per-temperature fields (pooling all `B·G` candidate
/// vectors as the sample) and ESS / Max_p per temperature.
pub fn diagnose(inputs: &DriftInputs) -> Result<DriftDiagnostics> {
    let dist = Distances::of(inputs)?;
    let scale = dist.adaptive_scale();
    let mut parts = Vec::with_capacity(inputs.temps.len());
    let total = field(inputs, &dist, scale, Some(&mut parts));
    let rv_total = relative_variance(&total.into_matrix())?;
    let mut per_temperature = Vec::with_capacity(parts.len());
    for (&tau, v) in inputs.temps.iter().zip(parts) {
        let ess = ess_from_distances(&dist, scale, tau);
        per_temperature.push(TemperatureDiagnostics {
            tau,
            ess_ratio: ess.ess_ratio,
            max_p: ess.max_p,
            rv: relative_variance(&v.into_matrix())?,
        });
    }
    Ok(DriftDiagnostics {
        per_temperature,
        rv_total,
    })
}
