//! Central finite differences, used as an independent oracle for every analytic gradient.

use alloc::vec::Vec;

use super::ParamArrays;

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<F>(mut f: F, x: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let hi = f(&probe);
        probe[i] = x[i] - eps;
        let lo = f(&probe);
        probe[i] = x[i];
        out.push((hi - lo) / (2.0 * eps));
    }
    out
}

/// Central-difference gradient of a scalar function of a parameter set,
/// returned in the same layout as `params`.
pub fn finite_diff_gradient<P, F>(mut f: F, params: &P, eps: f64) -> P
where
    P: ParamArrays + Clone,
    F: FnMut(&P) -> f64,
{
    let mut probe = params.clone();
    let mut grad = params.clone();
    let n_arrays = params.arrays().len();
    for a in 0..n_arrays {
        let len = params.arrays()[a].len();
        for i in 0..len {
            let x0 = params.arrays()[a][i];
            probe.arrays_mut()[a][i] = x0 + eps;
            let hi = f(&probe);
            probe.arrays_mut()[a][i] = x0 - eps;
            let lo = f(&probe);
            probe.arrays_mut()[a][i] = x0;
            grad.arrays_mut()[a][i] = (hi - lo) / (2.0 * eps);
        }
    }
    grad
}

/// Magnitudes below this are treated as absolute rather than relative error.
const REL_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(REL_FLOOR);
    (a - b).abs() / denom
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}
