use alloc::vec;
use alloc::vec::Vec;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;

use super::ParamArrays;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Adam moments shaped like the parameter arrays they update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamArrays + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let lens: Vec<usize> = params.arrays().iter().map(|a| a.len()).collect();
        Self {
            config,
            step: 0,
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One bias-corrected Adam update.
    ///
    /// Gradients are validated before anything is touched: a non-finite entry
    /// aborts the step and names the array it came from. Nothing is clipped.
    pub fn step<P: ParamArrays + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        if !(self.config.lr > 0.0) {
            return Err(Error::Config {
                field: "lr",
                constraint: "must be > 0",
            });
        }
        let g = grads.arrays();
        if g.len() != self.m.len() {
            return Err(Error::shape(
                "adam step array count",
                &[self.m.len()],
                &[g.len()],
            ));
        }
        for (i, (ga, ma)) in g.iter().zip(&self.m).enumerate() {
            if ga.len() != ma.len() {
                return Err(Error::shape(
                    "adam step array length",
                    &[ma.len()],
                    &[ga.len()],
                ));
            }
            if ga.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(alloc::format!(
                    "gradient array `{}`",
                    grads.array_name(i)
                )));
            }
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .arrays_mut()
            .into_iter()
            .zip(g)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, MlpParams};
    use crate::rng::{stream, Stream};

    fn scalar(x: f64) -> MlpParams {
        MlpParams::new(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            weight: vec![x],
            bias: vec![0.0],
        }])
        .unwrap()
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = MlpParams::init(&[3, 4, 2], &mut stream(0, Stream::ActorInit));
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let g = p.zeros_like();
        for _ in 0..3 {
            st.step(&mut p, &g).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step, 3);
    }

    #[test]
    fn first_step_has_unit_magnitude() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(&p, AdamConfig::with_lr(0.1));
        let g = scalar(1.0);
        st.step(&mut p, &g).unwrap();
        assert!((p.layers()[0].weight[0] + 0.1).abs() < 1e-8);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn quadratic_descends_like_reference() {
        // Hand-rolled scalar Adam on f(x) = x², x0 = 1.
        let cfg = AdamConfig::with_lr(0.1);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            let g = 2.0 * x;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!(x.abs() < 1.0);

        let mut p = scalar(1.0);
        let mut st = AdamState::new(&p, cfg);
        for _ in 0..3 {
            let g = scalar(2.0 * p.layers()[0].weight[0]);
            st.step(&mut p, &g).unwrap();
        }
        let got = p.layers()[0].weight[0];
        assert!((got - x).abs() < 1e-15, "{got} vs {x}");
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut p = MlpParams::zeros(&[2, 3, 1]);
        let mut g = p.zeros_like();
        g.layers_mut()[1].bias[0] = f64::NAN;
        let mut st = AdamState::new(&p, AdamConfig::default());
        let err = st.step(&mut p, &g).unwrap_err();
        assert_eq!(
            err,
            Error::NonFinite("gradient array `layer 1 bias`".into())
        );
        assert_eq!(st.step, 0);
        assert_eq!(p, MlpParams::zeros(&[2, 3, 1]));
    }
}
