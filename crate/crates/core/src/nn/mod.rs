//! Dense feedforward networks with exact analytic gradients.
//!
//! Hidden layers use `tanh`, the output layer is linear. Weights are stored
//! row-major as `out × in`. Batches are [`Matrix`] values with one sample per
//! row, and every row is processed independently.

mod adam;
mod finite_diff;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// Unused whenever std is linked and the inherent float methods take over.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;

use crate::rng::Rng;
use crate::tensor::Matrix;
use crate::{Error, Result};

pub use adam::{AdamConfig, AdamState};
pub use finite_diff::{
    central_difference, finite_diff_gradient, max_relative_error, relative_error,
};

/// Anything that exposes its parameters as an ordered list of flat arrays.
///
/// Optimizers, gradient checks and checkpointing all walk this list, so the
/// order must be stable and gradients must use the same layout as parameters.
pub trait ParamArrays {
    fn arrays(&self) -> Vec<&[f64]>;
    fn arrays_mut(&mut self) -> Vec<&mut [f64]>;
    /// Logical shape of array `i` (row-major).
    fn array_shape(&self, i: usize) -> Vec<usize>;
    fn array_name(&self, i: usize) -> String;

    fn num_params(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// One affine layer: `y = W x + b` with `W` of shape `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn w(&self, o: usize, i: usize) -> f64 {
        self.weight[o * self.in_dim + i]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Intermediate activations of a forward pass, reused by [`MlpParams::backward_from`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `acts[k]` is the input to layer `k`; the last entry is the network output.
    acts: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("trace always holds the input")
    }

    pub fn into_output(mut self) -> Matrix {
        self.acts.pop().expect("trace always holds the input")
    }
}

impl MlpParams {
    /// Validates that layer shapes compose and every value is finite.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("MlpParams::new layer count", &[1], &[0]));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.weight.len() != l.in_dim * l.out_dim {
                return Err(Error::shape(
                    "MlpParams::new weight",
                    &[l.out_dim, l.in_dim],
                    &[l.weight.len()],
                ));
            }
            if l.bias.len() != l.out_dim {
                return Err(Error::shape(
                    "MlpParams::new bias",
                    &[l.out_dim],
                    &[l.bias.len()],
                ));
            }
            if k + 1 < layers.len() && layers[k + 1].in_dim != l.out_dim {
                return Err(Error::shape(
                    "MlpParams::new layer composition",
                    &[l.out_dim],
                    &[layers[k + 1].in_dim],
                ));
            }
        }
        let p = Self { layers };
        if !p.is_finite() {
            return Err(Error::NonFinite("MlpParams::new".into()));
        }
        Ok(p)
    }

    /// All-zero network with the given layer widths `[in, hidden.., out]`.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Self {
        let mut p = Self::zeros(sizes);
        for l in &mut p.layers {
            let limit = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            for w in &mut l.weight {
                *w = rng.random_range(-limit..limit);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Layer widths `[in, hidden.., out]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.out_dim));
        s
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward_trace(input)?.into_output())
    }

    pub fn forward_trace(&self, input: &Matrix) -> Result<ForwardTrace> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape(
                "mlp forward input width",
                &[self.input_dim()],
                &[input.cols()],
            ));
        }
        if !input.is_finite() {
            return Err(Error::NonFinite("mlp forward input".into()));
        }
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.clone());
        for (k, layer) in self.layers.iter().enumerate() {
            let h = &acts[k];
            let mut out = Matrix::zeros(h.rows(), layer.out_dim);
            for r in 0..h.rows() {
                let x = h.row(r);
                let y = out.row_mut(r);
                for (o, y) in y.iter_mut().enumerate() {
                    let w = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let z = layer.bias[o] + dot(w, x);
                    *y = if k == last { z } else { z.tanh() };
                }
            }
            acts.push(out);
        }
        Ok(ForwardTrace { acts })
    }

    /// Gradients of `sum(output ⊙ output_grad)` with respect to the parameters and the input.
    pub fn backward(&self, input: &Matrix, output_grad: &Matrix) -> Result<(MlpParams, Matrix)> {
        let trace = self.forward_trace(input)?;
        self.backward_from(&trace, output_grad)
    }

    pub fn backward_from(
        &self,
        trace: &ForwardTrace,
        output_grad: &Matrix,
    ) -> Result<(MlpParams, Matrix)> {
        let out = trace.output();
        if output_grad.shape() != out.shape() {
            return Err(Error::shape(
                "mlp backward output_grad",
                &out.shape(),
                &output_grad.shape(),
            ));
        }
        let mut grads = self.zeros_like();
        // `delta` holds d/dz for the pre-activation of the current layer.
        let mut delta = output_grad.clone();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let h = &trace.acts[k];
            let g = &mut grads.layers[k];
            for r in 0..h.rows() {
                let d = delta.row(r);
                let x = h.row(r);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    g.bias[o] += dv;
                    let gw = &mut g.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (gw, &xv) in gw.iter_mut().zip(x) {
                        *gw += dv * xv;
                    }
                }
            }
            let mut dh = Matrix::zeros(h.rows(), layer.in_dim);
            for r in 0..h.rows() {
                let d = delta.row(r);
                let out_row = dh.row_mut(r);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let w = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (acc, &wv) in out_row.iter_mut().zip(w) {
                        *acc += dv * wv;
                    }
                }
            }
            if k > 0 {
                // h is tanh output of layer k-1
                for (dv, &hv) in dh.as_mut_slice().iter_mut().zip(h.as_slice()) {
                    *dv *= 1.0 - hv * hv;
                }
            }
            delta = dh;
        }
        Ok((grads, delta))
    }

    /// Adds `other` into `self`, elementwise. Shapes must match.
    pub fn accumulate(&mut self, other: &MlpParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            assert_eq!(a.weight.len(), b.weight.len());
            for (x, y) in a.weight.iter_mut().zip(&b.weight) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}

impl ParamArrays for MlpParams {
    fn arrays(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    fn array_shape(&self, i: usize) -> Vec<usize> {
        let l = &self.layers[i / 2];
        if i % 2 == 0 {
            vec![l.out_dim, l.in_dim]
        } else {
            vec![l.out_dim]
        }
    }

    fn array_name(&self, i: usize) -> String {
        let kind = if i % 2 == 0 { "weight" } else { "bias" };
        format!("layer {} {}", i / 2, kind)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_matrix, stream, Stream};

    fn scalar_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let n = p.layers().len();
        for (k, l) in p.layers().iter().enumerate() {
            let mut next = vec![0.0; l.out_dim];
            for o in 0..l.out_dim {
                let mut z = l.bias[o];
                for i in 0..l.in_dim {
                    z += l.w(o, i) * h[i];
                }
                next[o] = if k + 1 == n { z } else { z.tanh() };
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&[3, 5, 2]);
        let x = Matrix::from_rows(&[&[1.0, -2.0, 3.0], &[0.5, 0.5, 0.5]]);
        assert!(p.forward(&x).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_affine_layer() {
        let p = MlpParams::new(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            weight: vec![2.0],
            bias: vec![1.0],
        }])
        .unwrap();
        let y = p.forward(&Matrix::from_rows(&[&[3.0]])).unwrap();
        assert_eq!(y.as_slice(), &[7.0]);
    }

    #[test]
    fn matches_scalar_loop() {
        let p = MlpParams::init(&[2, 8, 8, 3], &mut stream(11, Stream::ActorInit));
        let x = Matrix::from_rows(&[&[0.5, -0.5]]);
        let y = p.forward(&x).unwrap();
        let expect = scalar_forward(&p, &[0.5, -0.5]);
        for (a, b) in y.as_slice().iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_errors_name_dims() {
        let p = MlpParams::zeros(&[3, 4, 2]);
        match p.forward(&Matrix::zeros(1, 2)) {
            Err(Error::Shape {
                expected, found, ..
            }) => {
                assert_eq!(expected, vec![3]);
                assert_eq!(found, vec![2]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let x = Matrix::zeros(2, 3);
        assert!(p.backward(&x, &Matrix::zeros(2, 3)).is_err());
        assert!(MlpParams::new(vec![Layer::zeros(2, 3), Layer::zeros(4, 1)]).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let p = MlpParams::init(&[3, 6, 2], &mut stream(1, Stream::ActorInit));
        let x = normal_matrix(&mut stream(1, Stream::Synthetic(0)), 4, 3);
        let (g, gx) = p.backward(&x, &Matrix::zeros(4, 2)).unwrap();
        assert!(g.arrays().iter().all(|a| a.iter().all(|&v| v == 0.0)));
        assert!(gx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_grad_is_summed_input() {
        let p = MlpParams::init(&[3, 1], &mut stream(2, Stream::ActorInit));
        let x = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 4.0]]);
        let (g, _) = p
            .backward(&x, &Matrix::from_rows(&[&[1.0], &[1.0]]))
            .unwrap();
        assert_eq!(g.layers()[0].weight, vec![0.0, 2.5, 7.0]);
        assert_eq!(g.layers()[0].bias, vec![2.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..10 {
            let p = MlpParams::init(&[3, 7, 5, 2], &mut stream(seed, Stream::ActorInit));
            let x = normal_matrix(&mut stream(seed, Stream::Synthetic(0)), 4, 3);
            let cot = normal_matrix(&mut stream(seed, Stream::Synthetic(1)), 4, 2);
            let (g, gx) = p.backward(&x, &cot).unwrap();
            let f = |q: &MlpParams| -> f64 {
                let y = q.forward(&x).unwrap();
                y.as_slice()
                    .iter()
                    .zip(cot.as_slice())
                    .map(|(a, b)| a * b)
                    .sum()
            };
            let fd = finite_diff_gradient(f, &p, 1e-5);
            let err = max_relative_error(&g.arrays().concat(), &fd.arrays().concat());
            assert!(err < 1e-4, "seed {seed}: param rel err {err}");
            let fx = central_difference(
                |v: &[f64]| {
                    let xm = Matrix::from_vec(4, 3, v.to_vec()).unwrap();
                    let y = p.forward(&xm).unwrap();
                    y.as_slice()
                        .iter()
                        .zip(cot.as_slice())
                        .map(|(a, b)| a * b)
                        .sum()
                },
                x.as_slice(),
                1e-5,
            );
            let err = max_relative_error(gx.as_slice(), &fx);
            assert!(err < 1e-4, "seed {seed}: input rel err {err}");
        }
    }

    #[test]
    fn array_views_and_names() {
        let p = MlpParams::zeros(&[3, 4, 2]);
        assert_eq!(p.arrays().len(), 4);
        assert_eq!(p.array_shape(2), vec![2, 4]);
        assert_eq!(p.array_name(3), "layer 1 bias");
        assert_eq!(p.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(p.sizes(), vec![3, 4, 2]);
    }

    #[test]
    fn init_respects_glorot_limit() {
        let p = MlpParams::init(&[6, 64, 2], &mut stream(3, Stream::ActorInit));
        let lim0 = (6.0f64 / 70.0).sqrt();
        assert!(p.layers()[0].weight.iter().all(|w| w.abs() < lim0));
        assert!(p.layers()[1].bias.iter().all(|&b| b == 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn forward_is_row_independent(seed in 0u64..1000, rows in 1usize..6, shift in 1usize..5) {
                let p = MlpParams::init(&[2, 5, 3], &mut stream(seed, Stream::ActorInit));
                let x = normal_matrix(&mut stream(seed, Stream::Synthetic(0)), rows, 2);
                let perm: Vec<usize> = (0..rows).map(|i| (i + shift) % rows).collect();
                let y = p.forward(&x).unwrap();
                let yp = p.forward(&x.select_rows(&perm)).unwrap();
                prop_assert_eq!(yp, y.select_rows(&perm));
            }
        }
    }
}
