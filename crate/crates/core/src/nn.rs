//! Parameterized building blocks shared by the encoder, LSTM and head.

use crate::error::{Error, Result};
use crate::param::{Module, Parameter};
use crate::rng::SplitMix64;
use crate::tensor::{gemm, layer_norm, layer_norm_backward, LayerNormCache, Tensor, LAYER_NORM_EPS};

pub const INIT_STD: f64 = 0.02;

/// Affine map `y = x·W + b` with `W: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn new(prefix: &str, input: usize, output: usize, rng: &mut SplitMix64) -> Self {
        Linear {
            weight: Parameter::normal(format!("{prefix}.weight"), &[input, output], INIT_STD, rng),
            bias: Parameter::zeros(format!("{prefix}.bias"), &[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (m, k) = x.dims2()?;
        if k != self.input_dim() {
            return Err(Error::Dimension {
                op: "linear",
                lhs: x.shape().to_vec(),
                rhs: self.weight.shape().to_vec(),
            });
        }
        let n = self.output_dim();
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(self.bias.value.data());
        }
        gemm(m, k, n, x.data(), false, self.weight.value.data(), false, &mut out, true);
        Tensor::new(vec![m, n], out)
    }

    /// Accumulates parameter gradients; returns `dx` when `want_input` is set.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, want_input: bool) -> Option<Tensor> {
        let (m, k) = x.dims2().expect("linear input is 2-D");
        let n = self.output_dim();
        debug_assert_eq!(dy.shape(), [m, n]);
        gemm(k, m, n, x.data(), true, dy.data(), false, self.weight.grad.data_mut(), true);
        let db = self.bias.grad.data_mut();
        for r in 0..m {
            for (acc, g) in db.iter_mut().zip(dy.row(r)) {
                *acc += g;
            }
        }
        want_input.then(|| {
            let mut dx = vec![0.0; m * k];
            gemm(m, n, k, dy.data(), false, self.weight.value.data(), true, &mut dx, false);
            Tensor::new(vec![m, k], dx).expect("shape")
        })
    }
}

impl Module for Linear {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Parameter,
    pub beta: Parameter,
}

impl LayerNorm {
    pub fn new(prefix: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: Parameter::new(format!("{prefix}.gamma"), Tensor::full(&[dim], 1.0)),
            beta: Parameter::zeros(format!("{prefix}.beta"), &[dim]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerNormCache)> {
        layer_norm(x, &self.gamma.value, &self.beta.value, LAYER_NORM_EPS)
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &Tensor) -> Tensor {
        let (dx, dg, db) =
            layer_norm_backward(cache, &self.gamma.value, dy).expect("layer norm shapes");
        self.gamma.accumulate(&dg);
        self.beta.accumulate(&db);
        dx
    }
}

impl Module for LayerNorm {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        f(&self.gamma);
        f(&self.beta);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}
