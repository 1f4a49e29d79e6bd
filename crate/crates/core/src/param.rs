//! Trainable parameters and the Adam optimizer.

use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// A named trainable tensor together with its gradient and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Parameter {
            name: name.into(),
            grad: zeros.clone(),
            adam_m: zeros.clone(),
            adam_v: zeros,
            value,
            step_count: 0,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::new(name, Tensor::zeros(shape))
    }

    /// Weights drawn from `normal(0, std)`.
    pub fn normal(name: impl Into<String>, shape: &[usize], std: f64, rng: &mut SplitMix64) -> Self {
        let mut value = Tensor::zeros(shape);
        for v in value.data_mut() {
            *v = rng.normal() * std;
        }
        Self::new(name, value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }

    pub fn accumulate(&mut self, g: &Tensor) {
        self.grad
            .add_assign(g)
            .unwrap_or_else(|e| panic!("gradient for {}: {e}", self.name));
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }
}

/// Anything that owns parameters. Visit order defines checkpoint order.
pub trait Module {
    fn visit(&self, f: &mut dyn FnMut(&Parameter));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter));

    fn zero_grad(&mut self) {
        self.visit_mut(&mut |p| p.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |p| n += p.value.len());
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Adam {
            lr,
            ..Adam::default()
        }
    }

    /// One bias-corrected Adam step on `p`, optionally clearing its gradient.
    pub fn update(&self, p: &mut Parameter, zero_grad: bool) {
        p.step_count += 1;
        let t = p.step_count as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let g = p.grad.data();
        let m = p.adam_m.data_mut();
        for (m, &g) in m.iter_mut().zip(g) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        }
        let v = p.adam_v.data_mut();
        for (v, &g) in v.iter_mut().zip(g) {
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        }
        if self.lr != 0.0 {
            let m = p.adam_m.data();
            let v = p.adam_v.data();
            for ((w, &m), &v) in p.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = m / c1;
                let v_hat = v / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        if zero_grad {
            p.zero_grad();
        }
    }

    pub fn step<M: Module + ?Sized>(&self, model: &mut M) {
        model.visit_mut(&mut |p| self.update(p, true));
    }
}
