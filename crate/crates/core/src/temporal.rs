//! Single-layer LSTM folding frame features into one clip feature.

use crate::error::{Error, Result};
use crate::nn::INIT_STD;
use crate::param::{Module, Parameter};
use crate::rng::SplitMix64;
use crate::tensor::{gemm, sigmoid, Tensor};

pub const HIDDEN_CHOICES: [usize; 3] = [256, 512, 1024];
pub const DEFAULT_MAX_FRAMES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(format!("LSTM sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Gate layout along the `4N` axis is `[input, forget, candidate, output]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub config: LstmConfig,
    pub w_ih: Parameter,
    pub w_hh: Parameter,
    pub bias: Parameter,
}

/// One time step for the whole batch.
#[derive(Clone, Debug)]
struct StepCache {
    x: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    /// Post-activation gates `[B, 4N]`.
    gates: Tensor,
    tanh_c: Tensor,
    active: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    steps: Vec<StepCache>,
    lengths: Vec<usize>,
}

impl Lstm {
    pub fn new(prefix: &str, config: LstmConfig, rng: &mut SplitMix64) -> Result<Self> {
        config.validate()?;
        let (d, n) = (config.input_dim, config.hidden_dim);
        let w_ih = Parameter::normal(format!("{prefix}.w_ih"), &[d, 4 * n], INIT_STD, rng);
        let w_hh = Parameter::normal(format!("{prefix}.w_hh"), &[n, 4 * n], INIT_STD, rng);
        let mut bias = Parameter::normal(format!("{prefix}.bias"), &[4 * n], INIT_STD, rng);
        bias.value.data_mut()[n..2 * n].fill(1.0);
        Ok(Lstm {
            config,
            w_ih,
            w_hh,
            bias,
        })
    }

    fn step_batch(&self, x: &Tensor, h: &Tensor, c: &Tensor, active: Vec<bool>) -> (Tensor, Tensor, StepCache) {
        let (b, d) = (x.shape()[0], self.config.input_dim);
        let n = self.config.hidden_dim;
        let mut pre = Vec::with_capacity(b * 4 * n);
        for _ in 0..b {
            pre.extend_from_slice(self.bias.value.data());
        }
        gemm(b, d, 4 * n, x.data(), false, self.w_ih.value.data(), false, &mut pre, true);
        gemm(b, n, 4 * n, h.data(), false, self.w_hh.value.data(), false, &mut pre, true);
        let mut gates = Tensor::new(vec![b, 4 * n], pre).expect("shape");
        let mut h_new = h.clone();
        let mut c_new = c.clone();
        let mut tanh_c = Tensor::zeros(&[b, n]);
        for r in 0..b {
            let g = gates.row_mut(r);
            for (j, v) in g.iter_mut().enumerate() {
                *v = if (2 * n..3 * n).contains(&j) { v.tanh() } else { sigmoid(*v) };
            }
            if !active[r] {
                continue;
            }
            let g = gates.row(r);
            for j in 0..n {
                let (i, f, cand, o) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                let cv = f * c.row(r)[j] + i * cand;
                let tc = cv.tanh();
                c_new.row_mut(r)[j] = cv;
                tanh_c.row_mut(r)[j] = tc;
                h_new.row_mut(r)[j] = o * tc;
            }
        }
        let cache = StepCache {
            x: x.clone(),
            h_prev: h.clone(),
            c_prev: c.clone(),
            gates,
            tanh_c,
            active,
        };
        (h_new, c_new, cache)
    }

    /// One cell update from state `(h, c)`.
    pub fn step(&self, x: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
        let (d, n) = (self.config.input_dim, self.config.hidden_dim);
        if x.len() != d || h.len() != n || c.len() != n {
            return Err(Error::Dimension {
                op: "lstm_step",
                lhs: vec![x.len(), h.len(), c.len()],
                rhs: vec![d, n, n],
            });
        }
        let (h2, c2, _) = self.step_batch(
            &x.clone().reshape(&[1, d])?,
            &h.clone().reshape(&[1, n])?,
            &c.clone().reshape(&[1, n])?,
            vec![true],
        );
        Ok((h2.reshape(&[n])?, c2.reshape(&[n])?))
    }

    /// Runs every sequence (each `[T_b, D]`) from a zero state and returns the
    /// final hidden states `[B, N]`. Shorter sequences hold their state once
    /// they run out of frames.
    pub fn forward_batch(&self, seqs: &[Tensor]) -> Result<(Tensor, LstmCache)> {
        let (d, n) = (self.config.input_dim, self.config.hidden_dim);
        if seqs.is_empty() {
            return Err(Error::EmptyClip);
        }
        let mut lengths = Vec::with_capacity(seqs.len());
        for s in seqs {
            let (t, w) = s.dims2()?;
            if w != d {
                return Err(Error::Dimension {
                    op: "lstm_input",
                    lhs: s.shape().to_vec(),
                    rhs: vec![t, d],
                });
            }
            lengths.push(t);
        }
        let b = seqs.len();
        let t_max = *lengths.iter().max().expect("non-empty");
        let mut h = Tensor::zeros(&[b, n]);
        let mut c = Tensor::zeros(&[b, n]);
        let mut steps = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let mut x = Tensor::zeros(&[b, d]);
            let mut active = vec![false; b];
            for (r, s) in seqs.iter().enumerate() {
                if t < lengths[r] {
                    x.row_mut(r).copy_from_slice(s.row(t));
                    active[r] = true;
                }
            }
            let (h2, c2, cache) = self.step_batch(&x, &h, &c, active);
            steps.push(cache);
            h = h2;
            c = c2;
        }
        Ok((h, LstmCache { steps, lengths }))
    }

    /// Accumulates parameter gradients from `dh_final: [B, N]` and returns the
    /// gradient for each input sequence.
    pub fn backward_batch(&mut self, cache: &LstmCache, dh_final: &Tensor) -> Vec<Tensor> {
        let (d, n) = (self.config.input_dim, self.config.hidden_dim);
        let b = cache.lengths.len();
        let mut dh = dh_final.clone();
        let mut dc = Tensor::zeros(&[b, n]);
        let mut dx_seq: Vec<Tensor> = cache
            .lengths
            .iter()
            .map(|&t| Tensor::zeros(&[t, d]))
            .collect();
        for (t, step) in cache.steps.iter().enumerate().rev() {
            let mut dpre = Tensor::zeros(&[b, 4 * n]);
            for r in 0..b {
                if !step.active[r] {
                    continue;
                }
                let g = step.gates.row(r);
                let dpr = dpre.row_mut(r);
                for j in 0..n {
                    let (i, f, cand, o) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                    let tc = step.tanh_c.row(r)[j];
                    let dhj = dh.row(r)[j];
                    let dcj = dc.row(r)[j] + dhj * o * (1.0 - tc * tc);
                    dpr[3 * n + j] = dhj * tc * o * (1.0 - o);
                    dpr[j] = dcj * cand * i * (1.0 - i);
                    dpr[n + j] = dcj * step.c_prev.row(r)[j] * f * (1.0 - f);
                    dpr[2 * n + j] = dcj * i * (1.0 - cand * cand);
                    dc.row_mut(r)[j] = dcj * f;
                }
            }
            gemm(d, b, 4 * n, step.x.data(), true, dpre.data(), false, self.w_ih.grad.data_mut(), true);
            gemm(n, b, 4 * n, step.h_prev.data(), true, dpre.data(), false, self.w_hh.grad.data_mut(), true);
            let gb = self.bias.grad.data_mut();
            for r in 0..b {
                for (acc, v) in gb.iter_mut().zip(dpre.row(r)) {
                    *acc += v;
                }
            }
            let mut dx = vec![0.0; b * d];
            gemm(b, 4 * n, d, dpre.data(), false, self.w_ih.value.data(), true, &mut dx, false);
            let mut dh_prev = vec![0.0; b * n];
            gemm(b, 4 * n, n, dpre.data(), false, self.w_hh.value.data(), true, &mut dh_prev, false);
            for r in 0..b {
                if step.active[r] {
                    dx_seq[r].row_mut(t).copy_from_slice(&dx[r * d..(r + 1) * d]);
                    dh.row_mut(r).copy_from_slice(&dh_prev[r * n..(r + 1) * n]);
                }
            }
        }
        dx_seq
    }

    /// Clip feature of one sequence of frame features.
    pub fn encode_sequence(&self, frames: &[Tensor]) -> Result<Tensor> {
        if frames.is_empty() {
            return Err(Error::EmptyClip);
        }
        let d = self.config.input_dim;
        let mut data = Vec::with_capacity(frames.len() * d);
        for f in frames {
            if f.len() != d {
                return Err(Error::Dimension {
                    op: "encode_sequence",
                    lhs: f.shape().to_vec(),
                    rhs: vec![d],
                });
            }
            data.extend_from_slice(f.data());
        }
        let seq = Tensor::new(vec![frames.len(), d], data)?;
        let (h, _) = self.forward_batch(std::slice::from_ref(&seq))?;
        h.reshape(&[self.config.hidden_dim])
    }
}

impl Module for Lstm {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        f(&self.w_ih);
        f(&self.w_hh);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.w_ih);
        f(&mut self.w_hh);
        f(&mut self.bias);
    }
}

/// Indices kept when uniformly subsampling `len` frames down to `max_frames`.
pub fn subsample_indices(len: usize, max_frames: usize) -> Vec<usize> {
    assert!(max_frames >= 1, "max_frames must be at least 1");
    if len <= max_frames {
        (0..len).collect()
    } else {
        (0..max_frames).map(|i| i * len / max_frames).collect()
    }
}

/// Uniformly subsamples sequences longer than `max_frames`; shorter ones
/// pass through unchanged.
pub fn truncate_or_pad<T: Clone>(frames: &[T], max_frames: usize) -> Vec<T> {
    subsample_indices(frames.len(), max_frames)
        .into_iter()
        .map(|i| frames[i].clone())
        .collect()
}
