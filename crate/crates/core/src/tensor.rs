//! Dense row-major `f64` tensors and the handful of kernels the model needs.
//!
//! Every kernel has an explicit backward companion. Shapes are checked on
//! every call and mismatches are reported as [`Error::Dimension`]; nothing
//! broadcasts implicitly.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Config(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        if numel(&shape) != data.len() {
            return Err(Error::Dimension {
                op: "tensor",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(
            shape.iter().all(|&d| d > 0),
            "tensor dimensions must be positive"
        );
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    /// 1-D tensor over `data`.
    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "empty vector tensor");
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Tensor::new(vec![rows.len(), cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Dimension {
                op: "dims2",
                lhs: self.shape.clone(),
                rhs: vec![0, 0],
            }),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.data.len() || shape.contains(&0) {
            return Err(Error::Dimension {
                op: "reshape",
                lhs: self.shape,
                rhs: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Row `i` of a tensor viewed as `[shape[0], rest]`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.data.len() / self.shape[0];
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.data.len() / self.shape[0];
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        self.map(|v| v * alpha)
    }

    fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "add")?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "sub")?;
        Ok(self.zip(other, |a, b| a - b))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "mul")?;
        Ok(self.zip(other, |a, b| a * b))
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other, "dot")?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `c = op(a) · op(b) (+ c if accumulate)`, where `op` optionally transposes.
/// `a` is stored `[m,k]` (or `[k,m]` when `ta`), `b` is `[k,n]` (or `[n,k]`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths were checked against m, k, n above and the
    // strides address exactly those elements.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Matrix product `a[m,k] · b[k,n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let dim_err = || Error::Dimension {
        op: "matmul",
        lhs: a.shape.clone(),
        rhs: b.shape.clone(),
    };
    let (m, k) = a.dims2().map_err(|_| dim_err())?;
    let (k2, n) = b.dims2().map_err(|_| dim_err())?;
    if k != k2 {
        return Err(dim_err());
    }
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, &a.data, false, &b.data, false, &mut out, false);
    Tensor::new(vec![m, n], out)
}

/// Gradients of `c = a·b`: `(dc·bᵀ, aᵀ·dc)`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, dc: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, k) = a.dims2()?;
    let (_, n) = b.dims2()?;
    if dc.shape != [m, n] || b.shape[0] != k {
        return Err(Error::Dimension {
            op: "matmul_backward",
            lhs: dc.shape.clone(),
            rhs: vec![m, n],
        });
    }
    let mut da = vec![0.0; m * k];
    gemm(m, n, k, &dc.data, false, &b.data, true, &mut da, false);
    let mut db = vec![0.0; k * n];
    gemm(k, m, n, &a.data, true, &dc.data, false, &mut db, false);
    Ok((Tensor::new(vec![m, k], da)?, Tensor::new(vec![k, n], db)?))
}

/// Splits a shape around `axis` into `(outer, len, inner)`.
fn axis_split(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::Dimension {
            op: "axis",
            lhs: shape.to_vec(),
            rhs: vec![axis],
        });
    }
    Ok((
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    ))
}

/// Numerically stable softmax along `axis`.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, len, inner) = axis_split(&x.shape, axis)?;
    let mut out = x.clone();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * len + j) * inner + i;
            let max = (0..len).map(|j| x.data[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..len {
                let e = (x.data[idx(j)] - max).exp();
                out.data[idx(j)] = e;
                total += e;
            }
            for j in 0..len {
                out.data[idx(j)] /= total;
            }
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of softmax given its output `y`.
pub fn softmax_backward(y: &Tensor, dy: &Tensor, axis: usize) -> Result<Tensor> {
    y.same_shape(dy, "softmax_backward")?;
    let (outer, len, inner) = axis_split(&y.shape, axis)?;
    let mut dx = dy.clone();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * len + j) * inner + i;
            let s: f64 = (0..len).map(|j| y.data[idx(j)] * dy.data[idx(j)]).sum();
            for j in 0..len {
                dx.data[idx(j)] = y.data[idx(j)] * (dy.data[idx(j)] - s);
            }
        }
    }
    Ok(dx)
}

/// Softmax of a single slice in place.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for e in v.iter_mut() {
        *e = (*e - max).exp();
        total += *e;
    }
    for e in v.iter_mut() {
        *e /= total;
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Saved activations of a layer norm forward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

/// Normalizes each slice along the last axis, then applies `gamma`/`beta`.
pub fn layer_norm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, LayerNormCache)> {
    let d = *x.shape.last().expect("rank >= 1");
    if gamma.shape != [d] || beta.shape != [d] {
        return Err(Error::Dimension {
            op: "layer_norm",
            lhs: x.shape.clone(),
            rhs: gamma.shape.clone(),
        });
    }
    let rows = x.data.len() / d;
    let mut xhat = x.clone();
    let mut y = x.clone();
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let src = &x.data[r * d..(r + 1) * d];
        let mean = src.iter().sum::<f64>() / d as f64;
        let var = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std.push(istd);
        for j in 0..d {
            let h = (src[j] - mean) * istd;
            xhat.data[r * d + j] = h;
            y.data[r * d + j] = h * gamma.data[j] + beta.data[j];
        }
    }
    Ok((y, LayerNormCache { xhat, inv_std }))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gamma: &Tensor,
    dy: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    cache.xhat.same_shape(dy, "layer_norm_backward")?;
    let d = gamma.len();
    let rows = dy.data.len() / d;
    let mut dx = dy.clone();
    let mut dgamma = Tensor::zeros(&[d]);
    let mut dbeta = Tensor::zeros(&[d]);
    for r in 0..rows {
        let xh = &cache.xhat.data[r * d..(r + 1) * d];
        let g = &dy.data[r * d..(r + 1) * d];
        let mut sum_gdy = 0.0;
        let mut sum_gdy_xh = 0.0;
        for j in 0..d {
            dgamma.data[j] += g[j] * xh[j];
            dbeta.data[j] += g[j];
            let gd = gamma.data[j] * g[j];
            sum_gdy += gd;
            sum_gdy_xh += gd * xh[j];
        }
        let istd = cache.inv_std[r];
        let inv_d = 1.0 / d as f64;
        for j in 0..d {
            let gd = gamma.data[j] * g[j];
            dx.data[r * d + j] = istd * (gd - inv_d * sum_gdy - inv_d * xh[j] * sum_gdy_xh);
        }
    }
    Ok((dx, dgamma, dbeta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
    Sigmoid,
    Tanh,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x·Φ(x)` with the exact Gaussian CDF.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => gelu(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at the pre-activation `x`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => gelu_grad(x),
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn forward(self, x: &Tensor) -> Tensor {
        x.map(|v| self.eval(v))
    }

    pub fn backward(self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        x.same_shape(dy, "activation_backward")?;
        Ok(x.zip(dy, |v, g| self.derivative(v) * g))
    }
}

/// Concatenates two vectors.
pub fn concat(a: &Tensor, b: &Tensor) -> Tensor {
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    Tensor::vector(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity_and_known_product() {
        let b = t(&[&[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(matmul(&Tensor::identity(2), &b).unwrap(), b);
        let a = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let c = matmul(&a, &t(&[&[5.0, 6.0], &[7.0, 8.0]])).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_zero_and_shape_error() {
        let b = t(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let c = matmul(&Tensor::zeros(&[2, 3]), &b).unwrap();
        assert_eq!(c, Tensor::zeros(&[2, 2]));
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 2])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn matmul_backward_matches_transposes() {
        let a = t(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = t(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, -1.0]]);
        let dc = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let (da, db) = matmul_backward(&a, &b, &dc).unwrap();
        // dA = dC·Bᵀ, dB = Aᵀ·dC computed by hand
        assert_eq!(da.data(), &[1.0, 2.0, 0.0, 3.0, 4.0, 2.0]);
        assert_eq!(db.data(), &[13.0, 18.0, 17.0, 24.0, 21.0, 30.0]);
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&Tensor::vector(vec![0.0; 3]), 0).unwrap();
        for &p in u.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax(&Tensor::vector(vec![2f64.ln(), 0.0]), 0).unwrap();
        assert!((s.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.data()[1] - 1.0 / 3.0).abs() < 1e-15);
        let x = Tensor::vector(vec![0.3, -1.2, 4.0]);
        let shifted = softmax(&x.map(|v| v + 7.5), 0).unwrap();
        assert!(softmax(&x, 0).unwrap().max_abs_diff(&shifted) < 1e-15);
    }

    #[test]
    fn softmax_middle_axis() {
        let x = Tensor::new(vec![2, 3, 2], (0..12).map(|v| v as f64 * 0.1).collect()).unwrap();
        let y = softmax(&x, 1).unwrap();
        for o in 0..2 {
            for i in 0..2 {
                let s: f64 = (0..3).map(|j| y.data()[(o * 3 + j) * 2 + i]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_examples() {
        let one = Tensor::full(&[3], 1.0);
        let zero = Tensor::zeros(&[3]);
        let (y, _) = layer_norm(&Tensor::vector(vec![1.0; 3]), &one, &zero, LAYER_NORM_EPS).unwrap();
        assert_eq!(y, Tensor::zeros(&[3]));

        let (y, _) = layer_norm(
            &Tensor::vector(vec![1.0, 3.0]),
            &Tensor::full(&[2], 1.0),
            &Tensor::zeros(&[2]),
            1e-12,
        )
        .unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-9 && (y.data()[1] - 1.0).abs() < 1e-9);

        let x = Tensor::vector(vec![0.5, -2.0, 1.0]);
        let b = Tensor::vector(vec![0.25, -1.0, 3.0]);
        let (y0, _) = layer_norm(&x, &one, &zero, LAYER_NORM_EPS).unwrap();
        let (yb, _) = layer_norm(&x, &one, &b, LAYER_NORM_EPS).unwrap();
        assert_eq!(yb, y0.add(&b).unwrap());
    }

    #[test]
    fn activation_examples() {
        let r = Activation::Relu.forward(&Tensor::vector(vec![-1.0, 0.0, 2.0]));
        assert_eq!(r.data(), &[0.0, 0.0, 2.0]);
        assert_eq!(Activation::Sigmoid.eval(0.0), 0.5);
        assert_eq!(Activation::Tanh.eval(0.0), 0.0);
    }

    /// Φ(1) by composite Simpson quadrature of the standard normal density
    /// over [0, 1], independent of any erf implementation.
    fn normal_cdf_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = pdf(0.0) + pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(i as f64 * h);
        }
        0.5 + acc * h / 3.0
    }

    #[test]
    fn gelu_matches_gaussian_cdf() {
        let expected = normal_cdf_quadrature(1.0);
        assert!((gelu(1.0) - expected).abs() < 1e-12, "{} vs {expected}", gelu(1.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0, 2], vec![]).is_err());
        assert!(Tensor::zeros(&[2, 3]).reshape(&[4, 2]).is_err());
    }
}
