//! Layer forward/backward kernels.
//!
//! Images are `H x W x C` (channels last). Convolution is valid
//! cross-correlation with stride 1 and kernels laid out `k x k x Cin x Cout`,
//! which makes the kernel tensor directly usable as the right-hand matrix of
//! an im2col product.

use serde::{Deserialize, Serialize};

use super::{gemm, Tensor};
use crate::error::{Error, Result};

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(Error::shape(format!("{what}: expected H x W x C, got {s:?}"))),
    }
}

struct ConvGeometry {
    height: usize,
    width: usize,
    in_ch: usize,
    k: usize,
    out_ch: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeometry {
    fn new(input: &Tensor, kernels: &Tensor) -> Result<Self> {
        let (height, width, in_ch) = dims3(input, "conv2d input")?;
        let [k, k2, kc, out_ch] = *kernels.shape() else {
            return Err(Error::shape(format!("conv2d kernels: expected k x k x Cin x Cout, got {:?}", kernels.shape())));
        };
        if k != k2 || kc != in_ch {
            return Err(Error::shape(format!(
                "conv2d kernels {:?} do not fit input {:?}",
                kernels.shape(),
                input.shape()
            )));
        }
        if k > height || k > width {
            return Err(Error::shape(format!("kernel {k} larger than input {height}x{width}")));
        }
        Ok(Self {
            height,
            width,
            in_ch,
            k,
            out_ch,
            out_h: height - k + 1,
            out_w: width - k + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.k * self.k * self.in_ch
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Row `(y, x)` holds the receptive field in `(dy, dx, ci)` order.
    fn im2col(&self, input: &[f64]) -> Vec<f64> {
        let row_len = self.k * self.in_ch;
        let mut cols = Vec::with_capacity(self.positions() * self.patch_len());
        for y in 0..self.out_h {
            for x in 0..self.out_w {
                for dy in 0..self.k {
                    let start = ((y + dy) * self.width + x) * self.in_ch;
                    cols.extend_from_slice(&input[start..start + row_len]);
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64]) -> Vec<f64> {
        let row_len = self.k * self.in_ch;
        let mut out = vec![0.0; self.height * self.width * self.in_ch];
        let mut rows = cols.chunks_exact(row_len);
        for y in 0..self.out_h {
            for x in 0..self.out_w {
                for dy in 0..self.k {
                    let start = ((y + dy) * self.width + x) * self.in_ch;
                    let src = rows.next().expect("patch row");
                    for (o, s) in out[start..start + row_len].iter_mut().zip(src) {
                        *o += s;
                    }
                }
            }
        }
        out
    }
}

/// `out[y][x][c] = bias[c] + Σ input[y+dy][x+dx][ci] · kernels[dy][dx][ci][c]`.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let g = ConvGeometry::new(input, kernels)?;
    bias.expect_shape(&[g.out_ch], "conv2d bias")?;
    let cols = g.im2col(input.data());
    let mut out = Vec::with_capacity(g.positions() * g.out_ch);
    for _ in 0..g.positions() {
        out.extend_from_slice(bias.data());
    }
    gemm(g.positions(), g.patch_len(), g.out_ch, &cols, false, kernels.data(), false, 1.0, &mut out);
    Tensor::new(&[g.out_h, g.out_w, g.out_ch], out)
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads {
    /// `None` when the caller did not ask for it (first layer).
    pub input: Option<Tensor>,
    pub kernels: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    need_input_grad: bool,
) -> Result<Conv2dGrads> {
    let g = ConvGeometry::new(input, kernels)?;
    grad_out.expect_shape(&[g.out_h, g.out_w, g.out_ch], "conv2d upstream gradient")?;
    let cols = g.im2col(input.data());

    let mut gk = vec![0.0; g.patch_len() * g.out_ch];
    gemm(g.patch_len(), g.positions(), g.out_ch, &cols, true, grad_out.data(), false, 0.0, &mut gk);

    let mut gb = vec![0.0; g.out_ch];
    for row in grad_out.data().chunks_exact(g.out_ch) {
        for (b, r) in gb.iter_mut().zip(row) {
            *b += r;
        }
    }

    let gi = if need_input_grad {
        let mut gcols = vec![0.0; g.positions() * g.patch_len()];
        gemm(g.positions(), g.out_ch, g.patch_len(), grad_out.data(), false, kernels.data(), true, 0.0, &mut gcols);
        Some(Tensor::new(input.shape(), g.col2im(&gcols))?)
    } else {
        None
    };

    Ok(Conv2dGrads {
        input: gi,
        kernels: Tensor::new(kernels.shape(), gk)?,
        bias: Tensor::new(&[g.out_ch], gb)?,
    })
}

/// Flat input index of each pooled maximum, plus the input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Non-overlapping 2x2 max pooling; a trailing odd row or column is dropped.
/// Ties go to the first element in row-major window order.
pub fn maxpool2x2_forward(input: &Tensor) -> Result<(Tensor, PoolIndices)> {
    let (h, w, c) = dims3(input, "maxpool input")?;
    if h < 2 || w < 2 {
        return Err(Error::shape(format!("maxpool needs at least 2x2, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for xx in 0..ow {
            for ch in 0..c {
                let idx = |dy: usize, dx: usize| ((2 * y + dy) * w + 2 * xx + dx) * c + ch;
                let mut best = idx(0, 0);
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = idx(dy, dx);
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(&[oh, ow, c], out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward(grad_out: &Tensor, indices: &PoolIndices) -> Result<Tensor> {
    if grad_out.len() != indices.argmax.len() {
        return Err(Error::shape(format!(
            "maxpool backward: {} upstream values for {} pooled cells",
            grad_out.len(),
            indices.argmax.len()
        )));
    }
    let mut gi = Tensor::zeros(&indices.input_shape);
    let data = gi.data_mut();
    for (&i, &g) in indices.argmax.iter().zip(grad_out.data()) {
        data[i] += g;
    }
    Ok(gi)
}

/// `weights · input + bias` with `weights` of shape `m x n`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [m, n] = *weights.shape() else {
        return Err(Error::shape(format!("dense weights must be 2-D, got {:?}", weights.shape())));
    };
    if input.len() != n {
        return Err(Error::shape(format!("dense input has {} values, weights expect {n}", input.len())));
    }
    bias.expect_shape(&[m], "dense bias")?;
    let mut out = bias.data().to_vec();
    gemm(m, n, 1, weights.data(), false, input.data(), false, 1.0, &mut out);
    Tensor::new(&[m], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let [m, n] = *weights.shape() else {
        return Err(Error::shape(format!("dense weights must be 2-D, got {:?}", weights.shape())));
    };
    if input.len() != n || grad_out.len() != m {
        return Err(Error::shape(format!(
            "dense backward: input {} / upstream {} do not fit {m}x{n}",
            input.len(),
            grad_out.len()
        )));
    }
    let mut gw = vec![0.0; m * n];
    gemm(m, 1, n, grad_out.data(), false, input.data(), false, 0.0, &mut gw);
    let mut gi = vec![0.0; n];
    gemm(n, m, 1, weights.data(), true, grad_out.data(), false, 0.0, &mut gi);
    Ok(DenseGrads {
        input: Tensor::new(input.shape(), gi)?,
        weights: Tensor::new(&[m, n], gw)?,
        bias: Tensor::new(&[m], grad_out.data().to_vec())?,
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Elementwise nonlinearity. Derivatives are expressed through the
/// activation's output, which is what the backward passes cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn forward(self, input: &Tensor) -> Tensor {
        let mut out = input.clone();
        for v in out.data_mut() {
            *v = self.eval(*v);
        }
        out
    }

    /// Gradient w.r.t. the activation input, given its output.
    pub fn backward(self, output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        output.expect_shape(grad_out.shape(), "activation backward")?;
        let mut gi = grad_out.clone();
        for (g, &y) in gi.data_mut().iter_mut().zip(output.data()) {
            *g *= self.derivative_from_output(y);
        }
        Ok(gi)
    }
}

/// Softmax with max-subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[target]` and its gradient `softmax - one_hot`.
pub fn softmax_xent_loss(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "target class {target} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&v| (v - max).exp()).sum();
    let loss = max + sum.ln() - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    // clip rounding below zero without masking NaN
    Ok((if loss < 0.0 { 0.0 } else { loss }, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = stream(seed, Purpose::Init, 99);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_all_ones() {
        let out = conv2d_forward(
            &Tensor::filled(&[3, 3, 1], 1.0),
            &Tensor::filled(&[2, 2, 1, 1], 1.0),
            &Tensor::zeros(&[1]),
        )
        .unwrap();
        assert_eq!(out.shape(), &[2, 2, 1]);
        assert_eq!(out.data(), &[4.0; 4]);
    }

    #[test]
    fn conv_zero_kernel_gives_bias() {
        let bias = Tensor::new(&[2], vec![0.5, -3.0]).unwrap();
        let out = conv2d_forward(&random(&[6, 5, 3], 1), &Tensor::zeros(&[3, 3, 3, 2]), &bias).unwrap();
        assert_eq!(out.shape(), &[4, 3, 2]);
        for px in out.data().chunks(2) {
            assert_eq!(px, bias.data());
        }
    }

    // Direct sliding-window evaluation of the cross-correlation.
    fn conv_naive(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Vec<f64> {
        let (h, w, ci) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (k, co) = (kernels.shape()[0], kernels.shape()[3]);
        let mut out = vec![];
        for y in 0..=h - k {
            for x in 0..=w - k {
                for c in 0..co {
                    let mut s = bias.data()[c];
                    for dy in 0..k {
                        for dx in 0..k {
                            for i in 0..ci {
                                s += input.data()[((y + dy) * w + x + dx) * ci + i]
                                    * kernels.data()[((dy * k + dx) * ci + i) * co + c];
                            }
                        }
                    }
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_sliding_window() {
        let input = random(&[7, 9, 2], 3);
        let kernels = random(&[3, 3, 2, 4], 4);
        let bias = random(&[4], 5);
        let out = conv2d_forward(&input, &kernels, &bias).unwrap();
        for (a, b) in out.data().iter().zip(conv_naive(&input, &kernels, &bias)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_is_linear() {
        let (x, y) = (random(&[8, 8, 1], 6), random(&[8, 8, 1], 7));
        let kernels = random(&[3, 3, 1, 2], 8);
        let bias = Tensor::zeros(&[2]);
        let (a, b) = (1.7, -0.3);
        let mut mix = x.clone();
        for (m, v) in mix.data_mut().iter_mut().zip(y.data()) {
            *m = a * *m + b * v;
        }
        let lhs = conv2d_forward(&mix, &kernels, &bias).unwrap();
        let cx = conv2d_forward(&x, &kernels, &bias).unwrap();
        let cy = conv2d_forward(&y, &kernels, &bias).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs.data()[i] - (a * cx.data()[i] + b * cy.data()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        assert!(conv2d_forward(&random(&[2, 2, 1], 1), &random(&[3, 3, 1, 1], 1), &Tensor::zeros(&[1])).is_err());
        assert!(conv2d_forward(&random(&[5, 5, 2], 1), &random(&[3, 3, 1, 1], 1), &Tensor::zeros(&[1])).is_err());
        assert!(conv2d_forward(&random(&[5, 5, 1], 1), &random(&[3, 3, 1, 2], 1), &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn maxpool_examples() {
        let x = Tensor::new(&[2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2x2_forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(idx.argmax(), &[3]);

        let (y, _) = maxpool2x2_forward(&Tensor::filled(&[4, 6, 2], 0.25)).unwrap();
        assert_eq!(y.shape(), &[2, 3, 2]);
        assert!(y.data().iter().all(|&v| v == 0.25));

        let (y, _) = maxpool2x2_forward(&random(&[5, 7, 1], 2)).unwrap();
        assert_eq!(y.shape(), &[2, 3, 1]);

        assert!(maxpool2x2_forward(&random(&[1, 4, 1], 2)).is_err());
    }

    #[test]
    fn maxpool_output_within_input_bounds() {
        let x = random(&[6, 6, 3], 10);
        let (y, _) = maxpool2x2_forward(&x).unwrap();
        let lo = x.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(y.data().iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn maxpool_backward_routes_to_argmax() {
        let x = random(&[4, 4, 1], 11);
        let (y, idx) = maxpool2x2_forward(&x).unwrap();
        let g = Tensor::new(y.shape(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gi = maxpool2x2_backward(&g, &idx).unwrap();
        for (cell, &i) in idx.argmax().iter().enumerate() {
            assert_eq!(gi.data()[i], g.data()[cell]);
        }
        assert_eq!(gi.data().iter().filter(|&&v| v != 0.0).count(), 4);
    }

    #[test]
    fn dense_examples() {
        let x = random(&[4], 1);
        let mut eye = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            eye.data_mut()[i * 4 + i] = 1.0;
        }
        assert_eq!(dense_forward(&x, &eye, &Tensor::zeros(&[4])).unwrap(), x);
        let b = random(&[3], 2);
        assert_eq!(dense_forward(&x, &Tensor::zeros(&[3, 4]), &b).unwrap(), b);
        assert!(dense_forward(&x, &Tensor::zeros(&[3, 5]), &b).is_err());
    }

    #[test]
    fn dense_matches_double_loop() {
        let (x, w, b) = (random(&[13], 3), random(&[7, 13], 4), random(&[7], 5));
        let out = dense_forward(&x, &w, &b).unwrap();
        for i in 0..7 {
            let mut s = b.data()[i];
            for j in 0..13 {
                s += w.data()[i * 13 + j] * x.data()[j];
            }
            assert!((out.data()[i] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn activation_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(Activation::Tanh.eval(0.0), 0.0);
        assert_eq!(relu(-1.0), 0.0);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn softmax_properties() {
        for p in softmax(&[0.0, 0.0, 0.0]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut rng = stream(5, Purpose::Init, 0);
        for _ in 0..50 {
            let z: Vec<f64> = (0..5).map(|_| rng.random_range(-20.0..20.0)).collect();
            let c: f64 = rng.random_range(-100.0..100.0);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let (a, b) = (softmax(&z), softmax(&shifted));
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn xent_examples() {
        let (l, _) = softmax_xent_loss(&[0.0, 0.0, 0.0], 0).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15);
        let (l, _) = softmax_xent_loss(&[100.0, 0.0, 0.0], 0).unwrap();
        assert!((0.0..1e-40).contains(&l));
        let (_, g) = softmax_xent_loss(&[0.3, -1.2, 2.5], 1).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        assert!(softmax_xent_loss(&[0.0; 3], 3).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (x, k) = (random(&[6, 6, 2], 1), random(&[3, 3, 2, 3], 2));
        let g = conv2d_backward(&x, &k, &Tensor::zeros(&[4, 4, 3]), true).unwrap();
        assert!(g.kernels.data().iter().chain(g.bias.data()).chain(g.input.unwrap().data()).all(|&v| v == 0.0));
        let d = dense_backward(&random(&[5], 3), &random(&[2, 5], 4), &Tensor::zeros(&[2])).unwrap();
        assert!(d.weights.data().iter().chain(d.input.data()).all(|&v| v == 0.0));
    }
}
