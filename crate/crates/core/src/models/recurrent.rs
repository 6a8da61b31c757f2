//! Many-to-one recurrent classifiers. Row `t` of an `S x S` image is the
//! input at step `t`; `h0 = s0 = 0` and only `h_S` reaches the readout.
//!
//! Input projections `X Wᵀ` for all steps are computed in one matrix
//! product up front, and the weight gradients are accumulated the same way
//! after the backward sweep, leaving only the recurrent terms per step.

use serde::{Deserialize, Serialize};

use super::{check_input, xent, Logits, ModelKind, Network, SampleGradient};
use crate::error::{Error, Result};
use crate::gaf::GafImage;
use crate::rng::{self, Purpose};
use crate::tensor::ops::sigmoid;
use crate::tensor::{gemm, Tensor};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrentConfig {
    /// Image side: both the number of steps and the per-step input width.
    pub input_size: usize,
    pub hidden: usize,
}

/// `rows x cols` matrix times vector, accumulated into `out`.
fn matvec_acc(mat: &Tensor, x: &[f64], out: &mut [f64]) {
    let (rows, cols) = (mat.shape()[0], mat.shape()[1]);
    gemm(rows, cols, 1, mat.data(), false, x, false, 1.0, out);
}

/// Transposed matrix times vector, accumulated into `out`.
fn matvec_t_acc(mat: &Tensor, x: &[f64], out: &mut [f64]) {
    let (rows, cols) = (mat.shape()[0], mat.shape()[1]);
    gemm(cols, rows, 1, mat.data(), true, x, false, 1.0, out);
}

/// `X Wᵀ + b` for every row of `X`, giving a `steps x hidden` matrix.
fn project_inputs(x: &[f64], steps: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (hidden, m) = (w.shape()[0], w.shape()[1]);
    let mut out = Vec::with_capacity(steps * hidden);
    for _ in 0..steps {
        out.extend_from_slice(b.data());
    }
    gemm(steps, m, hidden, x, false, w.data(), true, 1.0, &mut out);
    out
}

/// Weight gradients from per-step pre-activation gradients `da` (`steps x hidden`):
/// `dW = daᵀ X`, `dU = daᵀ H_prev`, `db = Σ_t da_t`.
fn accumulate_weight_grads(
    da: &[f64],
    x: &[f64],
    h_prev: &[f64],
    steps: usize,
    m: usize,
    hidden: usize,
) -> (Tensor, Tensor, Tensor) {
    let mut gw = vec![0.0; hidden * m];
    gemm(hidden, steps, m, da, true, x, false, 0.0, &mut gw);
    let mut gu = vec![0.0; hidden * hidden];
    gemm(hidden, steps, hidden, da, true, h_prev, false, 0.0, &mut gu);
    let mut gb = vec![0.0; hidden];
    for row in da.chunks_exact(hidden) {
        for (b, r) in gb.iter_mut().zip(row) {
            *b += r;
        }
    }
    (
        Tensor::new(&[hidden, m], gw).expect("shape"),
        Tensor::new(&[hidden, hidden], gu).expect("shape"),
        Tensor::new(&[hidden], gb).expect("shape"),
    )
}

fn readout(out_w: &Tensor, out_b: &Tensor, h: &[f64]) -> Logits {
    let mut z: Logits = out_b.data().try_into().expect("3 readout biases");
    matvec_acc(out_w, h, &mut z);
    z
}

fn check_vec(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::shape(format!("{what}: expected {n} values, got {}", v.len())));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RnnParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl RnnParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor::zeros(&[hidden, input]),
            u: Tensor::zeros(&[hidden, hidden]),
            b: Tensor::zeros(&[hidden]),
            out_w: Tensor::zeros(&[NUM_CLASSES, hidden]),
            out_b: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    fn hidden(&self) -> usize {
        self.b.len()
    }
}

/// `h_t = tanh(W x_t + U h_prev + b)`.
pub fn rnn_cell(x: &[f64], h_prev: &[f64], params: &RnnParams) -> Result<Vec<f64>> {
    check_vec(x, params.w.shape()[1], "rnn input")?;
    check_vec(h_prev, params.hidden(), "rnn hidden state")?;
    let mut a = params.b.data().to_vec();
    matvec_acc(&params.w, x, &mut a);
    matvec_acc(&params.u, h_prev, &mut a);
    Ok(a.into_iter().map(f64::tanh).collect())
}

#[derive(Debug, Clone)]
pub struct Rnn {
    config: RecurrentConfig,
    params: RnnParams,
}

impl Rnn {
    pub fn zeros(config: RecurrentConfig) -> Self {
        Self {
            config,
            params: RnnParams::zeros(config.input_size, config.hidden),
        }
    }

    pub fn new(config: RecurrentConfig, seed: u64) -> Self {
        let (m, h) = (config.input_size, config.hidden);
        let mut rng = rng::stream(seed, Purpose::Init, ModelKind::Rnn.tag() as u64);
        let mut net = Self::zeros(config);
        net.params.w = Tensor::glorot(&[h, m], m, h, &mut rng);
        net.params.u = Tensor::glorot(&[h, h], h, h, &mut rng);
        net.params.out_w = Tensor::glorot(&[NUM_CLASSES, h], h, NUM_CLASSES, &mut rng);
        net
    }

    pub fn config(&self) -> &RecurrentConfig {
        &self.config
    }

    pub fn params_struct(&self) -> &RnnParams {
        &self.params
    }

    pub fn params_struct_mut(&mut self) -> &mut RnnParams {
        &mut self.params
    }

    /// Hidden states `h_0 ..= h_S`, flattened `(S + 1) x hidden`.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (steps, hidden) = (self.config.input_size, self.config.hidden);
        let pre = project_inputs(x, steps, &self.params.w, &self.params.b);
        let mut hs = vec![0.0; (steps + 1) * hidden];
        for t in 0..steps {
            let (done, rest) = hs.split_at_mut((t + 1) * hidden);
            let h_prev = &done[t * hidden..];
            let a = &mut rest[..hidden];
            a.copy_from_slice(&pre[t * hidden..(t + 1) * hidden]);
            matvec_acc(&self.params.u, h_prev, a);
            for v in a.iter_mut() {
                *v = v.tanh();
            }
        }
        hs
    }
}

impl Network for Rnn {
    fn kind(&self) -> ModelKind {
        ModelKind::Rnn
    }

    fn input_size(&self) -> usize {
        self.config.input_size
    }

    fn logits(&self, image: &GafImage) -> Result<Logits> {
        check_input(image, self.config.input_size)?;
        let hs = self.run(image.values());
        let hidden = self.config.hidden;
        Ok(readout(&self.params.out_w, &self.params.out_b, &hs[hs.len() - hidden..]))
    }

    fn loss_and_grad(&self, image: &GafImage, target: usize) -> Result<SampleGradient> {
        check_input(image, self.config.input_size)?;
        let (steps, hidden) = (self.config.input_size, self.config.hidden);
        let x = image.values();
        let hs = self.run(x);
        let h_last = &hs[steps * hidden..];
        let logits = readout(&self.params.out_w, &self.params.out_b, h_last);
        let (loss, gz) = xent(&logits, target)?;

        let mut g_out_w = vec![0.0; NUM_CLASSES * hidden];
        gemm(NUM_CLASSES, 1, hidden, gz.data(), false, h_last, false, 0.0, &mut g_out_w);
        let mut gh = vec![0.0; hidden];
        matvec_t_acc(&self.params.out_w, gz.data(), &mut gh);

        let mut da = vec![0.0; steps * hidden];
        for t in (0..steps).rev() {
            let h_t = &hs[(t + 1) * hidden..(t + 2) * hidden];
            let delta = &mut da[t * hidden..(t + 1) * hidden];
            for ((d, g), h) in delta.iter_mut().zip(&gh).zip(h_t) {
                *d = g * (1.0 - h * h);
            }
            gh.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_acc(&self.params.u, delta, &mut gh);
        }

        let (gw, gu, gb) = accumulate_weight_grads(&da, x, &hs[..steps * hidden], steps, steps, hidden);
        Ok(SampleGradient {
            loss,
            logits,
            grads: vec![
                gw,
                gu,
                gb,
                Tensor::new(&[NUM_CLASSES, hidden], g_out_w)?,
                gz,
            ],
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        let p = &self.params;
        vec![&p.w, &p.u, &p.b, &p.out_w, &p.out_b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let p = &mut self.params;
        vec![&mut p.w, &mut p.u, &mut p.b, &mut p.out_w, &mut p.out_b]
    }

    fn block_names(&self) -> Vec<&'static str> {
        vec!["w", "u", "b", "out.weights", "out.bias"]
    }

    fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }
}

/// One gate's `(W, U, b)`.
#[derive(Debug, Clone)]
pub struct LstmGates {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

impl LstmGates {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor::zeros(&[hidden, input]),
            u: Tensor::zeros(&[hidden, hidden]),
            b: Tensor::zeros(&[hidden]),
        }
    }

    fn glorot<R: rand::Rng + ?Sized>(input: usize, hidden: usize, bias: f64, rng: &mut R) -> Self {
        Self {
            w: Tensor::glorot(&[hidden, input], input, hidden, rng),
            u: Tensor::glorot(&[hidden, hidden], hidden, hidden, rng),
            b: Tensor::filled(&[hidden], bias),
        }
    }

    fn pre_activation(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let mut a = self.b.data().to_vec();
        matvec_acc(&self.w, x, &mut a);
        matvec_acc(&self.u, h_prev, &mut a);
        a
    }
}

/// Forget, input, output and candidate-state gates plus the readout.
#[derive(Debug, Clone)]
pub struct LstmParams {
    pub forget: LstmGates,
    pub input: LstmGates,
    pub output: LstmGates,
    pub state: LstmGates,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forget: LstmGates::zeros(input, hidden),
            input: LstmGates::zeros(input, hidden),
            output: LstmGates::zeros(input, hidden),
            state: LstmGates::zeros(input, hidden),
            out_w: Tensor::zeros(&[NUM_CLASSES, hidden]),
            out_b: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    fn gates(&self) -> [&LstmGates; 4] {
        [&self.forget, &self.input, &self.output, &self.state]
    }

    fn hidden(&self) -> usize {
        self.forget.b.len()
    }
}

/// One LSTM step:
///
/// ```text
/// f = σ(W_f x + U_f h + b_f)    i = σ(W_i x + U_i h + b_i)    o = σ(W_o x + U_o h + b_o)
/// s_t = f ∘ s_prev + i ∘ tanh(W_s x + U_s h + b_s)
/// h_t = o ∘ tanh(s_t)
/// ```
///
/// with `∘` the elementwise product. Returns `(h_t, s_t)`.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    s_prev: &[f64],
    params: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = params.hidden();
    check_vec(x, params.forget.w.shape()[1], "lstm input")?;
    check_vec(h_prev, hidden, "lstm hidden state")?;
    check_vec(s_prev, hidden, "lstm cell state")?;
    let f = params.forget.pre_activation(x, h_prev);
    let i = params.input.pre_activation(x, h_prev);
    let o = params.output.pre_activation(x, h_prev);
    let g = params.state.pre_activation(x, h_prev);
    let mut h = vec![0.0; hidden];
    let mut s = vec![0.0; hidden];
    for k in 0..hidden {
        s[k] = sigmoid(f[k]) * s_prev[k] + sigmoid(i[k]) * g[k].tanh();
        h[k] = sigmoid(o[k]) * s[k].tanh();
    }
    Ok((h, s))
}

#[derive(Debug, Clone)]
pub struct Lstm {
    config: RecurrentConfig,
    params: LstmParams,
}

/// Per-step activations, each flattened `steps x hidden`; `h` and `s`
/// carry an extra leading zero row for `t = 0`.
struct LstmTrace {
    f: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    s: Vec<f64>,
    tanh_s: Vec<f64>,
    h: Vec<f64>,
}

impl Lstm {
    pub const FORGET_BIAS_INIT: f64 = 1.0;

    pub fn zeros(config: RecurrentConfig) -> Self {
        Self {
            config,
            params: LstmParams::zeros(config.input_size, config.hidden),
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate (1.0).
    pub fn new(config: RecurrentConfig, seed: u64) -> Self {
        let (m, h) = (config.input_size, config.hidden);
        let mut rng = rng::stream(seed, Purpose::Init, ModelKind::Lstm.tag() as u64);
        let params = LstmParams {
            forget: LstmGates::glorot(m, h, Self::FORGET_BIAS_INIT, &mut rng),
            input: LstmGates::glorot(m, h, 0.0, &mut rng),
            output: LstmGates::glorot(m, h, 0.0, &mut rng),
            state: LstmGates::glorot(m, h, 0.0, &mut rng),
            out_w: Tensor::glorot(&[NUM_CLASSES, h], h, NUM_CLASSES, &mut rng),
            out_b: Tensor::zeros(&[NUM_CLASSES]),
        };
        Self { config, params }
    }

    pub fn config(&self) -> &RecurrentConfig {
        &self.config
    }

    pub fn params_struct(&self) -> &LstmParams {
        &self.params
    }

    pub fn params_struct_mut(&mut self) -> &mut LstmParams {
        &mut self.params
    }

    fn run(&self, x: &[f64]) -> LstmTrace {
        let (steps, hidden) = (self.config.input_size, self.config.hidden);
        let p = &self.params;
        let mut f = project_inputs(x, steps, &p.forget.w, &p.forget.b);
        let mut i = project_inputs(x, steps, &p.input.w, &p.input.b);
        let mut o = project_inputs(x, steps, &p.output.w, &p.output.b);
        let mut g = project_inputs(x, steps, &p.state.w, &p.state.b);
        let mut s = vec![0.0; (steps + 1) * hidden];
        let mut tanh_s = vec![0.0; steps * hidden];
        let mut h = vec![0.0; (steps + 1) * hidden];

        for t in 0..steps {
            let row = t * hidden..(t + 1) * hidden;
            let h_prev = h[row.clone()].to_vec();
            matvec_acc(&p.forget.u, &h_prev, &mut f[row.clone()]);
            matvec_acc(&p.input.u, &h_prev, &mut i[row.clone()]);
            matvec_acc(&p.output.u, &h_prev, &mut o[row.clone()]);
            matvec_acc(&p.state.u, &h_prev, &mut g[row.clone()]);
            for k in row.clone() {
                f[k] = sigmoid(f[k]);
                i[k] = sigmoid(i[k]);
                o[k] = sigmoid(o[k]);
                g[k] = g[k].tanh();
                let s_new = f[k] * s[k] + i[k] * g[k];
                s[k + hidden] = s_new;
                tanh_s[k] = s_new.tanh();
                h[k + hidden] = o[k] * tanh_s[k];
            }
        }
        LstmTrace {
            f,
            i,
            o,
            g,
            s,
            tanh_s,
            h,
        }
    }
}

impl Network for Lstm {
    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
    }

    fn input_size(&self) -> usize {
        self.config.input_size
    }

    fn logits(&self, image: &GafImage) -> Result<Logits> {
        check_input(image, self.config.input_size)?;
        let trace = self.run(image.values());
        let hidden = self.config.hidden;
        Ok(readout(&self.params.out_w, &self.params.out_b, &trace.h[trace.h.len() - hidden..]))
    }

    fn loss_and_grad(&self, image: &GafImage, target: usize) -> Result<SampleGradient> {
        check_input(image, self.config.input_size)?;
        let (steps, hidden) = (self.config.input_size, self.config.hidden);
        let p = &self.params;
        let x = image.values();
        let tr = self.run(x);
        let h_last = &tr.h[steps * hidden..];
        let logits = readout(&p.out_w, &p.out_b, h_last);
        let (loss, gz) = xent(&logits, target)?;

        let mut g_out_w = vec![0.0; NUM_CLASSES * hidden];
        gemm(NUM_CLASSES, 1, hidden, gz.data(), false, h_last, false, 0.0, &mut g_out_w);
        let mut gh = vec![0.0; hidden];
        matvec_t_acc(&p.out_w, gz.data(), &mut gh);
        let mut gs = vec![0.0; hidden];

        // pre-activation gradients per gate, steps x hidden
        let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; steps * hidden]);
        for t in (0..steps).rev() {
            let base = t * hidden;
            for k in 0..hidden {
                let idx = base + k;
                let (f, i, o, g, ts) = (tr.f[idx], tr.i[idx], tr.o[idx], tr.g[idx], tr.tanh_s[idx]);
                let s_prev = tr.s[idx];
                let ds = gs[k] + gh[k] * o * (1.0 - ts * ts);
                da[0][idx] = ds * s_prev * f * (1.0 - f);
                da[1][idx] = ds * g * i * (1.0 - i);
                da[2][idx] = gh[k] * ts * o * (1.0 - o);
                da[3][idx] = ds * i * (1.0 - g * g);
                gs[k] = ds * f;
            }
            gh.iter_mut().for_each(|v| *v = 0.0);
            for (gate, d) in p.gates().iter().zip(&da) {
                matvec_t_acc(&gate.u, &d[base..base + hidden], &mut gh);
            }
        }

        let h_prev = &tr.h[..steps * hidden];
        let mut grads = Vec::with_capacity(14);
        for d in &da {
            let (gw, gu, gb) = accumulate_weight_grads(d, x, h_prev, steps, steps, hidden);
            grads.extend([gw, gu, gb]);
        }
        grads.push(Tensor::new(&[NUM_CLASSES, hidden], g_out_w)?);
        grads.push(gz);
        Ok(SampleGradient {
            loss,
            logits,
            grads,
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        let p = &self.params;
        let mut v = Vec::with_capacity(14);
        for g in p.gates() {
            v.extend([&g.w, &g.u, &g.b]);
        }
        v.extend([&p.out_w, &p.out_b]);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let p = &mut self.params;
        let mut v = Vec::with_capacity(14);
        for g in [&mut p.forget, &mut p.input, &mut p.output, &mut p.state] {
            v.extend([&mut g.w, &mut g.u, &mut g.b]);
        }
        v.extend([&mut p.out_w, &mut p.out_b]);
        v
    }

    fn block_names(&self) -> Vec<&'static str> {
        vec![
            "forget.w", "forget.u", "forget.b", "input.w", "input.u", "input.b", "output.w",
            "output.u", "output.b", "state.w", "state.u", "state.b", "out.weights", "out.bias",
        ]
    }

    fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }
}
