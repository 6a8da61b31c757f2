#![allow(dead_code)]

pub mod oracles;

use pmu_gaf::gaf::encode_series;
use pmu_gaf::models::{LeNet, LeNetConfig, Lstm, Network, RecurrentConfig, Rnn};
use pmu_gaf::rng::{self, Purpose};
use pmu_gaf::tensor::ops::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2x2_backward,
    maxpool2x2_forward, softmax_xent_loss, Activation,
};
use pmu_gaf::{GafImage, Tensor};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn test_rng(seed: u64) -> ChaCha20Rng {
    rng::stream(seed, Purpose::Init, 0xfd)
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha20Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Largest relative error between `analytic` and central differences of
/// `f` over the listed coordinates of `x`.
fn fd_max_err(x: &mut Tensor, analytic: &Tensor, coords: &[usize], f: &dyn Fn(&Tensor) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + FD_STEP;
        let up = f(x);
        x.data_mut()[i] = orig - FD_STEP;
        let down = f(x);
        x.data_mut()[i] = orig;
        worst = worst.max(rel_err(analytic.data()[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

fn all(t: &Tensor) -> Vec<usize> {
    (0..t.len()).collect()
}

/// `Σ r ⊙ y`, the scalar loss used to probe single ops.
fn probe(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Finite-difference checks of every layer op; returns `(name, max rel err)`.
pub fn layer_op_errors(seed: u64) -> Vec<(String, f64)> {
    let mut rng = test_rng(seed);
    let mut out = Vec::new();

    // conv2d
    let mut input = random_tensor(&[7, 6, 2], &mut rng);
    let mut kernels = random_tensor(&[3, 3, 2, 3], &mut rng);
    let mut bias = random_tensor(&[3], &mut rng);
    let r = random_tensor(&[5, 4, 3], &mut rng);
    let g = conv2d_backward(&input, &kernels, &r, true).unwrap();
    let (k0, b0, i0) = (kernels.clone(), bias.clone(), input.clone());
    out.push((
        "conv2d/input".into(),
        fd_max_err(&mut input, g.input.as_ref().unwrap(), &all(&i0), &|x| {
            probe(&conv2d_forward(x, &k0, &b0).unwrap(), &r)
        }),
    ));
    out.push((
        "conv2d/kernels".into(),
        fd_max_err(&mut kernels, &g.kernels, &all(&k0), &|k| probe(&conv2d_forward(&i0, k, &b0).unwrap(), &r)),
    ));
    out.push((
        "conv2d/bias".into(),
        fd_max_err(&mut bias, &g.bias, &all(&b0), &|b| probe(&conv2d_forward(&i0, &k0, b).unwrap(), &r)),
    ));

    // maxpool on odd spatial dims
    let mut input = random_tensor(&[5, 7, 2], &mut rng);
    let (pooled, idx) = maxpool2x2_forward(&input).unwrap();
    let r = random_tensor(pooled.shape(), &mut rng);
    let g = maxpool2x2_backward(&r, &idx).unwrap();
    let coords = all(&input);
    out.push((
        "maxpool2x2".into(),
        fd_max_err(&mut input, &g, &coords, &|x| probe(&maxpool2x2_forward(x).unwrap().0, &r)),
    ));

    // dense
    let mut input = random_tensor(&[7], &mut rng);
    let mut weights = random_tensor(&[4, 7], &mut rng);
    let mut bias = random_tensor(&[4], &mut rng);
    let r = random_tensor(&[4], &mut rng);
    let g = dense_backward(&input, &weights, &r).unwrap();
    let (w0, b0, i0) = (weights.clone(), bias.clone(), input.clone());
    out.push((
        "dense/input".into(),
        fd_max_err(&mut input, &g.input, &all(&i0), &|x| probe(&dense_forward(x, &w0, &b0).unwrap(), &r)),
    ));
    out.push((
        "dense/weights".into(),
        fd_max_err(&mut weights, &g.weights, &all(&w0), &|w| probe(&dense_forward(&i0, w, &b0).unwrap(), &r)),
    ));
    out.push((
        "dense/bias".into(),
        fd_max_err(&mut bias, &g.bias, &all(&b0), &|b| probe(&dense_forward(&i0, &w0, b).unwrap(), &r)),
    ));

    // activations; inputs kept away from the ReLU kink
    for act in [Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
        let data = (0..12)
            .map(|_| {
                let v: f64 = rng.random_range(0.1..2.0);
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let mut x = Tensor::new(&[12], data).unwrap();
        let r = random_tensor(&[12], &mut rng);
        let g = act.backward(&act.forward(&x), &r).unwrap();
        let coords = all(&x);
        out.push((
            format!("activation/{act:?}").to_lowercase(),
            fd_max_err(&mut x, &g, &coords, &|x| probe(&act.forward(x), &r)),
        ));
    }

    // softmax cross-entropy
    let mut z = random_tensor(&[3], &mut rng);
    z.scale(3.0);
    let target = rng.random_range(0..3);
    let g = Tensor::from_slice(&softmax_xent_loss(z.data(), target).unwrap().1);
    out.push((
        "softmax_xent".into(),
        fd_max_err(&mut z, &g, &[0, 1, 2], &|z| softmax_xent_loss(z.data(), target).unwrap().0),
    ));
    out
}

/// A smooth non-trivial test image of side `size`.
pub fn test_image(size: usize, seed: u64) -> GafImage {
    let mut rng = test_rng(seed ^ 0x1111);
    let phase: f64 = rng.random_range(0.0..6.0);
    let series: Vec<f64> = (0..size)
        .map(|i| (i as f64 * 0.7 + phase).sin() + 0.3 * rng.random_range(-1.0..1.0))
        .collect();
    encode_series(&series, size).unwrap()
}

/// Up to `cap` coordinates of a block, spread evenly.
fn sample_coords(len: usize, cap: usize) -> Vec<usize> {
    if len <= cap {
        (0..len).collect()
    } else {
        (0..cap).map(|k| k * len / cap).collect()
    }
}

/// Per-block finite-difference comparison for a network.
#[derive(Debug, Clone)]
pub struct BlockCheck {
    pub name: String,
    pub max_err: f64,
    pub checked: usize,
    /// Coordinates where `routing` changed within `±FD_STEP` (a pooling
    /// switch or ReLU crossing, where the loss is not differentiable).
    pub skipped: usize,
}

/// Compare `loss_and_grad` with central differences of the loss on at most
/// `cap` entries per parameter block.
pub fn network_errors<N: Network>(
    net: &mut N,
    image: &GafImage,
    target: usize,
    cap: usize,
    routing: &dyn Fn(&N) -> Vec<usize>,
) -> Vec<BlockCheck> {
    let analytic = net.loss_and_grad(image, target).unwrap().grads;
    let names = net.block_names();
    let base = routing(net);
    let mut out = Vec::new();
    for (b, grad) in analytic.iter().enumerate() {
        let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
        for i in sample_coords(grad.len(), cap) {
            let orig = net.params()[b].data()[i];
            let mut loss_at = |v: f64| {
                net.params_mut()[b].data_mut()[i] = v;
                let z = net.logits(image).unwrap();
                (softmax_xent_loss(&z, target).unwrap().0, routing(net))
            };
            let (up, r_up) = loss_at(orig + FD_STEP);
            let (down, r_down) = loss_at(orig - FD_STEP);
            loss_at(orig);
            if r_up != base || r_down != base {
                skipped += 1;
                continue;
            }
            checked += 1;
            worst = worst.max(rel_err(grad.data()[i], (up - down) / (2.0 * FD_STEP)));
        }
        out.push(BlockCheck {
            name: names[b].to_string(),
            max_err: worst,
            checked,
            skipped,
        });
    }
    out
}

pub const CNN_FD_CAP: usize = 256;

/// Full-model checks at the reduced sizes: 16x16 CNN, S=8 / h=4 recurrent.
pub fn model_errors(seed: u64) -> Vec<BlockCheck> {
    let target = (seed % 3) as usize;
    let mut out = Vec::new();
    let cnn_img = test_image(16, seed);
    let mut cnn = LeNet::new(LeNetConfig::with_input_size(16), seed).unwrap();
    let routing = |n: &LeNet| n.routing(&cnn_img).unwrap();
    for mut c in network_errors(&mut cnn, &cnn_img, target, CNN_FD_CAP, &routing) {
        c.name = format!("cnn/{}", c.name);
        out.push(c);
    }
    let rc = RecurrentConfig {
        input_size: 8,
        hidden: 4,
    };
    let img = test_image(8, seed);
    for mut c in network_errors(&mut Rnn::new(rc, seed), &img, target, usize::MAX, &|_| Vec::new()) {
        c.name = format!("rnn/{}", c.name);
        out.push(c);
    }
    for mut c in network_errors(&mut Lstm::new(rc, seed), &img, target, usize::MAX, &|_| Vec::new()) {
        c.name = format!("lstm/{}", c.name);
        out.push(c);
    }
    out
}
