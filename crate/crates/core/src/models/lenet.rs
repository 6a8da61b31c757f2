use serde::{Deserialize, Serialize};

use super::{check_input, to_logits, xent, Logits, ModelKind, Network, SampleGradient};
use crate::error::{Error, Result};
use crate::gaf::GafImage;
use crate::rng::{self, Purpose};
use crate::tensor::ops::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2x2_backward,
    maxpool2x2_forward, Activation, PoolIndices,
};
use crate::tensor::Tensor;
use crate::NUM_CLASSES;

/// LeNet-5 with a widened first convolution:
/// `conv(k, c1) → act → pool → conv(k, c2) → act → pool → fc1 → act → fc2 → act → out(3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeNetConfig {
    pub input_size: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub kernel: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub activation: Activation,
}

impl Default for LeNetConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            conv1_channels: 32,
            conv2_channels: 16,
            kernel: 5,
            fc1_units: 120,
            fc2_units: 84,
            activation: Activation::Relu,
        }
    }
}

impl LeNetConfig {
    pub fn with_input_size(input_size: usize) -> Self {
        Self {
            input_size,
            ..Self::default()
        }
    }

    /// Spatial side after the second pooling layer.
    pub fn pooled_side(&self) -> Result<usize> {
        let k = self.kernel;
        let too_small = || {
            Error::InvalidArgument(format!(
                "input {} too small for two {k}x{k} conv + pool stages",
                self.input_size
            ))
        };
        let c1 = self.input_size.checked_sub(k - 1).filter(|&v| v >= 2).ok_or_else(too_small)?;
        let c2 = (c1 / 2).checked_sub(k - 1).filter(|&v| v >= 2).ok_or_else(too_small)?;
        Ok(c2 / 2)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let side = self.pooled_side()?;
        Ok(side * side * self.conv2_channels)
    }
}

#[derive(Debug, Clone)]
pub struct LeNet {
    config: LeNetConfig,
    conv1_k: Tensor,
    conv1_b: Tensor,
    conv2_k: Tensor,
    conv2_b: Tensor,
    fc1_w: Tensor,
    fc1_b: Tensor,
    fc2_w: Tensor,
    fc2_b: Tensor,
    out_w: Tensor,
    out_b: Tensor,
}

struct Cache {
    input: Tensor,
    act1: Tensor,
    pool1: Tensor,
    idx1: PoolIndices,
    act2: Tensor,
    pool2_shape: Vec<usize>,
    idx2: PoolIndices,
    flat: Tensor,
    h1: Tensor,
    h2: Tensor,
    logits: Logits,
}

impl LeNet {
    /// All-zero parameters.
    pub fn zeros(config: LeNetConfig) -> Result<Self> {
        let flat = config.flatten_len()?;
        let (k, c1, c2) = (config.kernel, config.conv1_channels, config.conv2_channels);
        Ok(Self {
            config,
            conv1_k: Tensor::zeros(&[k, k, 1, c1]),
            conv1_b: Tensor::zeros(&[c1]),
            conv2_k: Tensor::zeros(&[k, k, c1, c2]),
            conv2_b: Tensor::zeros(&[c2]),
            fc1_w: Tensor::zeros(&[config.fc1_units, flat]),
            fc1_b: Tensor::zeros(&[config.fc1_units]),
            fc2_w: Tensor::zeros(&[config.fc2_units, config.fc1_units]),
            fc2_b: Tensor::zeros(&[config.fc2_units]),
            out_w: Tensor::zeros(&[NUM_CLASSES, config.fc2_units]),
            out_b: Tensor::zeros(&[NUM_CLASSES]),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new(config: LeNetConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = rng::stream(seed, Purpose::Init, ModelKind::Cnn.tag() as u64);
        let (k, c1, c2) = (config.kernel, config.conv1_channels, config.conv2_channels);
        let flat = config.flatten_len()?;
        net.conv1_k = Tensor::glorot(&[k, k, 1, c1], k * k, k * k * c1, &mut rng);
        net.conv2_k = Tensor::glorot(&[k, k, c1, c2], k * k * c1, k * k * c2, &mut rng);
        net.fc1_w = Tensor::glorot(&[config.fc1_units, flat], flat, config.fc1_units, &mut rng);
        net.fc2_w = Tensor::glorot(&[config.fc2_units, config.fc1_units], config.fc1_units, config.fc2_units, &mut rng);
        net.out_w = Tensor::glorot(&[NUM_CLASSES, config.fc2_units], config.fc2_units, NUM_CLASSES, &mut rng);
        Ok(net)
    }

    pub fn config(&self) -> &LeNetConfig {
        &self.config
    }

    /// Max-pool winners, followed (for ReLU) by the active-unit mask of
    /// every activation layer. The loss is smooth in the parameters
    /// wherever this pattern stays constant.
    pub fn routing(&self, image: &GafImage) -> Result<Vec<usize>> {
        let c = self.forward(image)?;
        let mut out: Vec<usize> = c.idx1.argmax().iter().chain(c.idx2.argmax()).copied().collect();
        if self.config.activation == Activation::Relu {
            for t in [&c.act1, &c.act2, &c.h1, &c.h2] {
                out.extend(t.data().iter().map(|&v| usize::from(v > 0.0)));
            }
        }
        Ok(out)
    }

    fn forward(&self, image: &GafImage) -> Result<Cache> {
        check_input(image, self.config.input_size)?;
        let act = self.config.activation;
        let s = self.config.input_size;
        let input = Tensor::new(&[s, s, 1], image.values().to_vec())?;

        let act1 = act.forward(&conv2d_forward(&input, &self.conv1_k, &self.conv1_b)?);
        let (pool1, idx1) = maxpool2x2_forward(&act1)?;
        let act2 = act.forward(&conv2d_forward(&pool1, &self.conv2_k, &self.conv2_b)?);
        let (pool2, idx2) = maxpool2x2_forward(&act2)?;
        let pool2_shape = pool2.shape().to_vec();
        let flat = pool2.reshape(&[self.fc1_w.shape()[1]])?;
        let h1 = act.forward(&dense_forward(&flat, &self.fc1_w, &self.fc1_b)?);
        let h2 = act.forward(&dense_forward(&h1, &self.fc2_w, &self.fc2_b)?);
        let out = dense_forward(&h2, &self.out_w, &self.out_b)?;
        Ok(Cache {
            input,
            act1,
            pool1,
            idx1,
            act2,
            pool2_shape,
            idx2,
            flat,
            h1,
            h2,
            logits: to_logits(&out),
        })
    }
}

impl Network for LeNet {
    fn kind(&self) -> ModelKind {
        ModelKind::Cnn
    }

    fn input_size(&self) -> usize {
        self.config.input_size
    }

    fn logits(&self, image: &GafImage) -> Result<Logits> {
        Ok(self.forward(image)?.logits)
    }

    fn loss_and_grad(&self, image: &GafImage, target: usize) -> Result<SampleGradient> {
        let c = self.forward(image)?;
        let act = self.config.activation;
        let (loss, g_logits) = xent(&c.logits, target)?;

        let out = dense_backward(&c.h2, &self.out_w, &g_logits)?;
        let g = act.backward(&c.h2, &out.input)?;
        let fc2 = dense_backward(&c.h1, &self.fc2_w, &g)?;
        let g = act.backward(&c.h1, &fc2.input)?;
        let fc1 = dense_backward(&c.flat, &self.fc1_w, &g)?;
        let g = fc1.input.clone().reshape(&c.pool2_shape)?;
        let g = maxpool2x2_backward(&g, &c.idx2)?;
        let g = act.backward(&c.act2, &g)?;
        let conv2 = conv2d_backward(&c.pool1, &self.conv2_k, &g, true)?;
        let g = maxpool2x2_backward(conv2.input.as_ref().expect("requested"), &c.idx1)?;
        let g = act.backward(&c.act1, &g)?;
        let conv1 = conv2d_backward(&c.input, &self.conv1_k, &g, false)?;

        Ok(SampleGradient {
            loss,
            logits: c.logits,
            grads: vec![
                conv1.kernels,
                conv1.bias,
                conv2.kernels,
                conv2.bias,
                fc1.weights,
                fc1.bias,
                fc2.weights,
                fc2.bias,
                out.weights,
                out.bias,
            ],
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.conv1_k,
            &self.conv1_b,
            &self.conv2_k,
            &self.conv2_b,
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            &self.fc2_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1_k,
            &mut self.conv1_b,
            &mut self.conv2_k,
            &mut self.conv2_b,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            &mut self.fc2_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    fn block_names(&self) -> Vec<&'static str> {
        vec![
            "conv1.kernels",
            "conv1.bias",
            "conv2.kernels",
            "conv2.bias",
            "fc1.weights",
            "fc1.bias",
            "fc2.weights",
            "fc2.bias",
            "out.weights",
            "out.bias",
        ]
    }

    fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }
}
