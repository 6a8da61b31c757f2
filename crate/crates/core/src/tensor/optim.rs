//! Heavy-ball SGD with momentum and Adam.
//!
//! Auxiliary buffers are allocated on the first step from the parameter
//! shapes; every later step must present the same shapes in the same order.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdMomentumConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
enum Buffers {
    Sgd {
        config: SgdMomentumConfig,
        velocity: Vec<Vec<f64>>,
    },
    Adam {
        config: AdamConfig,
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    },
}

/// Optimizer hyperparameters plus per-parameter state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    buffers: Buffers,
    shapes: Vec<Vec<usize>>,
    steps: u64,
}

impl OptimizerState {
    pub fn sgd_momentum(config: SgdMomentumConfig) -> Self {
        Self {
            buffers: Buffers::Sgd {
                config,
                velocity: Vec::new(),
            },
            shapes: Vec::new(),
            steps: 0,
        }
    }

    pub fn adam(config: AdamConfig) -> Self {
        Self {
            buffers: Buffers::Adam {
                config,
                first: Vec::new(),
                second: Vec::new(),
            },
            shapes: Vec::new(),
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self.buffers {
            Buffers::Sgd { .. } => OptimizerKind::SgdMomentum,
            Buffers::Adam { .. } => OptimizerKind::Adam,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn learning_rate(&self) -> f64 {
        match &self.buffers {
            Buffers::Sgd { config, .. } => config.learning_rate,
            Buffers::Adam { config, .. } => config.learning_rate,
        }
    }

    fn bind_shapes(&mut self, params: &[&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(format!(
                "{} parameter blocks but {} gradient blocks",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::shape(format!(
                    "block {i}: parameter {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        if self.steps == 0 {
            self.shapes = params.iter().map(|p| p.shape().to_vec()).collect();
            let zeros = || self.shapes.iter().map(|s| vec![0.0; s.iter().product()]).collect::<Vec<_>>();
            match &mut self.buffers {
                Buffers::Sgd { velocity, .. } => *velocity = zeros(),
                Buffers::Adam { first, second, .. } => {
                    *first = zeros();
                    *second = zeros();
                }
            }
        } else if self.shapes.len() != params.len()
            || self.shapes.iter().zip(params).any(|(s, p)| s.as_slice() != p.shape())
        {
            return Err(Error::shape("parameter shapes changed between optimizer steps"));
        }
        Ok(())
    }

    /// Apply one update. `grads[i]` pairs with `params[i]`.
    pub fn step(&mut self, mut params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        self.bind_shapes(&params, grads)?;
        self.steps += 1;
        match &mut self.buffers {
            Buffers::Sgd { config, velocity } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity) {
                    for ((w, &g), v) in p.data_mut().iter_mut().zip(g.data()).zip(v) {
                        *v = config.momentum * *v + g;
                        *w -= config.learning_rate * *v;
                    }
                }
            }
            Buffers::Adam {
                config,
                first,
                second,
            } => {
                let t = self.steps as i32;
                let c1 = 1.0 - config.beta1.powi(t);
                let c2 = 1.0 - config.beta2.powi(t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(first).zip(second) {
                    for (((w, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_slice(&[v])
    }

    #[test]
    fn sgd_momentum_two_steps() {
        let mut opt = OptimizerState::sgd_momentum(SgdMomentumConfig {
            learning_rate: 0.01,
            momentum: 0.9,
        });
        let mut w = scalar(0.0);
        opt.step(vec![&mut w], &[scalar(1.0)]).unwrap();
        let w1 = w.data()[0];
        assert!((w1 - -0.01).abs() <= 1e-15);
        opt.step(vec![&mut w], &[scalar(1.0)]).unwrap();
        assert!((w.data()[0] - w1 - -0.019).abs() <= 1e-15);
        assert_eq!(opt.steps(), 2);
    }

    #[test]
    fn zero_momentum_is_plain_sgd() {
        let mut opt = OptimizerState::sgd_momentum(SgdMomentumConfig {
            learning_rate: 0.1,
            momentum: 0.0,
        });
        let mut w = scalar(1.0);
        for g in [0.5, -2.0, 3.0] {
            let before = w.data()[0];
            opt.step(vec![&mut w], &[scalar(g)]).unwrap();
            assert_eq!(w.data()[0], before - 0.1 * g);
        }
    }

    #[test]
    fn momentum_decays_geometrically_without_gradient() {
        let mut opt = OptimizerState::sgd_momentum(SgdMomentumConfig {
            learning_rate: 0.1,
            momentum: 0.5,
        });
        let mut w = scalar(0.0);
        opt.step(vec![&mut w], &[scalar(1.0)]).unwrap();
        let mut prev_delta = -0.1;
        for _ in 0..10 {
            let before = w.data()[0];
            opt.step(vec![&mut w], &[scalar(0.0)]).unwrap();
            let delta = w.data()[0] - before;
            assert!((delta - 0.5 * prev_delta).abs() < 1e-15);
            prev_delta = delta;
        }
    }

    #[test]
    fn adam_first_step_magnitude_and_sign() {
        for g in [3.0, -0.02, 1e-9, -250.0] {
            let mut opt = OptimizerState::adam(AdamConfig::with_learning_rate(0.001));
            let mut w = scalar(0.5);
            opt.step(vec![&mut w], &[scalar(g)]).unwrap();
            let delta = w.data()[0] - 0.5;
            let want = 0.001 * g.abs() / (g.abs() + 1e-8);
            assert!((delta.abs() - want).abs() <= 1e-12, "g={g}");
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut opt = OptimizerState::adam(AdamConfig::with_learning_rate(0.001));
        let mut w = Tensor::from_slice(&[1.0, -2.0]);
        for _ in 0..5 {
            opt.step(vec![&mut w], &[Tensor::zeros(&[2])]).unwrap();
        }
        assert_eq!(w.data(), &[1.0, -2.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut opt = OptimizerState::adam(AdamConfig::with_learning_rate(0.001));
        let mut w = Tensor::zeros(&[2]);
        assert!(opt.step(vec![&mut w], &[Tensor::zeros(&[3])]).is_err());
        opt.step(vec![&mut w], &[Tensor::zeros(&[2])]).unwrap();
        let mut v = Tensor::zeros(&[3]);
        assert!(opt.step(vec![&mut v], &[Tensor::zeros(&[3])]).is_err());
    }

    #[test]
    fn steps_are_bitwise_deterministic() {
        let run = || {
            let mut opt = OptimizerState::adam(AdamConfig::with_learning_rate(0.01));
            let mut w = Tensor::from_slice(&[0.1, 0.2, 0.3]);
            for k in 0..20 {
                let g = Tensor::from_slice(&[(k as f64).sin(), (k as f64).cos(), 0.5]);
                opt.step(vec![&mut w], &[g]).unwrap();
            }
            w
        };
        assert_eq!(run().data(), run().data());
    }
}
