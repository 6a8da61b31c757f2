//! Soft-margin RBF support vector machine trained by sequential minimal
//! optimization, with one-vs-one voting for three classes.
//!
//! The binary solver works on the dual
//! `min ½ αᵀQα - Σα  s.t. 0 ≤ α ≤ C, yᵀα = 0` with `Q_ij = y_i y_j K(x_i, x_j)`.
//! Each iteration picks the maximal violating pair and solves the
//! two-variable subproblem in closed form. Training stops once the KKT gap
//! `max_{I_up} -y G - min_{I_low} -y G` falls below the tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::NUM_CLASSES;

/// Floor for a non-positive curvature along the working pair.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: f64,
    pub tolerance: f64,
    /// Iteration cap for one binary problem.
    pub max_passes: usize,
    /// Per-feature z-scoring with training-set statistics.
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.033,
            tolerance: 1e-3,
            max_passes: 1_000_000,
            standardize: true,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.gamma >= 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "svm needs C > 0, gamma >= 0, tolerance > 0 (got {}, {}, {})",
                self.c, self.gamma, self.tolerance
            )));
        }
        Ok(())
    }
}

/// `exp(-gamma ‖x - y‖²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("kernel on vectors of length {} and {}", x.len(), y.len())));
    }
    Ok(rbf_unchecked(x, y, gamma))
}

fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Symmetric `n x n` RBF Gram matrix, row-major.
pub fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rbf_unchecked(&x[i], &x[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// `Σα - ½ Σ_ij α_i α_j y_i y_j K_ij` (to be maximised).
pub fn dual_objective(alphas: &[f64], labels: &[f64], kernel: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * labels[i] * labels[j] * kernel[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Decision function `f(x) = Σ coef_i K(sv_i, x) + bias`, `coef_i = α_i y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf_unchecked(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone)]
pub struct BinaryFit {
    /// One multiplier per training sample.
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Indices with `α > 0`.
    pub support_indices: Vec<usize>,
    pub iterations: usize,
    /// Final KKT gap.
    pub kkt_gap: f64,
    pub model: BinarySvm,
}

/// Train a binary soft-margin SVM. Labels must be `-1.0` or `+1.0`.
pub fn svm_fit_binary(features: &[Vec<f64>], labels: &[f64], cfg: &SvmConfig) -> Result<BinaryFit> {
    cfg.validate()?;
    if features.len() != labels.len() {
        return Err(Error::shape(format!("{} rows but {} labels", features.len(), labels.len())));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidArgument("binary labels must be -1 or +1".into()));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::InvalidArgument("binary SVM needs both classes".into()));
    }
    let d = features[0].len();
    if features.iter().any(|r| r.len() != d) {
        return Err(Error::shape("ragged feature rows"));
    }

    let n = features.len();
    let c = cfg.c;
    let k = kernel_matrix(features, cfg.gamma);
    let q = |i: usize, j: usize| labels[i] * labels[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let mut gap;
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let (mut g_max, mut g_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            let v = -labels[t] * grad[t];
            if in_up(alpha[t], labels[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], labels[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        gap = g_max - g_min;
        if i == usize::MAX || j == usize::MAX || gap < cfg.tolerance || iterations >= cfg.max_passes {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (yi, yj) = (labels[i], labels[j]);
        if yi != yj {
            let curv = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(MIN_CURVATURE);
            let delta = (-grad[i] - grad[j]) / curv;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let curv = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(MIN_CURVATURE);
            let delta = (grad[i] - grad[j]) / curv;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // Offset from free multipliers, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = labels[t] * grad[t];
        if alpha[t] >= c {
            if labels[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if labels[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let bias = -rho;

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = BinarySvm {
        support: support_indices.iter().map(|&t| features[t].clone()).collect(),
        coef: support_indices.iter().map(|&t| alpha[t] * labels[t]).collect(),
        bias,
        gamma: cfg.gamma,
    };
    Ok(BinaryFit {
        alphas: alpha,
        bias,
        support_indices,
        iterations,
        kkt_gap: gap,
        model,
    })
}

/// Per-feature z-score using training statistics; zero-variance features
/// are only centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// One-vs-one machines for class pairs (0,1), (0,2), (1,2). A positive
/// decision value votes for the first class of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvm {
    pub standardizer: Standardizer,
    pub machines: Vec<((usize, usize), BinarySvm)>,
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

pub fn svm_fit_multiclass(features: &[Vec<f64>], labels: &[usize], cfg: &SvmConfig) -> Result<MulticlassSvm> {
    cfg.validate()?;
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::shape(format!("{} rows but {} labels", features.len(), labels.len())));
    }
    for class in 0..NUM_CLASSES {
        if !labels.contains(&class) {
            return Err(Error::InvalidArgument(format!("class {class} missing from SVM training data")));
        }
    }
    let standardizer = if cfg.standardize {
        Standardizer::fit(features)
    } else {
        Standardizer::identity(features[0].len())
    };
    let scaled: Vec<Vec<f64>> = features.iter().map(|x| standardizer.apply(x)).collect();

    let mut machines = Vec::with_capacity(PAIRS.len());
    for (a, b) in PAIRS {
        let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = scaled
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == a || l == b)
            .map(|(x, &l)| (x.clone(), if l == a { 1.0 } else { -1.0 }))
            .unzip();
        machines.push(((a, b), svm_fit_binary(&xs, &ys, cfg)?.model));
    }
    Ok(MulticlassSvm {
        standardizer,
        machines,
    })
}

impl MulticlassSvm {
    /// Pairwise decision values in pair order.
    pub fn decisions(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardizer.apply(x);
        self.machines.iter().map(|(_, m)| m.decision(&z)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.standardizer.mean.len() {
            return Err(Error::shape(format!(
                "svm expects {} features, got {}",
                self.standardizer.mean.len(),
                x.len()
            )));
        }
        Ok(vote(&self.machines.iter().map(|(p, _)| *p).collect::<Vec<_>>(), &self.decisions(x)))
    }

    /// Blocks: mean, scale, then per machine support matrix, coefficients
    /// and `[bias, gamma]`.
    pub fn to_blocks(&self) -> Vec<Tensor> {
        let d = self.standardizer.mean.len();
        let mut blocks = vec![
            Tensor::from_slice(&self.standardizer.mean),
            Tensor::from_slice(&self.standardizer.scale),
        ];
        for (_, m) in &self.machines {
            // a machine without support vectors stores one inert zero row
            let (support, coef) = if m.support.is_empty() {
                (vec![0.0; d], vec![0.0])
            } else {
                (m.support.concat(), m.coef.clone())
            };
            blocks.push(Tensor::new(&[coef.len(), d], support).expect("support matrix"));
            blocks.push(Tensor::from_slice(&coef));
            blocks.push(Tensor::from_slice(&[m.bias, m.gamma]));
        }
        blocks
    }

    pub fn from_blocks(blocks: &[Tensor]) -> Result<Self> {
        if blocks.len() != 2 + 3 * PAIRS.len() {
            return Err(Error::Checkpoint(format!("svm checkpoint has {} blocks", blocks.len())));
        }
        let standardizer = Standardizer {
            mean: blocks[0].data().to_vec(),
            scale: blocks[1].data().to_vec(),
        };
        let d = standardizer.mean.len();
        let mut machines = Vec::with_capacity(PAIRS.len());
        for (k, pair) in PAIRS.into_iter().enumerate() {
            let (sv, coef, tail) = (&blocks[2 + 3 * k], &blocks[3 + 3 * k], &blocks[4 + 3 * k]);
            if sv.shape().len() != 2 || sv.shape()[1] != d || sv.shape()[0] != coef.len() || tail.len() != 2 {
                return Err(Error::Checkpoint("svm machine blocks have inconsistent shapes".into()));
            }
            machines.push((
                pair,
                BinarySvm {
                    support: sv.data().chunks_exact(d).map(<[f64]>::to_vec).collect(),
                    coef: coef.data().to_vec(),
                    bias: tail.data()[0],
                    gamma: tail.data()[1],
                },
            ));
        }
        Ok(Self {
            standardizer,
            machines,
        })
    }
}

/// Majority vote; a tie goes to the tied class whose winning decision had
/// the largest magnitude, then to the lowest class index.
pub(crate) fn vote(pairs: &[(usize, usize)], decisions: &[f64]) -> usize {
    let mut votes = [0usize; NUM_CLASSES];
    let mut strength = [0.0f64; NUM_CLASSES];
    for (&(a, b), &f) in pairs.iter().zip(decisions) {
        let winner = if f > 0.0 { a } else { b };
        votes[winner] += 1;
        strength[winner] = strength[winner].max(f.abs());
    }
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if votes[k] > votes[best] || (votes[k] == votes[best] && strength[k] > strength[best]) {
            best = k;
        }
    }
    best
}
