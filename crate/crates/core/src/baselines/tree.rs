//! CART classification tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! feature values and a sample goes left when `value <= threshold`. Among
//! equally good splits the lowest feature index wins, then the lowest
//! threshold. A node is split only if the split strictly lowers the
//! weighted impurity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::Tensor;
use crate::NUM_CLASSES;

/// Impurity comparisons treat differences below this as ties.
const IMPURITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtConfig {
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for DtConfig {
    fn default() -> Self {
        Self {
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
        }
    }
}

impl DtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return Err(Error::InvalidArgument(format!(
                "min_samples_split must be >= 2 and min_samples_leaf >= 1, got {} / {}",
                self.min_samples_split, self.min_samples_leaf
            )));
        }
        Ok(())
    }
}

/// `1 - Σ p_i²`.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("gini impurity of an empty node".into()));
    }
    let t = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: f64,
}

fn class_counts(labels: &[usize], idx: &[usize]) -> [usize; NUM_CLASSES] {
    let mut c = [0; NUM_CLASSES];
    for &i in idx {
        c[labels[i]] += 1;
    }
    c
}

fn majority(counts: &[usize; NUM_CLASSES]) -> usize {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    best
}

fn weighted_gini(left: &[usize; NUM_CLASSES], right: &[usize; NUM_CLASSES]) -> f64 {
    let (nl, nr) = (left.iter().sum::<usize>(), right.iter().sum::<usize>());
    let n = (nl + nr) as f64;
    let part = |c: &[usize; NUM_CLASSES], m: usize| {
        if m == 0 {
            0.0
        } else {
            m as f64 * gini_impurity(c).expect("non-empty")
        }
    };
    (part(left, nl) + part(right, nr)) / n
}

/// Best split of the samples `idx`, honouring `min_leaf`.
pub(crate) fn best_split(
    features: &[Vec<f64>],
    labels: &[usize],
    idx: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    let total = class_counts(labels, idx);
    let dims = features[idx[0]].len();
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for f in 0..dims {
        order.sort_by(|&a, &b| features[a][f].total_cmp(&features[b][f]));
        let mut left = [0usize; NUM_CLASSES];
        for p in 1..n {
            left[labels[order[p - 1]]] += 1;
            let (lo, hi) = (features[order[p - 1]][f], features[order[p]][f]);
            if lo == hi || p < min_leaf || n - p < min_leaf {
                continue;
            }
            let mut right = total;
            for k in 0..NUM_CLASSES {
                right[k] -= left[k];
            }
            let impurity = weighted_gini(&left, &right);
            if best.is_none_or(|b| impurity < b.impurity - IMPURITY_EPS) {
                let mid = (lo + hi) / 2.0;
                best = Some(SplitChoice {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    impurity,
                });
            }
        }
    }
    best
}

fn check_inputs(features: &[Vec<f64>], labels: &[usize]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let d = features[0].len();
    if let Some(i) = features.iter().position(|r| r.len() != d) {
        return Err(Error::shape(format!("row {i} has {} features, expected {d}", features[i].len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(Error::InvalidArgument(format!("class index {l} out of range")));
    }
    Ok(d)
}

/// Grow a CART tree greedily.
pub fn dt_fit(features: &[Vec<f64>], labels: &[usize], cfg: &DtConfig) -> Result<DecisionTree> {
    cfg.validate()?;
    let n_features = check_inputs(features, labels)?;
    let mut nodes = Vec::new();
    let idx: Vec<usize> = (0..features.len()).collect();
    grow(features, labels, &idx, 0, cfg, &mut nodes);
    Ok(DecisionTree { nodes, n_features })
}

fn grow(
    features: &[Vec<f64>],
    labels: &[usize],
    idx: &[usize],
    depth: usize,
    cfg: &DtConfig,
    nodes: &mut Vec<Node>,
) -> usize {
    let me = nodes.len();
    let counts = class_counts(labels, idx);
    let leaf = Node::Leaf {
        class: majority(&counts),
    };
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || idx.len() < cfg.min_samples_split || cfg.max_depth.is_some_and(|d| depth >= d) {
        nodes.push(leaf);
        return me;
    }
    let parent = gini_impurity(&counts).expect("non-empty node");
    let Some(split) = best_split(features, labels, idx, cfg.min_samples_leaf)
        .filter(|s| s.impurity < parent - IMPURITY_EPS)
    else {
        nodes.push(leaf);
        return me;
    };

    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| features[i][split.feature] <= split.threshold);
    nodes.push(Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow(features, labels, &l, depth + 1, cfg, nodes);
    let right = grow(features, labels, &r, depth + 1, cfg, nodes);
    if let Node::Split {
        left: ls, right: rs, ..
    } = &mut nodes[me]
    {
        *ls = left;
        *rs = right;
    }
    me
}

pub fn dt_predict(tree: &DecisionTree, x: &[f64]) -> Result<usize> {
    tree.predict(x)
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::shape(format!(
                "tree expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return Ok(class),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Preorder node table `[n x 5]`: feature (-1 for a leaf), threshold,
    /// left child, right child, leaf class.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.nodes.len() * 5);
        for node in &self.nodes {
            match *node {
                Node::Leaf { class } => data.extend([-1.0, 0.0, 0.0, 0.0, class as f64]),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => data.extend([feature as f64, threshold, left as f64, right as f64, 0.0]),
            }
        }
        Tensor::new(&[self.nodes.len(), 5], data).expect("tree has at least one node")
    }

    pub fn from_tensor(table: &Tensor, n_features: usize) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(format!("decision tree table: {m}"));
        let [n, 5] = *table.shape() else {
            return Err(bad("expected n x 5"));
        };
        let as_index = |v: f64, limit: usize| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < limit {
                Ok(v as usize)
            } else {
                Err(bad("index out of range"))
            }
        };
        let mut nodes = Vec::with_capacity(n);
        for (i, row) in table.data().chunks_exact(5).enumerate() {
            nodes.push(if row[0] < 0.0 {
                Node::Leaf {
                    class: as_index(row[4], NUM_CLASSES)?,
                }
            } else {
                let (left, right) = (as_index(row[2], n)?, as_index(row[3], n)?);
                if left <= i || right <= i {
                    return Err(bad("children must follow their parent"));
                }
                Node::Split {
                    feature: as_index(row[0], n_features)?,
                    threshold: row[1],
                    left,
                    right,
                }
            });
        }
        Ok(Self { nodes, n_features })
    }

    pub fn to_checkpoint(&self, kind_tag: u32, meta: String) -> Checkpoint {
        Checkpoint {
            kind: kind_tag,
            meta,
            blocks: vec![self.to_tensor()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[5, 0, 0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[1, 1]).unwrap(), 0.5);
        assert!((gini_impurity(&[2, 1]).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn one_dimensional_split() {
        let x = vec![vec![0.0], vec![1.0], vec![10.0]];
        let tree = dt_fit(&x, &[0, 0, 1], &DtConfig::default()).unwrap();
        assert_eq!(
            tree.nodes()[0],
            Node::Split {
                feature: 0,
                threshold: 5.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(tree.nodes()[1], Node::Leaf { class: 0 });
        assert_eq!(tree.nodes()[2], Node::Leaf { class: 1 });
        assert_eq!(tree.predict(&[5.5]).unwrap(), 0);
        assert_eq!(tree.predict(&[5.6]).unwrap(), 1);
    }

    #[test]
    fn pure_node_is_single_leaf() {
        let x = vec![vec![0.0, 1.0], vec![3.0, -1.0]];
        let tree = dt_fit(&x, &[2, 2], &DtConfig::default()).unwrap();
        assert_eq!(tree.nodes(), &[Node::Leaf { class: 2 }]);
        assert_eq!(tree.predict(&[100.0, 100.0]).unwrap(), 2);
        assert!(tree.predict(&[1.0]).is_err());
    }

    #[test]
    fn max_depth_and_min_leaf_limit_growth() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let full = dt_fit(&x, &y, &DtConfig::default()).unwrap();
        assert!(full.depth() >= 3);
        let shallow = dt_fit(&x, &y, &DtConfig { max_depth: Some(1), ..DtConfig::default() }).unwrap();
        assert!(shallow.depth() <= 1);
        let bulky = dt_fit(&x, &y, &DtConfig { min_samples_leaf: 4, ..DtConfig::default() }).unwrap();
        for node in bulky.nodes() {
            if let Node::Split { threshold, .. } = node {
                let left = x.iter().filter(|v| v[0] <= *threshold).count();
                assert!(left >= 4 && x.len() - left >= 4);
            }
        }
        assert!(DtConfig { min_samples_split: 1, ..DtConfig::default() }.validate().is_err());
    }

    #[test]
    fn tensor_round_trip() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i * 7 % 5) as f64, i as f64]).collect();
        let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let tree = dt_fit(&x, &y, &DtConfig::default()).unwrap();
        let back = DecisionTree::from_tensor(&tree.to_tensor(), 2).unwrap();
        assert_eq!(back, tree);
    }
}
