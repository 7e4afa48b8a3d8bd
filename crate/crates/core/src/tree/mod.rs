//! Regression trees, random forests and gradient boosting.
//!
//! Trees are stored as a flat node arena (root at index 0) and serialized as
//! nested JSON nodes. All three learners share the split search in
//! [`builder`].

pub mod builder;
mod forest;
mod gbt;
mod noise;

use serde::{Deserialize, Serialize};

pub use builder::{GrowParams, Objective, Presorted};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use gbt::{fit_gbt, GbtModel, GbtParams, SplitCandidates};
pub use noise::{select_by_noise, NoiseConfig, NoiseSelection};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;

pub(crate) const LEAF: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// `LEAF` for leaves.
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Leaf prediction (also kept on internal nodes).
    pub value: f64,
    /// Weighted number of training samples reaching the node.
    pub weight: f64,
    /// Objective improvement of the split (0 for leaves).
    pub gain: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

/// Nested form used for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        n: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        value: f64,
        n: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeNode", from = "TreeNode")]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut k = 0;
        loop {
            let node = &self.nodes[k];
            if node.is_leaf() {
                return k;
            }
            k = if x[node.feature] <= node.threshold {
                node.left
            } else {
                node.right
            };
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    /// Summed gain per feature.
    pub fn importances(&self, p: usize) -> Vec<f64> {
        let mut imp = vec![0.0; p];
        for n in self.nodes.iter().filter(|n| !n.is_leaf()) {
            imp[n.feature] += n.gain;
        }
        imp
    }

    /// Chosen split features in node (pre-)order.
    pub fn split_features(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| !n.is_leaf())
            .map(|n| n.feature)
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            let n = &t.nodes[k];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left).max(go(t, n.right))
            }
        }
        go(self, 0)
    }
}

impl From<Tree> for TreeNode {
    fn from(t: Tree) -> TreeNode {
        fn go(t: &Tree, k: usize) -> TreeNode {
            let n = &t.nodes[k];
            if n.is_leaf() {
                TreeNode::Leaf {
                    value: n.value,
                    n: n.weight,
                }
            } else {
                TreeNode::Split {
                    feature: n.feature,
                    threshold: n.threshold,
                    gain: n.gain,
                    value: n.value,
                    n: n.weight,
                    left: Box::new(go(t, n.left)),
                    right: Box::new(go(t, n.right)),
                }
            }
        }
        go(&t, 0)
    }
}

impl From<TreeNode> for Tree {
    fn from(root: TreeNode) -> Tree {
        fn go(node: TreeNode, nodes: &mut Vec<Node>) -> usize {
            let id = nodes.len();
            match node {
                TreeNode::Leaf { value, n } => nodes.push(Node::leaf(value, n)),
                TreeNode::Split {
                    feature,
                    threshold,
                    gain,
                    value,
                    n,
                    left,
                    right,
                } => {
                    nodes.push(Node::leaf(value, n));
                    let l = go(*left, nodes);
                    let r = go(*right, nodes);
                    let s = &mut nodes[id];
                    s.feature = feature;
                    s.threshold = threshold;
                    s.gain = gain;
                    s.left = l;
                    s.right = r;
                }
            }
            id
        }
        let mut nodes = Vec::new();
        go(root, &mut nodes);
        Tree { nodes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(8),
            min_samples_leaf: 5,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be >= 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_training(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if y.len() != x.rows() {
        return Err(Error::invalid("design and labels disagree in size"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("labels must be finite"));
    }
    Ok(())
}

/// Single least-squares regression tree over all features.
pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams) -> Result<Tree> {
    check_training(x, y)?;
    params.validate()?;
    let cols = x.columns();
    let presorted = Presorted::new(&cols);
    let w = vec![1.0; y.len()];
    Ok(grow_least_squares(&cols, &presorted, y, &w, params, cols.len(), &mut rng_from_seed(0)))
}

pub(crate) fn grow_least_squares(
    cols: &[Vec<f64>],
    presorted: &Presorted,
    y: &[f64],
    w: &[f64],
    params: &TreeParams,
    mtry: usize,
    rng: &mut crate::seed::Rng,
) -> Tree {
    let wsum: f64 = w.iter().sum();
    let offset = y.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let g: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let h = vec![1.0; y.len()];
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf as f64,
        mtry,
        objective: Objective::SquaredError { offset },
        candidates: None,
    };
    let mut tree = builder::grow(cols, presorted, &g, &h, w, &grow, rng);
    // node values as plain weighted label means, so a single-sample leaf
    // reproduces its label bit for bit
    let mut sums = vec![(0.0, 0.0); tree.nodes.len()];
    let mut row = vec![0.0; cols.len()];
    for i in (0..y.len()).filter(|&i| w[i] > 0.0) {
        for (r, c) in row.iter_mut().zip(cols) {
            *r = c[i];
        }
        let mut k = 0;
        loop {
            sums[k].0 += w[i] * y[i];
            sums[k].1 += w[i];
            let node = &tree.nodes[k];
            if node.is_leaf() {
                break;
            }
            k = if row[node.feature] <= node.threshold {
                node.left
            } else {
                node.right
            };
        }
    }
    for (node, (sy, sw)) in tree.nodes.iter_mut().zip(sums) {
        if sw > 0.0 {
            node.value = sy / sw;
        }
    }
    tree
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(xs: &[f64]) -> Matrix {
        Matrix::from_vec(xs.len(), 1, xs.to_vec())
    }

    #[test]
    fn constant_labels_single_leaf() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let t = fit_tree(&x, &[5.0; 4], &TreeParams { max_depth: None, min_samples_leaf: 1 }).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].value, 5.0);
    }

    #[test]
    fn step_function() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let t = fit_tree(&x, &[0.0, 0.0, 10.0, 10.0], &TreeParams { max_depth: None, min_samples_leaf: 1 })
            .unwrap();
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.nodes[0].threshold, 1.5);
        assert_eq!(t.predict_row(&[0.5]), 0.0);
        assert_eq!(t.predict_row(&[2.5]), 10.0);
        assert_eq!(t.nodes[0].gain, 100.0);
    }

    #[test]
    fn min_leaf_equal_n_is_mean() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let t = fit_tree(&x, &[1.0, 2.0, 3.0, 6.0], &TreeParams { max_depth: None, min_samples_leaf: 4 })
            .unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].value, 3.0);
    }

    #[test]
    fn json_round_trip() {
        let x = Matrix::from_rows(&[[0.0, 5.0], [1.0, 3.0], [2.0, 1.0], [3.0, 0.0], [4.0, 2.0]]);
        let t = fit_tree(&x, &[1.0, 2.0, 7.0, 3.0, 9.0], &TreeParams { max_depth: None, min_samples_leaf: 1 })
            .unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"kind\":\"split\""));
        let back: Tree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
