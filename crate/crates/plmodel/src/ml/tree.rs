//! Regression tree trained by exact greedy CART: every midpoint between
//! consecutive distinct sorted feature values is a candidate threshold,
//! and the split minimizing the summed child squared error wins.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Decision-tree hyperparameters. `max_depth` counts split levels below
/// the root, so a depth-1 tree is a stump with at most one internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtrConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for DtrConfig {
    fn default() -> Self {
        DtrConfig {
            max_depth: 30,
            min_samples_split: 2,
        }
    }
}

impl DtrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Training("tree depth must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Training(
                "a split needs at least two samples; min_samples_split must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// One tree node. Internal nodes route `feature <= threshold` left and
/// the rest right; leaves answer with the mean target of their training
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        count: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A trained regression tree. Node 0 is the root; children are indices
/// into the same array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Number of split levels on the deepest root-to-leaf walk; a single
    /// leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: DtrConfig,
    nodes: Vec<TreeNode>,
}

/// Best split of one node: summed child squared error, feature,
/// threshold. Lower error wins; ties go to the lowest feature index, then
/// the lowest threshold (guaranteed by strict-improvement scan order).
struct BestSplit {
    sse: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> Builder<'a> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        self.nodes.push(TreeNode::Leaf {
            value: sum / idx.len() as f64,
            count: idx.len(),
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, idx: &[usize], parent_sse: f64) -> Option<BestSplit> {
        let n = idx.len();
        let d = self.x[idx[0]].len();
        let total_sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();

        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for j in 0..d {
            // Deterministic order: by feature value, then sample index.
            sorted.sort_unstable_by(|&a, &b| {
                self.x[a][j]
                    .partial_cmp(&self.x[b][j])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for pos in 1..n {
                let prev = self.x[sorted[pos - 1]][j];
                left_sum += self.y[sorted[pos - 1]];
                left_sq += self.y[sorted[pos - 1]] * self.y[sorted[pos - 1]];
                let here = self.x[sorted[pos]][j];
                if here <= prev {
                    continue; // no boundary between equal values
                }
                let nl = pos as f64;
                let nr = (n - pos) as f64;
                // Child squared errors via the shifted-moment identity,
                // clamped against tiny negative rounding.
                let sse_l = (left_sq - left_sum * left_sum / nl).max(0.0);
                let right_sum = total_sum - left_sum;
                let sse_r = (total_sq - left_sq - right_sum * right_sum / nr).max(0.0);
                let sse = sse_l + sse_r;
                let better = match &best {
                    None => sse < parent_sse,
                    Some(b) => sse < b.sse,
                };
                if better {
                    // The midpoint of two adjacent floats can round up to
                    // `here`, which would route the whole right side left
                    // and leave an empty child. Fall back to `prev`: any
                    // threshold in [prev, here) routes identically.
                    let mut threshold = (prev + here) / 2.0;
                    if threshold >= here {
                        threshold = prev;
                    }
                    best = Some(BestSplit {
                        sse,
                        feature: j,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = (sq - sum * sum / n as f64).max(0.0);

        if depth >= self.cfg.max_depth || n < self.cfg.min_samples_split || parent_sse == 0.0 {
            return self.leaf(idx);
        }
        // A split must strictly decrease the summed child squared error;
        // otherwise the node stays a leaf.
        let Some(split) = self.best_split(idx, parent_sse) else {
            return self.leaf(idx);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= split.threshold);
        if left_idx.is_empty() || right_idx.is_empty() {
            // Unreachable with the threshold clamp above, but an empty
            // child must never become a NaN leaf.
            return self.leaf(idx);
        }

        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let left = self.build(&left_idx, depth + 1);
        let right = self.build(&right_idx, depth + 1);
        if let TreeNode::Split {
            left: l, right: r, ..
        } = &mut self.nodes[at]
        {
            *l = left;
            *r = right;
        }
        at
    }
}

fn check_training_input(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Training(format!(
            "{} feature rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    let width = x[0].len();
    if width == 0 {
        return Err(Error::Training("feature rows are empty".into()));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Training(format!(
                "row {i} has {} features, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!("row {i} has a non-finite feature")));
        }
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Training(format!("target {i} is not finite")));
    }
    Ok(())
}

/// Trains a regression tree by exact greedy CART.
pub fn dtr_train(x: &[Vec<f64>], y: &[f64], cfg: &DtrConfig) -> Result<DecisionTree> {
    cfg.validate()?;
    check_training_input(x, y)?;
    let mut b = Builder {
        x,
        y,
        cfg: *cfg,
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..x.len()).collect();
    b.build(&idx, 0);
    Ok(DecisionTree { nodes: b.nodes })
}
