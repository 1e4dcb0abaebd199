use serde::{Deserialize, Serialize};

use super::{check_labels, BinaryPredictor, Labeled};
use crate::data::to_dense;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            min_samples_split: 3,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split == 0 {
            return Err(Error::invalid("min_samples_split must be at least 1"));
        }
        Ok(())
    }
}

/// Node of an axis-aligned tree; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        score: f64,
    },
}

impl TreeNode {
    pub(super) fn negated(&self) -> Self {
        match *self {
            TreeNode::Leaf { score } => TreeNode::Leaf { score: -score },
            ref split => split.clone(),
        }
    }
}

fn feature_value(x: &[(u32, f64)], feature: u32) -> f64 {
    x.binary_search_by_key(&feature, |p| p.0)
        .map_or(0.0, |i| x[i].1)
}

pub(super) fn predict(nodes: &[TreeNode], x: &[(u32, f64)]) -> f64 {
    let mut at = 0;
    loop {
        match nodes[at] {
            TreeNode::Leaf { score } => return score,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                at = if feature_value(x, feature) <= threshold {
                    left
                } else {
                    right
                };
            }
        }
    }
}

/// Weighted Gini impurity times the node size: `Σ_side n_side · gini_side`.
fn weighted_gini(pos_l: usize, n_l: usize, pos_r: usize, n_r: usize) -> f64 {
    let side = |pos: usize, n: usize| {
        if n == 0 {
            return 0.0;
        }
        let (p, q) = (pos as f64, (n - pos) as f64);
        n as f64 - (p * p + q * q) / n as f64
    };
    side(pos_l, n_l) + side(pos_r, n_r)
}

/// Gini-split decision tree. A node becomes a leaf when it is pure, holds
/// fewer than `min_samples_split` examples, or has no feature with two
/// distinct values. Leaves score `(pos − neg)/(pos + neg)`.
pub fn train_gini_tree(examples: &[Labeled], num_features: usize, cfg: &TreeConfig) -> Result<BinaryPredictor> {
    cfg.validate()?;
    check_labels(examples)?;
    let dim = num_features.max(
        examples
            .iter()
            .filter_map(|(x, _)| x.last().map(|p| p.0 as usize + 1))
            .max()
            .unwrap_or(0),
    );
    let rows: Vec<Vec<f64>> = examples.iter().map(|(x, _)| to_dense(x, dim)).collect();
    let labels: Vec<bool> = examples.iter().map(|e| e.1 > 0).collect();

    let mut nodes = vec![TreeNode::Leaf { score: 0.0 }];
    let mut work = vec![(0usize, (0..examples.len()).collect::<Vec<usize>>())];
    while let Some((slot, idx)) = work.pop() {
        let pos = idx.iter().filter(|&&i| labels[i]).count();
        let n = idx.len();
        let leaf = TreeNode::Leaf {
            score: if n == 0 {
                0.0
            } else {
                (2.0 * pos as f64 - n as f64) / n as f64
            },
        };
        if pos == 0 || pos == n || n < cfg.min_samples_split {
            nodes[slot] = leaf;
            continue;
        }
        let Some((feature, threshold)) = best_split(&rows, &labels, &idx, dim) else {
            nodes[slot] = leaf;
            continue;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| rows[i][feature] <= threshold);
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(TreeNode::Leaf { score: 0.0 });
        nodes.push(TreeNode::Leaf { score: 0.0 });
        nodes[slot] = TreeNode::Split {
            feature: feature as u32,
            threshold,
            left,
            right,
        };
        work.push((right, right_idx));
        work.push((left, left_idx));
    }
    Ok(BinaryPredictor::Tree { nodes })
}

/// Lowest weighted Gini over midpoint thresholds; ties keep the smallest
/// feature, then the smallest threshold.
fn best_split(rows: &[Vec<f64>], labels: &[bool], idx: &[usize], dim: usize) -> Option<(usize, f64)> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| labels[i]).count();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = idx.to_vec();
    for f in 0..dim {
        sorted.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]));
        let mut pos_left = 0;
        for s in 0..n - 1 {
            if labels[sorted[s]] {
                pos_left += 1;
            }
            let (lo, hi) = (rows[sorted[s]][f], rows[sorted[s + 1]][f]);
            if lo == hi {
                continue;
            }
            let g = weighted_gini(pos_left, s + 1, total_pos - pos_left, n - s - 1);
            if best.is_none_or(|(bg, _, _)| g < bg) {
                best = Some((g, f, 0.5 * (lo + hi)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
