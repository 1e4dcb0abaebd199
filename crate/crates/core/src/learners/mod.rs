//! Binary base learners and the predictors they produce.
//!
//! All learners see their training data as `(features, ±1)` pairs and are
//! pure functions of data order, configuration and seed. Flipping every
//! label yields the exact negation of the trained predictor, which the
//! column bank relies on to share one model between a column and its
//! complement.

mod arow;
mod hinge;
mod tree;

use serde::{Deserialize, Serialize};

pub use arow::{train_arow, train_arow_with_validation, ArowConfig, ArowState};
pub use hinge::{train_hinge_linear, HingeConfig};
pub use tree::{train_gini_tree, TreeConfig, TreeNode};

use crate::{Error, Result};

/// One binary training example.
pub type Labeled<'a> = (&'a [(u32, f64)], i8);

/// A trained binary scorer `f: X -> R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryPredictor {
    Linear { weights: Vec<f64>, bias: f64 },
    Tree { nodes: Vec<TreeNode> },
}

impl BinaryPredictor {
    pub fn score(&self, x: &[(u32, f64)]) -> f64 {
        match self {
            BinaryPredictor::Linear { weights, bias } => {
                let mut s = 0.0;
                for &(i, v) in x {
                    if let Some(w) = weights.get(i as usize) {
                        s += w * v;
                    }
                }
                s + bias
            }
            BinaryPredictor::Tree { nodes } => tree::predict(nodes, x),
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            BinaryPredictor::Linear { weights, bias } => BinaryPredictor::Linear {
                weights: weights.iter().map(|w| -w).collect(),
                bias: -bias,
            },
            BinaryPredictor::Tree { nodes } => BinaryPredictor::Tree {
                nodes: nodes.iter().map(TreeNode::negated).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    Hinge(HingeConfig),
    Arow(ArowConfig),
    Tree(TreeConfig),
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerConfig::Hinge(c) => c.validate(),
            LearnerConfig::Arow(c) => c.validate(),
            LearnerConfig::Tree(c) => c.validate(),
        }
    }

    pub fn train(&self, examples: &[Labeled], num_features: usize, seed: u64) -> Result<BinaryPredictor> {
        match self {
            LearnerConfig::Hinge(c) => train_hinge_linear(examples, num_features, c, seed),
            LearnerConfig::Arow(c) => train_arow(examples, num_features, c),
            LearnerConfig::Tree(c) => train_gini_tree(examples, num_features, c),
        }
    }
}

pub(crate) fn check_labels(examples: &[Labeled]) -> Result<()> {
    if let Some((_, y)) = examples.iter().find(|(_, y)| *y != 1 && *y != -1) {
        return Err(Error::invalid(format!("binary label {y} is not ±1")));
    }
    Ok(())
}
