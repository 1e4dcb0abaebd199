use serde::{Deserialize, Serialize};

use super::{check_labels, BinaryPredictor, Labeled};
use crate::{Error, Result};

/// Adaptive regularization of weight vectors with a diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArowConfig {
    pub r: f64,
    pub epochs: usize,
    /// Hold out every tenth example and stop when its accuracy stops improving.
    #[serde(default)]
    pub early_stopping: bool,
}

impl Default for ArowConfig {
    fn default() -> Self {
        Self {
            r: 1.0,
            epochs: 5,
            early_stopping: false,
        }
    }
}

impl ArowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid("AROW needs r > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("AROW needs at least one epoch"));
        }
        Ok(())
    }
}

/// Mean and diagonal covariance; the last coordinate is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ArowState {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    r: f64,
}

impl ArowState {
    pub fn new(num_features: usize, r: f64) -> Self {
        Self {
            mean: vec![0.0; num_features + 1],
            variance: vec![1.0; num_features + 1],
            r,
        }
    }

    fn bias(&self) -> usize {
        self.mean.len() - 1
    }

    pub fn margin(&self, x: &[(u32, f64)]) -> f64 {
        x.iter()
            .map(|&(i, v)| self.mean.get(i as usize).map_or(0.0, |m| m * v))
            .sum::<f64>()
            + self.mean[self.bias()]
    }

    /// One online step; returns `(alpha, beta)` when the example triggered an update.
    pub fn update(&mut self, x: &[(u32, f64)], y: i8) -> Option<(f64, f64)> {
        let y = y as f64;
        let margin = y * self.margin(x);
        if margin >= 1.0 {
            return None;
        }
        let b = self.bias();
        let confidence = x
            .iter()
            .map(|&(i, v)| self.variance[i as usize] * v * v)
            .sum::<f64>()
            + self.variance[b];
        let beta = 1.0 / (confidence + self.r);
        let alpha = (1.0 - margin).max(0.0) * beta;
        for &(i, v) in x.iter().chain(std::iter::once(&(b as u32, 1.0))) {
            let i = i as usize;
            let sx = self.variance[i] * v;
            self.mean[i] += alpha * y * sx;
            self.variance[i] -= beta * sx * sx;
        }
        Some((alpha, beta))
    }

    pub fn predictor(&self) -> BinaryPredictor {
        let b = self.bias();
        BinaryPredictor::Linear {
            weights: self.mean[..b].to_vec(),
            bias: self.mean[b],
        }
    }
}

fn feature_dim(examples: &[Labeled], num_features: usize) -> usize {
    num_features.max(
        examples
            .iter()
            .filter_map(|(x, _)| x.last().map(|p| p.0 as usize + 1))
            .max()
            .unwrap_or(0),
    )
}

/// Passes over `examples` in the given order, `cfg.epochs` times.
pub fn train_arow(examples: &[Labeled], num_features: usize, cfg: &ArowConfig) -> Result<BinaryPredictor> {
    cfg.validate()?;
    check_labels(examples)?;
    if cfg.early_stopping && examples.len() >= 10 {
        let (mut train, mut valid) = (Vec::new(), Vec::new());
        for (i, e) in examples.iter().enumerate() {
            if i % 10 == 9 {
                valid.push(*e);
            } else {
                train.push(*e);
            }
        }
        let dim = feature_dim(examples, num_features);
        return train_arow_with_validation(&train, &valid, dim, cfg);
    }
    let mut state = ArowState::new(feature_dim(examples, num_features), cfg.r);
    for _ in 0..cfg.epochs {
        for &(x, y) in examples {
            state.update(x, y);
        }
    }
    Ok(state.predictor())
}

/// Like [`train_arow`], but keeps the epoch with the best validation accuracy
/// and stops after the first epoch that fails to improve on it.
pub fn train_arow_with_validation(
    train: &[Labeled],
    validation: &[Labeled],
    num_features: usize,
    cfg: &ArowConfig,
) -> Result<BinaryPredictor> {
    cfg.validate()?;
    check_labels(train)?;
    check_labels(validation)?;
    let accuracy = |s: &ArowState| {
        validation
            .iter()
            .filter(|(x, y)| (s.margin(x) > 0.0) == (*y > 0))
            .count()
    };
    let mut state = ArowState::new(feature_dim(train, num_features), cfg.r);
    let mut best: Option<(usize, ArowState)> = None;
    for _ in 0..cfg.epochs {
        for &(x, y) in train {
            state.update(x, y);
        }
        let acc = accuracy(&state);
        match &best {
            Some((b, _)) if acc <= *b => break,
            _ => best = Some((acc, state.clone())),
        }
    }
    Ok(best.map_or_else(|| state.predictor(), |(_, s)| s.predictor()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_margin_takes_full_step() {
        let mut s = ArowState::new(2, 1.0);
        let (alpha, beta) = s.update(&[(0, 1.0), (1, 2.0)], 1).unwrap();
        // confidence = 1 + 4 + 1 (bias), beta = 1/(6 + r)
        assert_eq!(beta, 1.0 / 7.0);
        assert_eq!(alpha, beta);
    }

    #[test]
    fn variances_shrink_but_stay_positive() {
        let mut s = ArowState::new(3, 0.5);
        let stream = [
            (vec![(0, 1.0), (2, -3.0)], 1),
            (vec![(1, 2.0)], -1),
            (vec![(0, -1.0), (1, 0.5), (2, 4.0)], -1),
            (vec![(0, 10.0)], 1),
        ];
        for _ in 0..20 {
            for (x, y) in &stream {
                let before = s.variance.clone();
                s.update(x, *y);
                for (a, b) in s.variance.iter().zip(&before) {
                    assert!(*a <= *b && *a > 0.0);
                }
            }
        }
    }

    #[test]
    fn separable_stream_is_fit() {
        let pts: Vec<(Vec<(u32, f64)>, i8)> = (0..40)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 3.0;
                let y = (i as f64 * 0.91).cos() * 3.0;
                let label = if x + 0.5 * y > 0.4 { 1 } else { -1 };
                (vec![(0, x + label as f64 * 0.5), (1, y)], label)
            })
            .collect();
        let view: Vec<Labeled> = pts.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let cfg = ArowConfig { r: 0.1, epochs: 8, early_stopping: false };
        let p = train_arow(&view, 2, &cfg).unwrap();
        for (x, y) in &view {
            assert_eq!(p.score(x) > 0.0, *y > 0);
        }
    }

    #[test]
    fn early_stopping_returns_a_model() {
        let pts: Vec<(Vec<(u32, f64)>, i8)> = (0..50)
            .map(|i| (vec![(0, i as f64 - 25.0)], if i >= 25 { 1 } else { -1 }))
            .collect();
        let view: Vec<Labeled> = pts.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let cfg = ArowConfig { r: 1.0, epochs: 10, early_stopping: true };
        let p = train_arow(&view, 1, &cfg).unwrap();
        assert!(p.score(&[(0, 20.0)]) > 0.0 && p.score(&[(0, -20.0)]) < 0.0);
    }

    #[test]
    fn flipped_labels_negate_exactly() {
        let pts: Vec<(Vec<(u32, f64)>, i8)> = (0..30)
            .map(|i| (vec![(0, (i as f64).sin()), (1, (i as f64 * 0.3).cos())], if i % 3 == 0 { 1 } else { -1 }))
            .collect();
        let a: Vec<Labeled> = pts.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let b: Vec<Labeled> = pts.iter().map(|(x, y)| (x.as_slice(), -*y)).collect();
        let cfg = ArowConfig::default();
        assert_eq!(train_arow(&a, 2, &cfg).unwrap().negated(), train_arow(&b, 2, &cfg).unwrap());
    }
}
