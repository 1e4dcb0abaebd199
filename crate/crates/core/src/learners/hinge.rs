use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_labels, BinaryPredictor, Labeled};
use crate::rng;
use crate::{Error, Result};

/// Soft-margin linear SVM, `min ½‖w‖² + C Σ max(0, 1 − y(wᵀx + b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeConfig {
    pub c: f64,
    pub epochs: usize,
}

impl Default for HingeConfig {
    fn default() -> Self {
        Self { c: 1.0, epochs: 30 }
    }
}

impl HingeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("hinge learner needs C > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("hinge learner needs at least one epoch"));
        }
        Ok(())
    }
}

/// Stochastic subgradient descent with step `1/(λt)`, `λ = 1/(C·m)`.
///
/// The bias is an extra constant-1 feature and is regularized with the
/// weights. Examples are visited in a fresh seeded order each epoch, and the
/// returned model is the average of the iterates of the final epoch.
pub fn train_hinge_linear(
    examples: &[Labeled],
    num_features: usize,
    cfg: &HingeConfig,
    seed: u64,
) -> Result<BinaryPredictor> {
    cfg.validate()?;
    check_labels(examples)?;
    if !examples.iter().any(|e| e.1 > 0) || !examples.iter().any(|e| e.1 < 0) {
        return Err(Error::invalid("hinge learner needs both labels present"));
    }
    let m = examples.len();
    let dim = num_features.max(
        examples
            .iter()
            .filter_map(|(x, _)| x.last().map(|p| p.0 as usize + 1))
            .max()
            .unwrap_or(0),
    );
    let bias = dim;
    let lambda = 1.0 / (cfg.c * m as f64);

    // w = scale · v
    let mut v = vec![0.0; dim + 1];
    let mut scale = 1.0;
    let mut avg = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = rng::seeded(seed);
    let mut t = 0u64;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let last = epoch + 1 == cfg.epochs;
        for &i in &order {
            t += 1;
            let (x, y) = examples[i];
            let y = y as f64;
            let eta = 1.0 / (lambda * t as f64);
            let dot = x.iter().map(|&(j, val)| v[j as usize] * val).sum::<f64>() + v[bias];
            let margin = y * scale * dot;

            let shrink = 1.0 - 1.0 / t as f64;
            if shrink == 0.0 {
                v.iter_mut().for_each(|w| *w = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for &(j, val) in x {
                    v[j as usize] += step * val;
                }
                v[bias] += step;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
            if last {
                for (a, w) in avg.iter_mut().zip(&v) {
                    *a += scale * w;
                }
            }
        }
    }
    let n = m as f64;
    let b = avg[bias] / n;
    avg.truncate(dim);
    avg.iter_mut().for_each(|a| *a /= n);
    Ok(BinaryPredictor::Linear {
        weights: avg,
        bias: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn owned(points: &[(f64, i8)]) -> Vec<(Vec<(u32, f64)>, i8)> {
        points.iter().map(|&(x, y)| (vec![(0, x)], y)).collect()
    }

    fn view(data: &[(Vec<(u32, f64)>, i8)]) -> Vec<Labeled<'_>> {
        data.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
    }

    #[test]
    fn separable_one_dimensional() {
        let data = owned(&[(-1.0, -1), (1.0, 1)]);
        let cfg = HingeConfig { c: 10.0, epochs: 50 };
        let p = train_hinge_linear(&view(&data), 1, &cfg, 0).unwrap();
        assert!(p.score(&[(0, -1.0)]) < 0.0);
        assert!(p.score(&[(0, 1.0)]) > 0.0);
    }

    #[test]
    fn deterministic_in_seed() {
        let data = owned(&[(-1.0, -1), (0.2, 1), (1.0, 1), (-0.3, -1), (0.1, -1)]);
        let cfg = HingeConfig::default();
        let a = train_hinge_linear(&view(&data), 1, &cfg, 3).unwrap();
        let b = train_hinge_linear(&view(&data), 1, &cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flipped_labels_negate_exactly() {
        let data = owned(&[(-1.0, -1), (0.2, 1), (1.0, 1), (-0.3, -1), (0.1, -1)]);
        let flipped: Vec<_> = data.iter().map(|(x, y)| (x.clone(), -y)).collect();
        let cfg = HingeConfig { c: 2.0, epochs: 7 };
        let a = train_hinge_linear(&view(&data), 1, &cfg, 11).unwrap();
        let b = train_hinge_linear(&view(&flipped), 1, &cfg, 11).unwrap();
        assert_eq!(a.negated(), b);
    }

    #[test]
    fn single_label_rejected() {
        let data = owned(&[(-1.0, 1), (1.0, 1)]);
        assert!(train_hinge_linear(&view(&data), 1, &HingeConfig::default(), 0).is_err());
        let bad = HingeConfig { c: 0.0, epochs: 1 };
        let data = owned(&[(-1.0, -1), (1.0, 1)]);
        assert!(train_hinge_linear(&view(&data), 1, &bad, 0).is_err());
    }
}
