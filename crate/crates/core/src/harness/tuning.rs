use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::codebook::Codebook;
use crate::data::Dataset;
use crate::engine::{evaluate, train_ensemble, DecodingLoss};
use crate::learners::{HingeConfig, LearnerConfig};
use crate::{Error, Result};

/// `10^-3, 10^-2, …, 10^3`
pub fn default_c_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub mean_accuracy: f64,
}

/// K-fold cross-validation of the hinge learner's `C`.
///
/// Example `i` is held out in fold `i % folds`. Returns every grid point and
/// the best one; ties keep the smaller `C`.
pub fn cross_validate_c(
    ds: &Dataset,
    cb: &Codebook,
    a: &Assignment,
    grid: &[f64],
    epochs: usize,
    folds: usize,
    loss: DecodingLoss,
    seed: u64,
) -> Result<(Vec<GridPoint>, GridPoint)> {
    if folds < 2 || folds > ds.len() {
        return Err(Error::invalid(format!("cannot run {folds}-fold CV on {} examples", ds.len())));
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty C grid"));
    }
    let splits: Vec<(Dataset, Dataset)> = (0..folds)
        .map(|f| {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|i| i % folds == f);
            Ok((ds.subset(&kept)?, ds.subset(&held)?))
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(grid.len());
    for &c in grid {
        let learner = LearnerConfig::Hinge(HingeConfig { c, epochs });
        let mut total = 0.0;
        for (train, valid) in &splits {
            let ens = train_ensemble(train, cb, a, &learner, seed)?;
            total += evaluate(&ens, valid, loss)?.accuracy;
        }
        points.push(GridPoint {
            c,
            mean_accuracy: total / folds as f64,
        });
    }
    let best = points
        .iter()
        .cloned()
        .reduce(|a, b| if b.mean_accuracy > a.mean_accuracy { b } else { a })
        .expect("non-empty grid");
    Ok((points, best))
}
