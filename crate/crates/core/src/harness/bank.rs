use rayon::prelude::*;

use crate::assignment::Assignment;
use crate::codebook::Codebook;
use crate::data::Dataset;
use crate::engine::{train_partition, DecodingLoss, Ensemble, Partition};
use crate::learners::{BinaryPredictor, LearnerConfig};
use crate::{Error, Result};

/// Largest class count a full bank is built for (`2^15 - 1` columns).
pub const BANK_MAX_K: usize = 16;

/// Every nontrivial binary partition of `K` classes, trained once.
///
/// Partition `p` is the class mask `2p + 1`: class 0 is always on the `+1`
/// side, and the all-classes mask is excluded. Scores are cached per example.
#[derive(Debug, Clone)]
pub struct ColumnBank {
    k: usize,
    predictors: Vec<BinaryPredictor>,
    /// `[example][partition]`
    train_scores: Vec<f64>,
    test_scores: Vec<f64>,
    train_labels: Vec<usize>,
    test_labels: Vec<usize>,
    learner: LearnerConfig,
    seed: u64,
}

pub fn bank_size(k: usize) -> usize {
    (1usize << (k - 1)) - 1
}

fn score_matrix(ds: &Dataset, predictors: &[BinaryPredictor]) -> Vec<f64> {
    ds.examples()
        .par_iter()
        .flat_map_iter(|ex| predictors.iter().map(|p| p.score(&ex.features)))
        .collect()
}

pub fn build_column_bank(
    train: &Dataset,
    test: &Dataset,
    learner: &LearnerConfig,
    seed: u64,
) -> Result<ColumnBank> {
    let k = train.num_classes();
    if !(2..=BANK_MAX_K).contains(&k) {
        return Err(Error::invalid(format!(
            "column banks need 2 <= K <= {BANK_MAX_K}, got {k}"
        )));
    }
    if test.num_classes() != k {
        return Err(Error::invalid("train and test sets disagree on K"));
    }
    learner.validate()?;
    let predictors = (0..bank_size(k))
        .into_par_iter()
        .map(|p| {
            let partition = Partition::from_mask(2 * p as u64 + 1)?;
            train_partition(train, &partition, learner, seed).map_err(|e| Error::Column {
                column: p,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let train_scores = score_matrix(train, &predictors);
    let test_scores = score_matrix(test, &predictors);
    for (which, scores) in [("train", &train_scores), ("test", &test_scores)] {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("cached {which} score")));
        }
    }
    Ok(ColumnBank {
        k,
        predictors,
        train_scores,
        test_scores,
        train_labels: train.labels().collect(),
        test_labels: test.labels().collect(),
        learner: learner.clone(),
        seed,
    })
}

/// Column `j` of `(cb, a)` as a bank partition index and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnRef {
    pub partition: usize,
    pub mask: u64,
    pub flipped: bool,
}

impl ColumnBank {
    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.predictors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictors.is_empty()
    }

    pub fn num_train(&self) -> usize {
        self.train_labels.len()
    }

    pub fn num_test(&self) -> usize {
        self.test_labels.len()
    }

    pub fn predictor(&self, partition: usize) -> &BinaryPredictor {
        &self.predictors[partition]
    }

    pub fn train_score(&self, example: usize, partition: usize) -> f64 {
        self.train_scores[example * self.len() + partition]
    }

    pub fn test_score(&self, example: usize, partition: usize) -> f64 {
        self.test_scores[example * self.len() + partition]
    }

    pub fn resolve(&self, cb: &Codebook, a: &Assignment) -> Result<Vec<ColumnRef>> {
        if cb.rows() != self.k || a.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: cb.rows().max(a.len()),
            });
        }
        (0..cb.cols())
            .map(|j| {
                let (partition, flipped) = Partition::of_column(cb, a, j);
                let mask = partition.words()[0];
                let all = (1u64 << self.k) - 1;
                if mask == all {
                    return Err(Error::invalid(format!("column {j} is constant")));
                }
                Ok(ColumnRef {
                    partition: (mask >> 1) as usize,
                    mask,
                    flipped,
                })
            })
            .collect()
    }

    /// The ensemble direct training would produce for `(cb, a)`.
    pub fn ensemble(&self, cb: &Codebook, a: &Assignment) -> Result<Ensemble> {
        let predictors = self
            .resolve(cb, a)?
            .iter()
            .map(|c| {
                let p = &self.predictors[c.partition];
                if c.flipped {
                    p.negated()
                } else {
                    p.clone()
                }
            })
            .collect();
        Ensemble::from_parts(cb.clone(), a.clone(), predictors, self.learner.clone(), self.seed)
    }

    pub fn loss_tables(&self, loss: DecodingLoss) -> LossTables {
        let table = |scores: &[f64]| {
            scores
                .iter()
                .flat_map(|&s| [loss.eval(s), loss.eval(-s)])
                .collect()
        };
        LossTables {
            loss,
            width: self.len(),
            train: table(&self.train_scores),
            test: table(&self.test_scores),
        }
    }
}

/// `L(+s)` and `L(-s)` for every cached score, laid out
/// `[example][partition][side]`.
#[derive(Debug, Clone)]
pub struct LossTables {
    pub loss: DecodingLoss,
    width: usize,
    train: Vec<f64>,
    test: Vec<f64>,
}

/// Accuracy on the test split and ε on the train split of one assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankEvaluation {
    pub test_accuracy: f64,
    pub train_epsilon: f64,
    pub test_correct: usize,
}

/// Column layout for one assignment: per class, per column, the offset of
/// the matching loss within an example's table row.
struct Layout {
    offsets: Vec<usize>,
    cols: usize,
}

impl Layout {
    fn new(columns: &[ColumnRef], k: usize) -> Self {
        let mut offsets = Vec::with_capacity(k * columns.len());
        for c in 0..k {
            for col in columns {
                let outside = (col.mask >> c) & 1 == 0;
                offsets.push(2 * col.partition + outside as usize);
            }
        }
        Self {
            offsets,
            cols: columns.len(),
        }
    }

    #[inline]
    fn class(&self, c: usize) -> &[usize] {
        &self.offsets[c * self.cols..(c + 1) * self.cols]
    }
}

/// Composes an assignment from cached losses. Sums run in the same order as
/// [`crate::engine::evaluate`], so results match direct training bit for bit.
pub fn evaluate_columns(bank: &ColumnBank, tables: &LossTables, columns: &[ColumnRef]) -> BankEvaluation {
    let k = bank.k;
    let layout = Layout::new(columns, k);
    let row_len = 2 * tables.width;

    let mut total = 0.0;
    for (i, &y) in bank.train_labels.iter().enumerate() {
        let row = &tables.train[i * row_len..(i + 1) * row_len];
        for &o in layout.class(y) {
            total += row[o];
        }
    }
    let train_epsilon = total / (bank.num_train() * columns.len()) as f64;

    let mut correct = 0;
    for (i, &y) in bank.test_labels.iter().enumerate() {
        let row = &tables.test[i * row_len..(i + 1) * row_len];
        let mut best = (0, f64::INFINITY);
        for c in 0..k {
            let mut s = 0.0;
            for &o in layout.class(c) {
                s += row[o];
            }
            if s < best.1 {
                best = (c, s);
            }
        }
        correct += (best.0 == y) as usize;
    }
    BankEvaluation {
        test_accuracy: correct as f64 / bank.num_test() as f64,
        train_epsilon,
        test_correct: correct,
    }
}

pub fn evaluate_assignment(
    bank: &ColumnBank,
    tables: &LossTables,
    cb: &Codebook,
    a: &Assignment,
) -> Result<BankEvaluation> {
    Ok(evaluate_columns(bank, tables, &bank.resolve(cb, a)?))
}
