//! The multiclass reduction: binary subproblems from a codebook read through
//! an assignment, ensemble training, loss-based decoding and the bound on the
//! training error.
//!
//! Codebooks are never physically permuted. Class `c` uses row
//! `assignment.row_of(c)` wherever a bit is needed.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::codebook::{min_row_distance, Codebook};
use crate::data::Dataset;
use crate::learners::{BinaryPredictor, LearnerConfig, Labeled};
use crate::rng;
use crate::wltls::{dag_soft_decode, dag_to_codebook, CodingDag};
use crate::{Error, Result};

/// Anything that maps a feature vector to a class.
pub trait Classifier {
    fn predict(&self, x: &[(u32, f64)]) -> Result<usize>;
}

/// Margin-based decoding loss `L(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodingLoss {
    /// `max(0, 1 - z)`
    Hinge,
    /// `exp(-z)`
    #[serde(alias = "exp")]
    Exponential,
    /// `(1 - sign(z)) / 2` with `sign(0) = 0`
    Hamming,
}

impl DecodingLoss {
    pub const ALL: [DecodingLoss; 3] = [
        DecodingLoss::Hinge,
        DecodingLoss::Exponential,
        DecodingLoss::Hamming,
    ];

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            DecodingLoss::Hinge => (1.0 - z).max(0.0),
            DecodingLoss::Exponential => (-z).exp(),
            DecodingLoss::Hamming => {
                if z > 0.0 {
                    0.0
                } else if z < 0.0 {
                    1.0
                } else {
                    0.5
                }
            }
        }
    }

    pub fn at_zero(self) -> f64 {
        self.eval(0.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            DecodingLoss::Hinge => "hinge",
            DecodingLoss::Exponential => "exp",
            DecodingLoss::Hamming => "hamming",
        }
    }
}

impl fmt::Display for DecodingLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecodingLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(DecodingLoss::Hinge),
            "exp" | "exponential" => Ok(DecodingLoss::Exponential),
            "hamming" => Ok(DecodingLoss::Hamming),
            other => Err(Error::invalid(format!("unknown decoding loss {other:?}"))),
        }
    }
}

fn check_shapes(ds: &Dataset, cb: &Codebook, a: &Assignment) -> Result<()> {
    if a.len() != cb.rows() {
        return Err(Error::DimensionMismatch {
            expected: cb.rows(),
            got: a.len(),
        });
    }
    if ds.num_classes() != cb.rows() {
        return Err(Error::invalid(format!(
            "dataset has {} classes but the codebook has {} rows",
            ds.num_classes(),
            cb.rows()
        )));
    }
    Ok(())
}

/// Binary training set of column `j`: example `i` gets `cb[a(y_i)][j]`.
pub fn induce_binary_labels<'d>(
    ds: &'d Dataset,
    cb: &Codebook,
    a: &Assignment,
    j: usize,
) -> Result<Vec<Labeled<'d>>> {
    check_shapes(ds, cb, a)?;
    if j >= cb.cols() {
        return Err(Error::invalid(format!(
            "column {j} out of range for {} columns",
            cb.cols()
        )));
    }
    Ok(ds
        .examples()
        .iter()
        .map(|ex| (ex.features.as_slice(), cb.get(a.row_of(ex.label), j)))
        .collect())
}

/// The class split a column induces, with class 0 always on the `+1` side.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    /// Bit `c` is set when class `c` is on the `+1` side.
    words: Vec<u64>,
}

impl Partition {
    /// Canonical partition of column `j` and whether the column is its complement.
    pub fn of_column(cb: &Codebook, a: &Assignment, j: usize) -> (Self, bool) {
        let k = a.len();
        let flipped = cb.get(a.row_of(0), j) < 0;
        let mut words = vec![0u64; k.div_ceil(64)];
        for c in 0..k {
            let plus = (cb.get(a.row_of(c), j) > 0) != flipped;
            if plus {
                words[c / 64] |= 1 << (c % 64);
            }
        }
        (Self { words }, flipped)
    }

    /// Partition from a class mask over at most 64 classes. Must contain class 0.
    pub fn from_mask(mask: u64) -> Result<Self> {
        if mask & 1 == 0 {
            return Err(Error::invalid("canonical partitions contain class 0"));
        }
        Ok(Self { words: vec![mask] })
    }

    #[inline]
    pub fn contains(&self, class: usize) -> bool {
        self.words
            .get(class / 64)
            .is_some_and(|w| w >> (class % 64) & 1 == 1)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Training seed of this partition under a master seed.
    pub fn seed(&self, master: u64) -> u64 {
        let trimmed = match self.words.iter().rposition(|&w| w != 0) {
            Some(last) => &self.words[..=last],
            None => &[][..],
        };
        rng::derive_seed_words(master, trimmed)
    }
}

/// Trains the predictor of a canonical partition: `+1` for classes inside it.
pub fn train_partition(
    ds: &Dataset,
    partition: &Partition,
    learner: &LearnerConfig,
    master_seed: u64,
) -> Result<BinaryPredictor> {
    let examples: Vec<Labeled> = ds
        .examples()
        .iter()
        .map(|ex| {
            let y = if partition.contains(ex.label) { 1 } else { -1 };
            (ex.features.as_slice(), y)
        })
        .collect();
    learner.train(&examples, ds.num_features(), partition.seed(master_seed))
}

/// A trained code: the codebook, how classes map onto its rows, and one
/// predictor per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    codebook: Codebook,
    assignment: Assignment,
    predictors: Vec<BinaryPredictor>,
    learner: LearnerConfig,
    seed: u64,
    /// Hinge-loss average binary loss on the training set.
    train_epsilon: f64,
    dag: Option<CodingDag>,
}

/// Trains one predictor per column, in parallel.
///
/// Each column is seeded from its canonical class partition, so a column and
/// its complement share a seed and yield exactly negated predictors. The
/// same column therefore trains to the same model under any assignment that
/// induces it.
pub fn train_ensemble(
    ds: &Dataset,
    cb: &Codebook,
    a: &Assignment,
    learner: &LearnerConfig,
    seed: u64,
) -> Result<Ensemble> {
    check_shapes(ds, cb, a)?;
    learner.validate()?;
    let predictors = (0..cb.cols())
        .into_par_iter()
        .map(|j| {
            let (partition, _) = Partition::of_column(cb, a, j);
            let examples = induce_binary_labels(ds, cb, a, j)?;
            learner
                .train(&examples, ds.num_features(), partition.seed(seed))
                .map_err(|e| Error::Column {
                    column: j,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ens = Ensemble {
        codebook: cb.clone(),
        assignment: a.clone(),
        predictors,
        learner: learner.clone(),
        seed,
        train_epsilon: 0.0,
        dag: None,
    };
    ens.train_epsilon = average_binary_loss(&ens, ds, DecodingLoss::Hinge)?;
    Ok(ens)
}

/// Trains over the codebook of a coding DAG and keeps the DAG for graph decoding.
pub fn train_dag_ensemble(
    ds: &Dataset,
    dag: &CodingDag,
    a: &Assignment,
    learner: &LearnerConfig,
    seed: u64,
) -> Result<Ensemble> {
    let cb = dag_to_codebook(dag)?;
    let ens = train_ensemble(ds, &cb, a, learner, seed)?;
    Ok(Ensemble {
        dag: Some(dag.clone()),
        ..ens
    })
}

impl Ensemble {
    /// Assembles an ensemble from parts, e.g. predictors taken from a column bank.
    pub fn from_parts(
        codebook: Codebook,
        assignment: Assignment,
        predictors: Vec<BinaryPredictor>,
        learner: LearnerConfig,
        seed: u64,
    ) -> Result<Self> {
        if predictors.len() != codebook.cols() {
            return Err(Error::DimensionMismatch {
                expected: codebook.cols(),
                got: predictors.len(),
            });
        }
        if assignment.len() != codebook.rows() {
            return Err(Error::DimensionMismatch {
                expected: codebook.rows(),
                got: assignment.len(),
            });
        }
        Ok(Self {
            codebook,
            assignment,
            predictors,
            learner,
            seed,
            train_epsilon: f64::NAN,
            dag: None,
        })
    }

    pub fn with_dag(mut self, dag: CodingDag) -> Result<Self> {
        if dag_to_codebook(&dag)? != self.codebook {
            return Err(Error::invalid("DAG does not induce the ensemble's codebook"));
        }
        self.dag = Some(dag);
        Ok(self)
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn predictors(&self) -> &[BinaryPredictor] {
        &self.predictors
    }

    pub fn learner(&self) -> &LearnerConfig {
        &self.learner
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train_epsilon(&self) -> f64 {
        self.train_epsilon
    }

    pub fn dag(&self) -> Option<&CodingDag> {
        self.dag.as_ref()
    }

    pub fn num_classes(&self) -> usize {
        self.codebook.rows()
    }

    /// `[f_1(x), …, f_ℓ(x)]`
    pub fn scores(&self, x: &[(u32, f64)]) -> Vec<f64> {
        self.predictors.iter().map(|p| p.score(x)).collect()
    }

    /// Shortest-path decoding over the stored DAG.
    pub fn graph_decode(&self, x: &[(u32, f64)], loss: DecodingLoss) -> Result<usize> {
        let dag = self
            .dag
            .as_ref()
            .ok_or_else(|| Error::invalid("ensemble has no coding DAG"))?;
        graph_decode_scores(dag, &self.assignment, &self.scores(x), loss)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EnsembleFile {
            version: ENSEMBLE_FORMAT_VERSION,
            codebook: (0..self.codebook.rows())
                .map(|r| row_text(self.codebook.row(r)))
                .collect(),
            assignment: self.assignment.as_slice().to_vec(),
            predictors: self.predictors.clone(),
            learner: self.learner.clone(),
            seed: self.seed,
            train_epsilon: self.train_epsilon.is_finite().then_some(self.train_epsilon),
            dag: self.dag.as_ref().map(CodingDag::to_text),
        };
        serde_json::to_string(&file).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnsembleFile =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if file.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                file.version
            )));
        }
        let codebook = Codebook::parse(&file.codebook.join("\n"))?;
        let mut ens = Ensemble::from_parts(
            codebook,
            Assignment::new(file.assignment)?,
            file.predictors,
            file.learner,
            file.seed,
        )?;
        ens.train_epsilon = file.train_epsilon.unwrap_or(f64::NAN);
        if let Some(text) = file.dag {
            ens = ens.with_dag(CodingDag::parse(&text)?)?;
        }
        Ok(ens)
    }
}

const ENSEMBLE_FORMAT_VERSION: u32 = 1;

fn row_text(row: &[i8]) -> String {
    row.iter().map(|&b| if b > 0 { '+' } else { '-' }).collect()
}

/// On-disk model: JSON with the codebook as `+`/`-` row strings.
#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    version: u32,
    codebook: Vec<String>,
    assignment: Vec<usize>,
    predictors: Vec<BinaryPredictor>,
    learner: LearnerConfig,
    seed: u64,
    train_epsilon: Option<f64>,
    dag: Option<String>,
}

/// An ensemble paired with the loss it decodes with.
pub struct Decoder<'a> {
    pub ensemble: &'a Ensemble,
    pub loss: DecodingLoss,
}

impl Classifier for Decoder<'_> {
    fn predict(&self, x: &[(u32, f64)]) -> Result<usize> {
        soft_decode(self.ensemble, x, self.loss)
    }
}

/// `argmin_c Σ_j L(M[a(c)][j] · f_j)`; ties go to the smallest class.
pub fn decode_scores(cb: &Codebook, a: &Assignment, f: &[f64], loss: DecodingLoss) -> Result<usize> {
    if f.len() != cb.cols() {
        return Err(Error::DimensionMismatch {
            expected: cb.cols(),
            got: f.len(),
        });
    }
    if let Some(j) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("score of predictor {j}")));
    }
    let mut best = (0, f64::INFINITY);
    for c in 0..a.len() {
        let row = cb.row(a.row_of(c));
        let mut total = 0.0;
        for (&bit, &fj) in row.iter().zip(f) {
            total += loss.eval(bit as f64 * fj);
        }
        if total < best.1 {
            best = (c, total);
        }
    }
    Ok(best.0)
}

/// Nearest codeword to `sign(f)` in Hamming distance, a zero score counting
/// as half a mismatch. Ties go to the smallest class.
pub fn hard_decode(cb: &Codebook, a: &Assignment, f: &[f64]) -> Result<usize> {
    if f.len() != cb.cols() {
        return Err(Error::DimensionMismatch {
            expected: cb.cols(),
            got: f.len(),
        });
    }
    // Doubled distances keep the half-mismatch integral.
    let signs: Vec<i8> = f
        .iter()
        .map(|&v| {
            if v.is_nan() {
                Err(Error::NonFinite("score".into()))
            } else {
                Ok(if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 })
            }
        })
        .collect::<Result<_>>()?;
    let mut best = (0, u64::MAX);
    for c in 0..a.len() {
        let d: u64 = cb
            .row(a.row_of(c))
            .iter()
            .zip(&signs)
            .map(|(&m, &s)| (1 - m as i64 * s as i64) as u64)
            .sum();
        if d < best.1 {
            best = (c, d);
        }
    }
    Ok(best.0)
}

/// Graph decoding of raw scores; edge `e` is column `e`.
pub fn graph_decode_scores(dag: &CodingDag, a: &Assignment, f: &[f64], loss: DecodingLoss) -> Result<usize> {
    if let Some(j) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("score of predictor {j}")));
    }
    let edge_losses: Vec<(f64, f64)> = f.iter().map(|&v| (loss.eval(v), loss.eval(-v))).collect();
    let path = dag_soft_decode(dag, &edge_losses)?;
    Ok(a.inverse()[path])
}

pub fn soft_decode(ens: &Ensemble, x: &[(u32, f64)], loss: DecodingLoss) -> Result<usize> {
    decode_scores(&ens.codebook, &ens.assignment, &ens.scores(x), loss)
}

/// `ε = (1/mℓ) Σ_i Σ_j L(M[a(y_i)][j] · f_j(x_i))`
pub fn average_binary_loss(ens: &Ensemble, ds: &Dataset, loss: DecodingLoss) -> Result<f64> {
    check_shapes(ds, &ens.codebook, &ens.assignment)?;
    if ds.is_empty() {
        return Err(Error::invalid("average binary loss of an empty dataset"));
    }
    let mut total = 0.0;
    for ex in ds.examples() {
        let row = ens.codebook.row(ens.assignment.row_of(ex.label));
        for (p, &bit) in ens.predictors.iter().zip(row) {
            total += loss.eval(bit as f64 * p.score(&ex.features));
        }
    }
    Ok(total / (ds.len() * ens.codebook.cols()) as f64)
}

/// Upper bound `ℓε / (ρ L(0))` on the multiclass training error.
pub fn error_bound(epsilon: f64, l: usize, rho: u32, loss: DecodingLoss) -> Result<f64> {
    if rho == 0 {
        return Err(Error::Degenerate("codebook has two identical rows".into()));
    }
    Ok(l as f64 * epsilon / (rho as f64 * loss.at_zero()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub epsilon: f64,
    pub bound: f64,
    /// `None` for classes absent from the evaluated set.
    pub per_class: Vec<Option<f64>>,
}

pub fn evaluate(ens: &Ensemble, ds: &Dataset, loss: DecodingLoss) -> Result<EvaluationReport> {
    check_shapes(ds, &ens.codebook, &ens.assignment)?;
    if ds.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let k = ens.num_classes();
    let mut hits = vec![0usize; k];
    let mut seen = vec![0usize; k];
    let mut total = 0.0;
    for ex in ds.examples() {
        let f = ens.scores(&ex.features);
        let row = ens.codebook.row(ens.assignment.row_of(ex.label));
        for (&bit, &fj) in row.iter().zip(&f) {
            total += loss.eval(bit as f64 * fj);
        }
        seen[ex.label] += 1;
        if decode_scores(&ens.codebook, &ens.assignment, &f, loss)? == ex.label {
            hits[ex.label] += 1;
        }
    }
    let epsilon = total / (ds.len() * ens.codebook.cols()) as f64;
    let rho = min_row_distance(&ens.codebook);
    Ok(EvaluationReport {
        accuracy: hits.iter().sum::<usize>() as f64 / ds.len() as f64,
        epsilon,
        bound: error_bound(epsilon, ens.codebook.cols(), rho, loss)?,
        per_class: hits
            .iter()
            .zip(&seen)
            .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
            .collect(),
    })
}
