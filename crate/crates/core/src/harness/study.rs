use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bank::{evaluate_columns, ColumnBank, LossTables};
use super::stats::{LinearFit, Regression, RunningMean, ValueCounts};
use crate::assignment::{
    factorial, next_permutation, unrank_permutation, Assignment, ScoreContext, EXHAUSTIVE_MAX_K,
};
use crate::codebook::{codeword_distance_matrix, Codebook};
use crate::engine::DecodingLoss;
use crate::metrics::ClassMetric;
use crate::rng;
use crate::{Error, Result};

/// Which assignments a study visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    All,
    /// `count` distinct assignments drawn uniformly, visited in lexicographic order.
    Random { count: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub assignment: Assignment,
    pub test_accuracy: f64,
    pub train_epsilon: f64,
    /// Class-codeword score under each metric, in the order given to the study.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFit {
    pub metric: String,
    pub accuracy_vs_score: LinearFit,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub records: u64,
    pub loss: DecodingLoss,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    /// 25th, 50th and 75th percentiles of test accuracy.
    pub quartiles: [f64; 3],
    /// Assignments reaching accuracy 1.
    pub perfect: u64,
    pub mean_epsilon: f64,
    pub accuracy_vs_epsilon: LinearFit,
    pub metrics: Vec<MetricFit>,
}

/// Maps assignment ranks (lexicographic) to permutations, chunk by chunk.
fn assignment_ranks(k: usize, sample: Sample) -> Result<Vec<u64>> {
    let total = if k <= 20 { factorial(k) } else { u64::MAX };
    match sample {
        Sample::All => {
            if k > EXHAUSTIVE_MAX_K {
                return Err(Error::invalid(format!(
                    "exhaustive studies need K <= {EXHAUSTIVE_MAX_K}, got {k}"
                )));
            }
            Ok(Vec::new())
        }
        Sample::Random { count, seed } => {
            if k > 20 {
                return Err(Error::invalid("sampled studies need K <= 20"));
            }
            if count == 0 || count > total {
                return Err(Error::invalid(format!(
                    "cannot sample {count} of {total} assignments"
                )));
            }
            let mut r = rng::seeded(seed);
            let mut ranks: Vec<u64> = index::sample(&mut r, total as usize, count as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            ranks.sort_unstable();
            Ok(ranks)
        }
    }
}

const CHUNK: usize = 4096;

/// Evaluates assignments from a column bank and streams the records, in
/// lexicographic order, to `sink`.
pub fn run_exhaustive_study<F>(
    bank: &ColumnBank,
    cb: &Codebook,
    metrics: &[(String, ClassMetric)],
    loss: DecodingLoss,
    sample: Sample,
    mut sink: F,
) -> Result<StudySummary>
where
    F: FnMut(&StudyRecord) -> Result<()>,
{
    let k = bank.num_classes();
    if cb.rows() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: cb.rows(),
        });
    }
    let d_m = codeword_distance_matrix(cb);
    let contexts = metrics
        .iter()
        .map(|(_, m)| ScoreContext::new(m, &d_m))
        .collect::<Result<Vec<_>>>()?;
    let tables = bank.loss_tables(loss);
    let ranks = assignment_ranks(k, sample)?;

    let mut acc = Accumulator::new(metrics.len());
    let mut emit = |chunk: Vec<Vec<usize>>| -> Result<()> {
        let records = chunk
            .into_par_iter()
            .map(|perm| evaluate_one(bank, &tables, cb, &contexts, perm))
            .collect::<Result<Vec<_>>>()?;
        for r in &records {
            acc.push(r);
            sink(r)?;
        }
        Ok(())
    };

    match sample {
        Sample::All => {
            let mut perm: Vec<usize> = (0..k).collect();
            let mut more = true;
            while more {
                let mut chunk = Vec::with_capacity(CHUNK);
                while more && chunk.len() < CHUNK {
                    chunk.push(perm.clone());
                    more = next_permutation(&mut perm);
                }
                emit(chunk)?;
            }
        }
        Sample::Random { .. } => {
            for block in ranks.chunks(CHUNK) {
                emit(block.iter().map(|&r| unrank_permutation(k, r)).collect())?;
            }
        }
    }
    Ok(acc.finish(loss, metrics))
}

fn evaluate_one(
    bank: &ColumnBank,
    tables: &LossTables,
    cb: &Codebook,
    contexts: &[ScoreContext],
    perm: Vec<usize>,
) -> Result<StudyRecord> {
    let assignment = Assignment::new(perm)?;
    let eval = evaluate_columns(bank, tables, &bank.resolve(cb, &assignment)?);
    let scores = contexts
        .iter()
        .map(|c| c.score(&assignment))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyRecord {
        assignment,
        test_accuracy: eval.test_accuracy,
        train_epsilon: eval.train_epsilon,
        scores,
    })
}

struct Accumulator {
    accuracy: RunningMean,
    epsilon: RunningMean,
    values: ValueCounts,
    vs_epsilon: Regression,
    vs_score: Vec<Regression>,
    score_means: Vec<RunningMean>,
    min: f64,
    max: f64,
}

impl Accumulator {
    fn new(metrics: usize) -> Self {
        Self {
            accuracy: RunningMean::default(),
            epsilon: RunningMean::default(),
            values: ValueCounts::default(),
            vs_epsilon: Regression::default(),
            vs_score: vec![Regression::default(); metrics],
            score_means: vec![RunningMean::default(); metrics],
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, r: &StudyRecord) {
        let a = r.test_accuracy;
        self.accuracy.push(a);
        self.epsilon.push(r.train_epsilon);
        self.values.push(a);
        self.vs_epsilon.push(r.train_epsilon, a);
        for ((reg, mean), &s) in self.vs_score.iter_mut().zip(&mut self.score_means).zip(&r.scores) {
            reg.push(s, a);
            mean.push(s);
        }
        self.min = self.min.min(a);
        self.max = self.max.max(a);
    }

    fn finish(self, loss: DecodingLoss, metrics: &[(String, ClassMetric)]) -> StudySummary {
        let q = |p| self.values.quantile(p).unwrap_or(f64::NAN);
        StudySummary {
            records: self.accuracy.len(),
            loss,
            mean_accuracy: self.accuracy.mean(),
            min_accuracy: self.min,
            max_accuracy: self.max,
            quartiles: [q(0.25), q(0.5), q(0.75)],
            perfect: self.values.count_at_least(1.0),
            mean_epsilon: self.epsilon.mean(),
            accuracy_vs_epsilon: self.vs_epsilon.fit(),
            metrics: metrics
                .iter()
                .zip(self.vs_score.iter().zip(&self.score_means))
                .map(|((name, _), (reg, mean))| MetricFit {
                    metric: name.clone(),
                    accuracy_vs_score: reg.fit(),
                    mean_score: mean.mean(),
                })
                .collect(),
        }
    }
}

/// Streams records as CSV: `assignment,accuracy,epsilon,s_cc_<metric>…`, the
/// assignment written as `perm[0] perm[1] …`.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W, metric_names: &[String]) -> std::io::Result<Self> {
        write!(out, "assignment,accuracy,epsilon")?;
        for n in metric_names {
            write!(out, ",s_cc_{n}")?;
        }
        writeln!(out)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &StudyRecord) -> std::io::Result<()> {
        let perm: Vec<String> = r.assignment.as_slice().iter().map(usize::to_string).collect();
        write!(self.out, "{},{},{}", perm.join(" "), r.test_accuracy, r.train_epsilon)?;
        for s in &r.scores {
            write!(self.out, ",{s}")?;
        }
        writeln!(self.out)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
