use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::RunningMean;
use crate::assignment::{
    local_search_restarts, random_assignment, taxonomy_dag_assignment, Assignment, Direction,
    ScoreContext,
};
use crate::codebook::{codeword_distance_matrix, Codebook};
use crate::data::Dataset;
use crate::engine::{evaluate, graph_decode_scores, train_ensemble, DecodingLoss, Ensemble};
use crate::learners::LearnerConfig;
use crate::metrics::{ClassMetric, Taxonomy};
use crate::rng;
use crate::wltls::{dag_to_codebook, CodingDag};
use crate::{Error, Result};

/// How a comparison run picks its assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Random,
    Identity,
    /// Steepest descent on the class-codeword score (similarity preserving).
    LocalMin,
    /// Steepest ascent on the class-codeword score (similarity breaking).
    LocalMax,
    /// Taxonomy leaves in depth-first order onto canonical DAG paths.
    Dag,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Identity => "identity",
            Policy::LocalMin => "local-min",
            Policy::LocalMax => "local-max",
            Policy::Dag => "dag",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Policy::Random),
            "identity" => Ok(Policy::Identity),
            "local-min" => Ok(Policy::LocalMin),
            "local-max" => Ok(Policy::LocalMax),
            "dag" => Ok(Policy::Dag),
            other => Err(Error::invalid(format!("unknown policy {other:?}"))),
        }
    }
}

/// A flat codebook, or a coding DAG decoded by shortest path.
#[derive(Debug, Clone)]
pub enum Code {
    Matrix(Codebook),
    Graph(CodingDag),
}

impl Code {
    pub fn codebook(&self) -> Result<Codebook> {
        match self {
            Code::Matrix(cb) => Ok(cb.clone()),
            Code::Graph(dag) => dag_to_codebook(dag),
        }
    }
}

pub struct Comparison<'a> {
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub code: &'a Code,
    /// Class metric the assignments are scored and searched with.
    pub metric: &'a ClassMetric,
    pub taxonomy: Option<&'a Taxonomy>,
    pub learner: &'a LearnerConfig,
    pub loss: DecodingLoss,
    pub repeats: usize,
    pub restarts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: Policy,
    pub repeat: usize,
    pub accuracy: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: Policy,
    pub runs: usize,
    pub mean_accuracy: f64,
    /// Twice the sample standard deviation of accuracy.
    pub two_sigma: f64,
    pub mean_score: f64,
    pub two_sigma_score: f64,
}

impl Comparison<'_> {
    pub fn assignment(&self, policy: Policy, repeat: usize, ctx: &ScoreContext) -> Result<Assignment> {
        let k = self.train.num_classes();
        let seed = rng::derive_seed_words(self.seed, &[1, repeat as u64]);
        match policy {
            Policy::Random => Ok(random_assignment(k, seed)),
            Policy::Identity => Ok(Assignment::identity(k)),
            Policy::LocalMin | Policy::LocalMax => {
                let dir = if policy == Policy::LocalMin {
                    Direction::Minimize
                } else {
                    Direction::Maximize
                };
                let d_m = codeword_distance_matrix(&self.code.codebook()?);
                let runs = local_search_restarts(self.metric, &d_m, dir, self.restarts.max(1), seed)?;
                let pick = runs
                    .into_iter()
                    .map(|r| r.best)
                    .reduce(|a, b| {
                        let better = match dir {
                            Direction::Minimize => b.score < a.score,
                            Direction::Maximize => b.score > a.score,
                        };
                        if better { b } else { a }
                    })
                    .expect("at least one restart");
                debug_assert!((ctx.score(&pick.assignment)? - pick.score).abs() < 1e-9);
                Ok(pick.assignment)
            }
            Policy::Dag => {
                let Code::Graph(dag) = self.code else {
                    return Err(Error::invalid("the dag policy needs a coding DAG"));
                };
                let t = self
                    .taxonomy
                    .ok_or_else(|| Error::invalid("the dag policy needs a taxonomy"))?;
                taxonomy_dag_assignment(t, dag)
            }
        }
    }

    /// One training run. The training order is shuffled per repeat, and every
    /// policy sees the same shuffle for a given repeat.
    pub fn run(&self, policy: Policy, repeat: usize) -> Result<RunResult> {
        let cb = self.code.codebook()?;
        let ctx = ScoreContext::new(self.metric, &codeword_distance_matrix(&cb))?;
        let a = self.assignment(policy, repeat, &ctx)?;
        let train = self
            .train
            .shuffled(rng::derive_seed_words(self.seed, &[2, repeat as u64]));
        let ens = train_ensemble(
            &train,
            &cb,
            &a,
            self.learner,
            rng::derive_seed_words(self.seed, &[3, repeat as u64]),
        )?;
        Ok(RunResult {
            policy,
            repeat,
            accuracy: self.accuracy(&ens)?,
            score: ctx.score(&a)?,
        })
    }

    fn accuracy(&self, ens: &Ensemble) -> Result<f64> {
        match self.code {
            Code::Matrix(_) => Ok(evaluate(ens, self.test, self.loss)?.accuracy),
            Code::Graph(dag) => {
                let mut hits = 0;
                for ex in self.test.examples() {
                    let f = ens.scores(&ex.features);
                    hits += (graph_decode_scores(dag, ens.assignment(), &f, self.loss)? == ex.label) as usize;
                }
                Ok(hits as f64 / self.test.len() as f64)
            }
        }
    }
}

/// Runs every policy `repeats` times and summarizes each with mean ± 2σ.
pub fn compare_policies(cmp: &Comparison, policies: &[Policy]) -> Result<(Vec<PolicyRow>, Vec<RunResult>)> {
    let mut rows = Vec::with_capacity(policies.len());
    let mut runs = Vec::new();
    for &policy in policies {
        let (mut acc, mut score) = (RunningMean::default(), RunningMean::default());
        for r in 0..cmp.repeats {
            let run = cmp.run(policy, r)?;
            acc.push(run.accuracy);
            score.push(run.score);
            runs.push(run);
        }
        rows.push(PolicyRow {
            policy,
            runs: cmp.repeats,
            mean_accuracy: acc.mean(),
            two_sigma: 2.0 * acc.std_dev(),
            mean_score: score.mean(),
            two_sigma_score: 2.0 * score.std_dev(),
        });
    }
    Ok((rows, runs))
}

pub fn rows_to_csv(rows: &[PolicyRow]) -> String {
    let mut out = String::from("policy,runs,mean_accuracy,two_sigma,mean_score,two_sigma_score\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.policy, r.runs, r.mean_accuracy, r.two_sigma, r.mean_score, r.two_sigma_score
        ));
    }
    out
}
