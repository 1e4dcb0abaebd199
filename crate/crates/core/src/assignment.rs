//! Codeword-to-class assignments and the class-codeword score.
//!
//! The score compares a class metric with the codeword distance matrix seen
//! through an assignment, both scaled to unit Frobenius norm:
//! `‖D_cls − P·D_M·Pᵀ‖_F`. It is evaluated on permuted index views, never by
//! forming `P`.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::codebook::CodewordDistances;
use crate::metrics::{dfs_leaf_order, ClassMetric, Taxonomy};
use crate::rng;
use crate::wltls::CodingDag;
use crate::{Error, Result};

/// `perm[c]` is the codebook row assigned to class `c`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    perm: Vec<usize>,
}

impl Assignment {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &r in &perm {
            if r >= perm.len() || seen[r] {
                return Err(Error::invalid(format!(
                    "assignment {perm:?} is not a permutation of 0..{}",
                    perm.len()
                )));
            }
            seen[r] = true;
        }
        Ok(Self { perm })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            perm: (0..k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    #[inline]
    pub fn row_of(&self, class: usize) -> usize {
        self.perm[class]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// `inv[row]` is the class holding `row`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (c, &r) in self.perm.iter().enumerate() {
            inv[r] = c;
        }
        inv
    }

    pub fn swap_classes(&mut self, a: usize, b: usize) {
        self.perm.swap(a, b);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, r) in self.perm.iter().enumerate() {
            writeln!(out, "{c} {r}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let parse = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| Error::parse(lineno + 1, format!("expected an integer, got {t:?}")))
            };
            match f.as_slice() {
                [c, r] => pairs.push((parse(c)?, parse(r)?)),
                _ => return Err(Error::parse(lineno + 1, "expected `class_id row_id`")),
            }
        }
        let k = pairs.len();
        let mut perm = vec![usize::MAX; k];
        for (c, r) in pairs {
            if c >= k || perm[c] != usize::MAX {
                return Err(Error::invalid(format!("class {c} is missing or repeated")));
            }
            perm[c] = r;
        }
        Self::new(perm)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAssignment {
    pub assignment: Assignment,
    pub score: f64,
}

/// Both distance matrices, normalized, laid out for repeated scoring.
#[derive(Debug, Clone)]
pub struct ScoreContext {
    k: usize,
    classes: Vec<f64>,
    codewords: Vec<f64>,
}

impl ScoreContext {
    pub fn new(d_cls: &ClassMetric, d_m: &CodewordDistances) -> Result<Self> {
        let k = d_cls.size();
        if d_m.size() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: d_m.size(),
            });
        }
        let classes = d_cls.normalized()?.as_slice().to_vec();
        let raw: Vec<f64> = d_m.as_slice().iter().map(|&d| d as f64).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate("all codewords are identical".into()));
        }
        let codewords = raw.iter().map(|x| x / norm).collect();
        Ok(Self {
            k,
            classes,
            codewords,
        })
    }

    pub fn size(&self) -> usize {
        self.k
    }

    #[inline]
    fn cls(&self, a: usize, b: usize) -> f64 {
        self.classes[a * self.k + b]
    }

    #[inline]
    fn cw(&self, a: usize, b: usize) -> f64 {
        self.codewords[a * self.k + b]
    }

    fn squared(&self, perm: &[usize]) -> f64 {
        let k = self.k;
        let mut total = 0.0;
        for a in 0..k {
            let pa = perm[a];
            for b in 0..k {
                let d = self.cls(a, b) - self.cw(pa, perm[b]);
                total += d * d;
            }
        }
        total
    }

    pub fn score(&self, a: &Assignment) -> Result<f64> {
        if a.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: a.len(),
            });
        }
        Ok(self.squared(&a.perm).sqrt())
    }

    /// Change in the squared score when classes `i` and `j` trade rows.
    /// Relies on both matrices being symmetric with zero diagonals.
    fn swap_delta(&self, perm: &[usize], i: usize, j: usize) -> f64 {
        let (pi, pj) = (perm[i], perm[j]);
        let mut delta = 0.0;
        for c in 0..self.k {
            if c == i || c == j {
                continue;
            }
            let pc = perm[c];
            let (ai, aj) = (self.cls(i, c), self.cls(j, c));
            let (bi, bj) = (self.cw(pi, pc), self.cw(pj, pc));
            let before = (ai - bi).powi(2) + (aj - bj).powi(2);
            let after = (ai - bj).powi(2) + (aj - bi).powi(2);
            delta += after - before;
        }
        2.0 * delta
    }
}

pub fn class_codeword_score(
    d_cls: &ClassMetric,
    d_m: &CodewordDistances,
    a: &Assignment,
) -> Result<f64> {
    ScoreContext::new(d_cls, d_m)?.score(a)
}

pub fn random_assignment(k: usize, seed: u64) -> Assignment {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut rng::seeded(seed));
    Assignment { perm }
}

/// Rearranges `perm` into the next permutation in lexicographic order.
pub fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// The `index`-th permutation of `0..k` in lexicographic order.
pub fn unrank_permutation(k: usize, mut index: u64) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..k).collect();
    let mut out = Vec::with_capacity(k);
    for pos in (0..k).rev() {
        let f = factorial(pos);
        let q = (index / f) as usize;
        index %= f;
        out.push(pool.remove(q));
    }
    out
}

pub const EXHAUSTIVE_MAX_K: usize = 11;

/// Global minimizer over all `K!` assignments; ties go to the
/// lexicographically smallest permutation.
pub fn exhaustive_min_score(d_cls: &ClassMetric, d_m: &CodewordDistances) -> Result<ScoredAssignment> {
    let ctx = ScoreContext::new(d_cls, d_m)?;
    let k = ctx.k;
    if k > EXHAUSTIVE_MAX_K {
        return Err(Error::invalid(format!(
            "exhaustive search over {k}! assignments is too large; use swap_local_search"
        )));
    }
    // One task per leading row; tasks are combined in lexicographic order.
    let best = (0..k)
        .into_par_iter()
        .map(|first| {
            let mut perm: Vec<usize> = std::iter::once(first)
                .chain((0..k).filter(|&r| r != first))
                .collect();
            let mut best_perm = perm.clone();
            let mut best = ctx.squared(&perm);
            while next_permutation(&mut perm[1..]) {
                let s = ctx.squared(&perm);
                if s < best {
                    best = s;
                    best_perm.copy_from_slice(&perm);
                }
            }
            (best, best_perm)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("K >= 1");
    Ok(ScoredAssignment {
        score: best.0.sqrt(),
        assignment: Assignment { perm: best.1 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Improvements in the squared score smaller than this count as ties.
pub const SWAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchResult {
    pub best: ScoredAssignment,
    /// Score after each accepted move, starting with the start assignment.
    pub trajectory: Vec<f64>,
    /// Full neighborhood scans performed.
    pub rounds: usize,
    pub swaps_evaluated: usize,
}

pub fn default_max_iters(k: usize) -> usize {
    10 * k
}

/// Steepest descent (or ascent) over single class swaps.
///
/// Each round evaluates all `K(K-1)/2` swaps and takes the best one if it
/// improves by more than [`SWAP_TOLERANCE`]; equally good swaps resolve to
/// the smallest `(i, j)`. Stops at a local optimum or after `max_iters` moves.
pub fn swap_local_search(
    d_cls: &ClassMetric,
    d_m: &CodewordDistances,
    start: &Assignment,
    direction: Direction,
    max_iters: usize,
) -> Result<LocalSearchResult> {
    let ctx = ScoreContext::new(d_cls, d_m)?;
    local_search_with(&ctx, start, direction, max_iters)
}

pub fn local_search_with(
    ctx: &ScoreContext,
    start: &Assignment,
    direction: Direction,
    max_iters: usize,
) -> Result<LocalSearchResult> {
    let k = ctx.k;
    if start.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: start.len(),
        });
    }
    let sign = match direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let mut perm = start.perm.clone();
    let mut trajectory = vec![ctx.squared(&perm).sqrt()];
    let mut rounds = 0;
    let mut swaps_evaluated = 0;
    while trajectory.len() <= max_iters {
        rounds += 1;
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..k {
            for j in i + 1..k {
                swaps_evaluated += 1;
                let gain = sign * ctx.swap_delta(&perm, i, j);
                if best.is_none_or(|(g, _, _)| gain < g) {
                    best = Some((gain, i, j));
                }
            }
        }
        match best {
            Some((gain, i, j)) if gain < -SWAP_TOLERANCE => {
                perm.swap(i, j);
                trajectory.push(ctx.squared(&perm).sqrt());
            }
            _ => break,
        }
    }
    let score = *trajectory.last().unwrap();
    Ok(LocalSearchResult {
        best: ScoredAssignment {
            assignment: Assignment { perm },
            score,
        },
        trajectory,
        rounds,
        swaps_evaluated,
    })
}

/// Best of `restarts` local searches from seeded random starts.
pub fn local_search_restarts(
    d_cls: &ClassMetric,
    d_m: &CodewordDistances,
    direction: Direction,
    restarts: usize,
    seed: u64,
) -> Result<Vec<LocalSearchResult>> {
    let ctx = ScoreContext::new(d_cls, d_m)?;
    let k = ctx.k;
    (0..restarts)
        .map(|r| {
            let start = random_assignment(k, rng::derive_seed(seed, r as u64));
            local_search_with(&ctx, &start, direction, default_max_iters(k))
        })
        .collect()
}

/// Pairs the i-th taxonomy leaf in depth-first order with the i-th canonical
/// path of the coding graph, i.e. with row `i` of its induced codebook.
pub fn taxonomy_dag_assignment(t: &Taxonomy, dag: &CodingDag) -> Result<Assignment> {
    if t.num_classes() != dag.num_paths() {
        return Err(Error::DimensionMismatch {
            expected: dag.num_paths(),
            got: t.num_classes(),
        });
    }
    let order = dfs_leaf_order(t);
    let mut perm = vec![0; order.len()];
    for (i, &class) in order.iter().enumerate() {
        perm[class] = i;
    }
    Assignment::new(perm)
}
