//! Sign-matrix codebooks: generators, text format and structural statistics.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::rng;
use crate::{Error, Result};

/// A `K x ℓ` matrix over `{-1, +1}`; row `k` is a codeword, column `j` a
/// binary subproblem. No column may be constant.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Codebook {
    rows: usize,
    cols: usize,
    bits: Vec<i8>,
}

impl Codebook {
    pub fn new(rows: usize, cols: usize, bits: Vec<i8>) -> Result<Self> {
        if rows < 2 {
            return Err(Error::invalid("a codebook needs at least two rows"));
        }
        if cols < 1 {
            return Err(Error::invalid("a codebook needs at least one column"));
        }
        if bits.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: bits.len(),
            });
        }
        if let Some(b) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(Error::invalid(format!("codebook entry {b} is not ±1")));
        }
        let cb = Self { rows, cols, bits };
        for j in 0..cols {
            if cb.column_is_constant(j) {
                return Err(Error::invalid(format!("column {j} is constant")));
            }
        }
        Ok(cb)
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: r.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// The `K x K` one-vs-all codebook: `+1` on the diagonal.
    pub fn one_vs_all(k: usize) -> Result<Self> {
        let bits = (0..k * k)
            .map(|i| if i / k == i % k { 1 } else { -1 })
            .collect();
        Self::new(k, k, bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.bits[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<i8> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    fn column_is_constant(&self, col: usize) -> bool {
        let first = self.get(0, col);
        (1..self.rows).all(|r| self.get(r, col) == first)
    }

    /// Codebook with rows reordered: row `i` of the result is row `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: order.len(),
            });
        }
        let bits = order.iter().flat_map(|&r| self.row(r).to_vec()).collect();
        Self::new(self.rows, self.cols, bits)
    }

    pub fn hamming(&self, a: usize, b: usize) -> u32 {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .filter(|(x, y)| x != y)
            .count() as u32
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .chars()
                .map(|c| match c {
                    '+' => Ok(1),
                    '-' => Ok(-1),
                    other => Err(Error::parse(lineno + 1, format!("unexpected {other:?}"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for Codebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            for &b in self.row(r) {
                f.write_str(if b > 0 { "+" } else { "-" })?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Codebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Codebook {}x{}\n{}", self.rows, self.cols, self)
    }
}

/// Symmetric `K x K` matrix of pairwise Hamming distances between codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordDistances {
    k: usize,
    dist: Vec<u32>,
}

impl CodewordDistances {
    pub fn size(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u32 {
        self.dist[a * self.k + b]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.dist
    }

    pub fn min_off_diagonal(&self) -> u32 {
        let mut best = u32::MAX;
        for a in 0..self.k {
            for b in a + 1..self.k {
                best = best.min(self.get(a, b));
            }
        }
        best
    }
}

pub fn codeword_distance_matrix(cb: &Codebook) -> CodewordDistances {
    let rows: Vec<&[i8]> = (0..cb.rows()).map(|r| cb.row(r)).collect();
    row_distance_matrix(&rows)
}

/// Distance matrix of arbitrary sign rows of equal length, which need not
/// form a valid codebook.
pub fn row_distance_matrix(rows: &[&[i8]]) -> CodewordDistances {
    let k = rows.len();
    let mut dist = vec![0u32; k * k];
    for a in 0..k {
        for b in a + 1..k {
            let d = rows[a].iter().zip(rows[b]).filter(|(x, y)| x != y).count() as u32;
            dist[a * k + b] = d;
            dist[b * k + a] = d;
        }
    }
    CodewordDistances { k, dist }
}

/// Minimum Hamming distance over unordered row pairs (ρ).
pub fn min_row_distance(cb: &Codebook) -> u32 {
    let mut best = u32::MAX;
    for a in 0..cb.rows() {
        for b in a + 1..cb.rows() {
            best = best.min(cb.hamming(a, b));
            if best == 0 {
                return 0;
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookStats {
    pub min_row_distance: u32,
    pub max_abs_column_correlation: f64,
    pub equidistant: bool,
}

fn pearson(a: &[i8], b: &[i8]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|&x| x as f64).sum::<f64>() / n;
    let mb = b.iter().map(|&x| x as f64).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x as f64 - ma, y as f64 - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

pub fn column_stats(cb: &Codebook) -> CodebookStats {
    let columns: Vec<Vec<i8>> = (0..cb.cols()).map(|j| cb.column(j)).collect();
    let mut max_corr: f64 = 0.0;
    for a in 0..columns.len() {
        for b in a + 1..columns.len() {
            max_corr = max_corr.max(pearson(&columns[a], &columns[b]).abs());
        }
    }
    let dm = codeword_distance_matrix(cb);
    let rho = dm.min_off_diagonal();
    let k = cb.rows();
    let equidistant = (0..k).all(|a| (a + 1..k).all(|b| dm.get(a, b) == rho));
    CodebookStats {
        min_row_distance: rho,
        max_abs_column_correlation: max_corr.min(1.0),
        equidistant,
    }
}

/// Draws one `k x l` sign matrix whose columns are non-constant and pairwise
/// distinct up to complementation.
fn draw_dense<R: rand::Rng>(k: usize, l: usize, rng: &mut R) -> Vec<i8> {
    let mut seen: HashSet<Vec<i8>> = HashSet::with_capacity(l);
    let mut columns: Vec<Vec<i8>> = Vec::with_capacity(l);
    while columns.len() < l {
        let col: Vec<i8> = (0..k)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        if col.iter().all(|&b| b == col[0]) {
            continue;
        }
        let canon: Vec<i8> = if col[0] > 0 {
            col.clone()
        } else {
            col.iter().map(|&b| -b).collect()
        };
        if seen.insert(canon) {
            columns.push(col);
        }
    }
    let mut bits = vec![0i8; k * l];
    for (j, col) in columns.iter().enumerate() {
        for (r, &b) in col.iter().enumerate() {
            bits[r * l + j] = b;
        }
    }
    bits
}

/// Best of `trials` uniform dense codebooks by minimum row distance; the
/// earliest trial wins ties. Trial `t` draws from a stream seeded by `(seed, t)`.
pub fn generate_random_dense(k: usize, l: usize, trials: usize, seed: u64) -> Result<Codebook> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if k < 2 || l == 0 {
        return Err(Error::invalid("need K >= 2 and l >= 1"));
    }
    if l < 64 && k > (1usize << l) {
        return Err(Error::invalid(format!(
            "K = {k} codewords cannot be distinct with l = {l} bits"
        )));
    }
    if k <= 64 {
        let partitions = (1u128 << (k - 1)) - 1;
        if (l as u128) > partitions {
            return Err(Error::invalid(format!(
                "only {partitions} distinct nontrivial columns exist for K = {k}"
            )));
        }
    }
    let (best_trial, _) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let bits = draw_dense(k, l, &mut rng::seeded(rng::derive_seed(seed, t as u64)));
            let cb = Codebook {
                rows: k,
                cols: l,
                bits,
            };
            (t, min_row_distance(&cb))
        })
        .reduce(
            || (usize::MAX, 0),
            |a, b| {
                if a.0 == usize::MAX {
                    b
                } else if b.0 == usize::MAX {
                    a
                } else if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    let bits = draw_dense(
        k,
        l,
        &mut rng::seeded(rng::derive_seed(seed, best_trial as u64)),
    );
    Codebook::new(k, l, bits)
}

/// Sylvester Hadamard matrix of order `l + 1` without its all-ones column,
/// restricted to the first `k` rows.
pub fn generate_truncated_hadamard(k: usize, l: usize) -> Result<Codebook> {
    let order = l + 1;
    if !order.is_power_of_two() || order < 2 {
        return Err(Error::invalid(format!("l + 1 = {order} is not a power of two")));
    }
    if k < 2 || k > order {
        return Err(Error::invalid(format!(
            "K = {k} must lie in 2..={order} for l = {l}"
        )));
    }
    let mut bits = Vec::with_capacity(k * l);
    for i in 0..k {
        for j in 1..order {
            bits.push(if (i & j).count_ones() % 2 == 0 { 1 } else { -1 });
        }
    }
    Codebook::new(k, l, bits).map_err(|e| {
        Error::invalid(format!(
            "truncated Hadamard ({k}, {l}) is not a valid codebook: {e}"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cb(rows: &[&str]) -> Codebook {
        Codebook::parse(&rows.join("\n")).unwrap()
    }

    #[test]
    fn constant_columns_rejected() {
        assert!(Codebook::parse("++\n+-\n").is_err());
        assert!(Codebook::parse("+\n").is_err());
        assert!(Codebook::parse("+x\n-+\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = cb(&["+-+", "-+-", "++-"]);
        assert_eq!(Codebook::parse(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn hadamard_10_by_15() {
        let h = generate_truncated_hadamard(10, 15).unwrap();
        assert_eq!(min_row_distance(&h), 8);
        let stats = column_stats(&h);
        assert!(stats.equidistant);
        assert_eq!(stats.min_row_distance, 8);
    }

    #[test]
    fn hadamard_small_cases() {
        let h = generate_truncated_hadamard(2, 1).unwrap();
        assert_eq!(h.row(0), &[1]);
        assert_eq!(h.row(1), &[-1]);

        // Rows of H4 without the first column: +++, -+-, +--, --+.
        let h = generate_truncated_hadamard(4, 3).unwrap();
        assert_eq!(h, cb(&["+++", "-+-", "+--", "--+"]));
        let dm = codeword_distance_matrix(&h);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(dm.get(a, b), if a == b { 0 } else { 2 });
            }
        }
    }

    #[test]
    fn hadamard_rejects_bad_sizes() {
        assert!(generate_truncated_hadamard(4, 4).is_err());
        assert!(generate_truncated_hadamard(17, 15).is_err());
        // Too few rows leave a constant column.
        assert!(generate_truncated_hadamard(2, 3).is_err());
    }

    #[test]
    fn duplicated_row_has_zero_distance() {
        assert_eq!(min_row_distance(&cb(&["+-", "+-", "-+"])), 0);
    }

    #[test]
    fn one_vs_all_distance_two() {
        for k in 2..8 {
            let ova = Codebook::one_vs_all(k).unwrap();
            assert_eq!(min_row_distance(&ova), 2);
            let dm = codeword_distance_matrix(&ova);
            for a in 0..k {
                for b in 0..k {
                    assert_eq!(dm.get(a, b), if a == b { 0 } else { 2 });
                }
            }
        }
    }

    #[test]
    fn two_by_two_distance() {
        let dm = row_distance_matrix(&[&[1, 1], &[-1, 1]]);
        assert_eq!(dm.get(0, 1), 1);
        assert_eq!(dm.get(1, 0), 1);
        assert_eq!(dm.get(0, 0), 0);
    }

    #[test]
    fn complementary_columns_fully_correlated() {
        let s = column_stats(&cb(&["+-+", "-++", "+--"]));
        assert!((s.max_abs_column_correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_columns_uncorrelated() {
        let h = generate_truncated_hadamard(8, 7).unwrap();
        assert!(column_stats(&h).max_abs_column_correlation < 1e-12);
    }

    #[test]
    fn correlation_matches_direct_formula() {
        let c = generate_random_dense(10, 8, 50, 3).unwrap();
        let s = column_stats(&c);
        assert!((0.0..=1.0).contains(&s.max_abs_column_correlation));
        // Columns are ±1 with entries summing to s_a, s_b and dot product p:
        // corr = (p/n - s_a s_b / n²) / sqrt((1 - (s_a/n)²)(1 - (s_b/n)²)).
        let n = 10.0;
        let mut expected: f64 = 0.0;
        for a in 0..8 {
            for b in a + 1..8 {
                let ca = c.column(a);
                let cbv = c.column(b);
                let sa: f64 = ca.iter().map(|&x| x as f64).sum();
                let sb: f64 = cbv.iter().map(|&x| x as f64).sum();
                let p: f64 = ca.iter().zip(&cbv).map(|(&x, &y)| (x * y) as f64).sum();
                let cov = p / n - sa * sb / (n * n);
                let var = ((1.0 - (sa / n).powi(2)) * (1.0 - (sb / n).powi(2))).sqrt();
                expected = expected.max((cov / var).abs());
            }
        }
        assert!((s.max_abs_column_correlation - expected).abs() < 1e-12);
    }

    #[test]
    fn random_dense_is_deterministic_and_valid() {
        let a = generate_random_dense(10, 8, 20, 42).unwrap();
        let b = generate_random_dense(10, 8, 20, 42).unwrap();
        assert_eq!(a, b);
        let mut canon = HashSet::new();
        for j in 0..a.cols() {
            let col = a.column(j);
            let c: Vec<i8> = col.iter().map(|&x| x * col[0]).collect();
            assert!(canon.insert(c), "duplicate column {j}");
        }
    }

    #[test]
    fn single_trial_is_first_draw() {
        let cb = generate_random_dense(6, 5, 1, 9).unwrap();
        let bits = draw_dense(6, 5, &mut rng::seeded(rng::derive_seed(9, 0)));
        assert_eq!(cb, Codebook::new(6, 5, bits).unwrap());
    }

    #[test]
    fn random_dense_rejects_impossible() {
        assert!(generate_random_dense(9, 3, 1, 0).is_err());
        assert!(generate_random_dense(3, 4, 1, 0).is_err());
        assert!(generate_random_dense(3, 3, 0, 0).is_err());
    }

    #[test]
    fn more_trials_never_worse() {
        let one = min_row_distance(&generate_random_dense(10, 8, 1, 5).unwrap());
        let many = min_row_distance(&generate_random_dense(10, 8, 200, 5).unwrap());
        assert!(many >= one);
    }
}
