//! Datasets, the sparse `label idx:val ...` text format, and synthetic
//! Gaussian mixtures.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// A sparse feature vector: `(index, value)` pairs with strictly increasing indices.
pub type SparseVec = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: SparseVec,
    pub label: usize,
}

impl Example {
    pub fn new(features: SparseVec, label: usize) -> Result<Self> {
        check_increasing(&features).map_err(Error::invalid)?;
        Ok(Self { features, label })
    }

    pub fn dense(values: &[f64], label: usize) -> Self {
        let features = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self { features, label }
    }
}

fn check_increasing(features: &[(u32, f64)]) -> std::result::Result<(), String> {
    for w in features.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(format!(
                "feature indices not strictly increasing ({} then {})",
                w[0].0, w[1].0
            ));
        }
    }
    Ok(())
}

/// Where feature indices start in a sparse text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexBase {
    Zero,
    #[default]
    One,
}

impl IndexBase {
    fn offset(self) -> u64 {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }
}

/// An immutable labelled dataset with dense class ids `0..num_classes`.
///
/// `label_names[k]` is the label that class `k` carried in the source file
/// (or its decimal id for generated data).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    num_classes: usize,
    num_features: usize,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, num_classes: usize, num_features: usize) -> Result<Self> {
        let names = (0..num_classes).map(|k| k.to_string()).collect();
        Self::with_label_names(examples, num_features, names)
    }

    pub fn with_label_names(
        examples: Vec<Example>,
        num_features: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let num_classes = label_names.len();
        if examples.is_empty() {
            return Err(Error::invalid("dataset has no examples"));
        }
        for (i, ex) in examples.iter().enumerate() {
            if ex.label >= num_classes {
                return Err(Error::invalid(format!(
                    "example {i} has label {} but K = {num_classes}",
                    ex.label
                )));
            }
            check_increasing(&ex.features)
                .map_err(|msg| Error::invalid(format!("example {i}: {msg}")))?;
            if let Some(&(idx, _)) = ex.features.last() {
                if idx as usize >= num_features {
                    return Err(Error::invalid(format!(
                        "example {i} has feature {idx} but d = {num_features}"
                    )));
                }
            }
        }
        Ok(Self {
            examples,
            num_classes,
            num_features,
            label_names,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.examples.iter().map(|e| e.label)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for ex in &self.examples {
            counts[ex.label] += 1;
        }
        counts
    }

    /// Returns a copy with examples in a seeded random order.
    pub fn shuffled(&self, seed: u64) -> Self {
        let mut examples = self.examples.clone();
        examples.shuffle(&mut rng::seeded(seed));
        Self {
            examples,
            ..self.clone()
        }
    }

    /// Returns the examples at `indices`, keeping class and feature spaces.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let examples = indices.iter().map(|&i| self.examples[i].clone()).collect();
        Self::with_label_names(examples, self.num_features, self.label_names.clone())
    }
}

/// Reads a sparse text dataset, densifying labels to `0..K` in sorted order.
pub fn read_sparse_dataset(path: impl AsRef<Path>, base: IndexBase) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sparse_dataset(&text, base, None)
}

/// Reads a sparse text dataset using an existing label vocabulary, e.g. the
/// training set's, so that class ids agree across splits.
pub fn read_sparse_dataset_with_labels(
    path: impl AsRef<Path>,
    base: IndexBase,
    label_names: &[String],
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sparse_dataset(&text, base, Some(label_names))
}

pub fn parse_sparse_dataset(
    text: &str,
    base: IndexBase,
    known_labels: Option<&[String]>,
) -> Result<Dataset> {
    let mut raw: Vec<(usize, String, SparseVec)> = Vec::new();
    let mut max_index: Option<u32> = None;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("nonempty line has a token").to_string();
        let mut features = SparseVec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("expected idx:val, got {tok:?}")))?;
            let idx: u64 = idx
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad feature index {idx:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad feature value {val:?}")))?;
            if idx < base.offset() {
                return Err(Error::parse(lineno, "feature index 0 in a 1-based file"));
            }
            let idx = u32::try_from(idx - base.offset())
                .map_err(|_| Error::parse(lineno, "feature index out of range"))?;
            if let Some(&(prev, _)) = features.last() {
                if idx <= prev {
                    return Err(Error::parse(
                        lineno,
                        "feature indices not strictly increasing",
                    ));
                }
            }
            features.push((idx, val));
        }
        if let Some(&(idx, _)) = features.last() {
            max_index = Some(max_index.map_or(idx, |m| m.max(idx)));
        }
        raw.push((lineno, label, features));
    }
    if raw.is_empty() {
        return Err(Error::invalid("dataset file contains no examples"));
    }

    let names: Vec<String> = match known_labels {
        Some(known) => known.to_vec(),
        None => {
            let mut names: Vec<String> = raw.iter().map(|(_, l, _)| l.clone()).collect();
            sort_labels(&mut names);
            names.dedup();
            names
        }
    };
    let ids: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut examples = Vec::with_capacity(raw.len());
    for (lineno, label, features) in raw {
        let id = *ids
            .get(label.as_str())
            .ok_or_else(|| Error::parse(lineno, format!("unknown label {label:?}")))?;
        examples.push(Example { features, label: id });
    }
    let num_features = max_index.map_or(0, |m| m as usize + 1);
    Dataset::with_label_names(examples, num_features, names)
}

/// Numeric order when every label parses as an integer, lexicographic otherwise.
fn sort_labels(names: &mut [String]) {
    if names.iter().all(|n| n.parse::<i64>().is_ok()) {
        names.sort_by_key(|n| n.parse::<i64>().unwrap());
    } else {
        names.sort();
    }
}

pub fn format_sparse_dataset(ds: &Dataset, base: IndexBase) -> String {
    let mut out = String::new();
    for ex in ds.examples() {
        out.push_str(&ds.label_names[ex.label]);
        for &(idx, val) in &ex.features {
            write!(out, " {}:{}", idx as u64 + base.offset(), val).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_sparse_dataset(ds: &Dataset, path: impl AsRef<Path>, base: IndexBase) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_sparse_dataset(ds, base)).map_err(|e| Error::io(path, e))
}

fn default_dim() -> usize {
    2
}

fn default_noise() -> f64 {
    0.6
}

/// Isotropic Gaussian mixture with one component per class.
///
/// Without explicit `centers`, class `k` sits at angle `2πk/K` on a circle of
/// radius 5 in the first two coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(rename = "k")]
    pub num_classes: usize,
    pub per_class: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub const DEFAULT_RADIUS: f64 = 5.0;

    pub fn circle(num_classes: usize, per_class: usize, seed: u64) -> Self {
        Self {
            num_classes,
            per_class,
            dim: 2,
            centers: None,
            noise_std: default_noise(),
            seed,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        if let Some(c) = &self.centers {
            return c.clone();
        }
        circle_centers(self.num_classes, self.dim, Self::DEFAULT_RADIUS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.per_class == 0 || self.dim == 0 {
            return Err(Error::invalid("k, per_class and dim must be positive"));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be positive"));
        }
        let centers = self.centers();
        if centers.len() != self.num_classes {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes,
                got: centers.len(),
            });
        }
        for c in &centers {
            if c.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: c.len(),
                });
            }
        }
        for i in 0..centers.len() {
            for j in 0..i {
                if centers[i] == centers[j] {
                    return Err(Error::invalid(format!("centers {j} and {i} coincide")));
                }
            }
        }
        Ok(())
    }
}

/// `k` points evenly spaced on a circle in the first two coordinates.
/// One-dimensional specs place them on a line with spacing `radius`.
pub fn circle_centers(k: usize, dim: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            let mut v = vec![0.0; dim];
            if dim == 1 {
                v[0] = radius * c as f64;
            } else {
                let angle = 2.0 * PI * c as f64 / k as f64;
                v[0] = radius * angle.cos();
                v[1] = radius * angle.sin();
            }
            v
        })
        .collect()
}

/// Two-level cluster layout: `groups` cluster centers on a circle of radius
/// `outer`, each surrounded by `per_group` class centers on a circle of
/// radius `inner`. Class `g * per_group + i` belongs to group `g`.
pub fn clustered_centers(groups: usize, per_group: usize, outer: f64, inner: f64) -> Vec<Vec<f64>> {
    let hubs = circle_centers(groups, 2, outer);
    let mut centers = Vec::with_capacity(groups * per_group);
    for hub in &hubs {
        for offset in circle_centers(per_group, 2, inner) {
            centers.push(vec![hub[0] + offset[0], hub[1] + offset[1]]);
        }
    }
    centers
}

/// Draws `per_class` points per class, class-major, deterministically in `spec.seed`.
pub fn generate_gaussian_mixture(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let centers = spec.centers();
    let mut rng = rng::seeded(spec.seed);
    let mut examples = Vec::with_capacity(spec.num_classes * spec.per_class);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            let point: Vec<f64> = center
                .iter()
                .map(|&c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + spec.noise_std * z
                })
                .collect();
            examples.push(Example::dense(&point, label));
        }
    }
    Dataset::new(examples, spec.num_classes, spec.dim)
}

pub fn to_dense(features: &[(u32, f64)], dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for &(i, x) in features {
        v[i as usize] = x;
    }
    v
}

/// Per-class arithmetic mean of the densified feature vectors.
pub fn class_feature_means(ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    let d = ds.num_features();
    let mut sums = vec![vec![0.0; d]; ds.num_classes()];
    let mut counts = vec![0usize; ds.num_classes()];
    for ex in ds.examples() {
        counts[ex.label] += 1;
        for &(i, x) in &ex.features {
            sums[ex.label][i as usize] += x;
        }
    }
    for (k, (sum, &n)) in sums.iter_mut().zip(&counts).enumerate() {
        if n == 0 {
            return Err(Error::EmptyClass(k));
        }
        for s in sum.iter_mut() {
            *s /= n as f64;
        }
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_one_based_line() {
        let ds = parse_sparse_dataset("3 1:0.5 7:2.0\n", IndexBase::One, None).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label_names(), ["3"]);
        assert_eq!(ds.examples()[0].features, vec![(0, 0.5), (6, 2.0)]);
        assert_eq!(ds.examples()[0].label, 0);
        assert_eq!(ds.num_features(), 7);
    }

    #[test]
    fn densifies_labels() {
        let ds = parse_sparse_dataset("5 1:1\n9 2:1\n5 1:2\n", IndexBase::One, None).unwrap();
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.label_names(), ["5", "9"]);
        assert_eq!(ds.labels().collect::<Vec<_>>(), vec![0, 1, 0]);
    }

    #[test]
    fn labels_sort_numerically() {
        let ds = parse_sparse_dataset("10 1:1\n9 1:1\n-1 1:1\n", IndexBase::One, None).unwrap();
        assert_eq!(ds.label_names(), ["-1", "9", "10"]);
    }

    #[test]
    fn rejects_decreasing_indices() {
        let err = parse_sparse_dataset("1 1:1\n2 7:1.0 3:1.0\n", IndexBase::One, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_malformed_tokens() {
        for bad in ["1 3\n", "1 a:1\n", "1 2:x\n", "1 0:1\n"] {
            let err = parse_sparse_dataset(bad, IndexBase::One, None).unwrap_err();
            assert!(matches!(err, Error::Parse { line: 1, .. }), "{bad}: {err}");
        }
        assert!(parse_sparse_dataset("1 0:1\n", IndexBase::Zero, None).is_ok());
    }

    #[test]
    fn rejects_empty_file() {
        assert!(parse_sparse_dataset("", IndexBase::One, None).is_err());
        assert!(parse_sparse_dataset("# only a comment\n\n", IndexBase::One, None).is_err());
    }

    #[test]
    fn skips_comments() {
        let ds = parse_sparse_dataset("# header\n1 1:1\n\n2 2:1\n", IndexBase::One, None).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn known_labels_reject_unseen() {
        let names = vec!["a".to_string(), "b".to_string()];
        let ds = parse_sparse_dataset("b 1:1\n", IndexBase::One, Some(&names)).unwrap();
        assert_eq!(ds.examples()[0].label, 1);
        assert_eq!(ds.num_classes(), 2);
        assert!(parse_sparse_dataset("c 1:1\n", IndexBase::One, Some(&names)).is_err());
    }

    #[test]
    fn mixture_has_expected_size() {
        let ds = generate_gaussian_mixture(&SyntheticSpec::circle(6, 100, 1)).unwrap();
        assert_eq!(ds.len(), 600);
        assert_eq!(ds.class_counts(), vec![100; 6]);
    }

    #[test]
    fn mixture_is_deterministic() {
        let spec = SyntheticSpec::circle(4, 10, 99);
        let a = generate_gaussian_mixture(&spec).unwrap();
        let b = generate_gaussian_mixture(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_gaussian_mixture(&SyntheticSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vanishing_noise_collapses_to_centers() {
        let spec = SyntheticSpec {
            noise_std: 1e-300,
            ..SyntheticSpec::circle(6, 5, 3)
        };
        let ds = generate_gaussian_mixture(&spec).unwrap();
        let centers = spec.centers();
        for ex in ds.examples() {
            let x = to_dense(&ex.features, 2);
            for (a, b) in x.iter().zip(&centers[ex.label]) {
                assert!((a - b).abs() < 1e-250);
            }
        }
        let means = class_feature_means(&ds).unwrap();
        for (m, c) in means.iter().zip(&centers) {
            for (a, b) in m.iter().zip(c) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SyntheticSpec::circle(3, 1, 0);
        spec.noise_std = 0.0;
        assert!(generate_gaussian_mixture(&spec).is_err());
        let spec = SyntheticSpec {
            centers: Some(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]]),
            ..SyntheticSpec::circle(3, 1, 0)
        };
        assert!(generate_gaussian_mixture(&spec).is_err());
    }

    #[test]
    fn spec_from_config() {
        let spec = SyntheticSpec::from_toml_str(
            "k = 3\nper_class = 4\nseed = 11\nnoise_std = 0.25\ncenters = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]\n",
        )
        .unwrap();
        assert_eq!(spec.num_classes, 3);
        assert_eq!(spec.dim, 2);
        assert_eq!(spec.noise_std, 0.25);
        assert_eq!(generate_gaussian_mixture(&spec).unwrap().len(), 12);
        let defaulted = SyntheticSpec::from_toml_str("k = 6\nper_class = 100\nseed = 1\n").unwrap();
        assert_eq!(defaulted, SyntheticSpec::circle(6, 100, 1));
    }

    #[test]
    fn means_of_single_and_pair() {
        let single = Dataset::new(vec![Example::dense(&[1.5, -2.0], 0)], 1, 2).unwrap();
        assert_eq!(class_feature_means(&single).unwrap(), vec![vec![1.5, -2.0]]);
        let pair = Dataset::new(
            vec![Example::dense(&[0.0, 0.0], 0), Example::dense(&[2.0, 2.0], 0)],
            1,
            2,
        )
        .unwrap();
        assert_eq!(class_feature_means(&pair).unwrap(), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn empty_class_is_named() {
        let ds = Dataset::new(vec![Example::dense(&[1.0], 0)], 3, 1).unwrap();
        assert!(matches!(class_feature_means(&ds), Err(Error::EmptyClass(1))));
    }

    #[test]
    fn clustered_layout_groups_classes() {
        let c = clustered_centers(4, 4, 20.0, 2.0);
        assert_eq!(c.len(), 16);
        let dist = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!(dist(&c[0], &c[1]) < dist(&c[0], &c[4]));
    }
}
