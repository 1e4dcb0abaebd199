//! Class distance matrices and class taxonomies.
//!
//! Every builder returns a [`ClassMetric`] normalized to unit Frobenius norm,
//! which is the scale the class-codeword score compares at.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::engine::Classifier;
use crate::{Error, Result};

/// Symmetric, zero-diagonal, nonnegative `K x K` class distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetric {
    k: usize,
    dist: Vec<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl ClassMetric {
    pub fn from_matrix(k: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                got: dist.len(),
            });
        }
        for i in 0..k {
            if dist[i * k + i] != 0.0 {
                return Err(Error::invalid(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..k {
                let (a, b) = (dist[i * k + j], dist[j * k + i]);
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::invalid(format!("entry ({i}, {j}) = {a} is not a distance")));
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(Self { k, dist })
    }

    pub fn size(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.k + b]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dist.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return Err(Error::Degenerate(
                "all class distances are zero; cannot normalize".into(),
            ));
        }
        Ok(Self {
            k: self.k,
            dist: self.dist.iter().map(|x| x / norm).collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.k);
        for i in 0..self.k {
            let row: Vec<String> = (0..self.k).map(|j| self.get(i, j).to_string()).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .enumerate()
            .flat_map(|(n, l)| l.split_whitespace().map(move |t| (n + 1, t)));
        let (line, first) = tokens.next().ok_or_else(|| Error::invalid("empty metric file"))?;
        let k: usize = first
            .parse()
            .map_err(|_| Error::parse(line, "expected the class count"))?;
        let dist = tokens
            .map(|(line, t)| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad number {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_matrix(k, dist)
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

/// Confusion counts; row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            counts: vec![0.0; k * k],
        }
    }

    pub fn from_counts(k: usize, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                got: counts.len(),
            });
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("confusion entries must be finite and nonnegative"));
        }
        Ok(Self { k, counts })
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> f64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.k + predicted] += 1.0;
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// `D_ij = log A_ij - 1.1 · min_{i'≠j'} log A_i'j'` with
/// `A = 1 - (C + Cᵀ)/2` and `C` scaled to unit sum, before normalization.
///
/// If any off-diagonal count is zero, `1/(2m)` (half a count, `m` the total)
/// is added to every off-diagonal cell of the scaled matrix first.
pub fn confusion_distances(c: &ConfusionMatrix) -> Result<Vec<f64>> {
    let k = c.k;
    let m = c.total();
    if m <= 0.0 {
        return Err(Error::Degenerate("confusion matrix is empty".into()));
    }
    let mut scaled: Vec<f64> = c.counts.iter().map(|x| x / m).collect();
    let off_diagonal = |i: usize| i / k != i % k;
    if (0..k * k).any(|i| off_diagonal(i) && c.counts[i] == 0.0) {
        let smoothing = 1.0 / (2.0 * m);
        for (i, x) in scaled.iter_mut().enumerate() {
            if off_diagonal(i) {
                *x += smoothing;
            }
        }
    }
    let mut log_a = vec![0.0; k * k];
    let mut min_log = f64::INFINITY;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let a = 1.0 - 0.5 * (scaled[i * k + j] + scaled[j * k + i]);
                if a <= 0.0 {
                    return Err(Error::Degenerate(format!(
                        "A[{i}][{j}] = {a} is not positive; smooth the confusion counts"
                    )));
                }
                log_a[i * k + j] = a.ln();
                min_log = min_log.min(log_a[i * k + j]);
            }
        }
    }
    if min_log >= 0.0 {
        return Err(Error::Degenerate(
            "confusion matrix has no off-diagonal mass".into(),
        ));
    }
    let mut d = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                d[i * k + j] = log_a[i * k + j] - 1.1 * min_log;
            }
        }
    }
    Ok(d)
}

pub fn confusion_to_metric(c: &ConfusionMatrix) -> Result<ClassMetric> {
    ClassMetric::from_matrix(c.k, confusion_distances(c)?)?.normalized()
}

pub fn euclidean_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let k = points.len();
    let mut d = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let dist = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i * k + j] = dist;
            d[j * k + i] = dist;
        }
    }
    d
}

pub fn means_to_metric(means: &[Vec<f64>]) -> Result<ClassMetric> {
    if means.len() < 2 {
        return Err(Error::invalid("need at least two class means"));
    }
    let dim = means[0].len();
    if let Some(m) = means.iter().find(|m| m.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m.len(),
        });
    }
    ClassMetric::from_matrix(means.len(), euclidean_distances(means))?.normalized()
}

/// Parses `<name> v1 v2 ... vd` lines.
pub fn parse_embeddings(text: &str) -> Result<HashMap<String, Vec<f64>>> {
    let mut out = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        let Some(name) = tokens.next() else { continue };
        let v = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(lineno + 1, format!("bad number {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(name.to_string(), v);
    }
    Ok(out)
}

pub fn embeddings_to_metric(path: impl AsRef<Path>, class_names: &[String]) -> Result<ClassMetric> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    metric_from_embeddings(&parse_embeddings(&text)?, class_names)
}

pub fn metric_from_embeddings(
    table: &HashMap<String, Vec<f64>>,
    class_names: &[String],
) -> Result<ClassMetric> {
    let missing: Vec<&str> = class_names
        .iter()
        .filter(|n| !table.contains_key(n.as_str()))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "no embedding for class(es): {}",
            missing.join(", ")
        )));
    }
    let vectors: Vec<Vec<f64>> = class_names.iter().map(|n| table[n].clone()).collect();
    means_to_metric(&vectors)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyNode {
    pub children: Vec<usize>,
    pub class: Option<usize>,
}

/// Rooted tree whose leaves are labelled bijectively with classes `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: Vec<TaxonomyNode>,
    root: usize,
    num_classes: usize,
}

impl Taxonomy {
    pub fn new(nodes: Vec<TaxonomyNode>, root: usize) -> Result<Self> {
        let mut parent_seen = vec![false; nodes.len()];
        let mut visited = vec![false; nodes.len()];
        let mut classes = Vec::new();
        let mut stack = vec![root];
        if root >= nodes.len() {
            return Err(Error::invalid("root is not a node"));
        }
        while let Some(v) = stack.pop() {
            if visited[v] {
                return Err(Error::invalid(format!("node {v} is reached twice")));
            }
            visited[v] = true;
            let node = &nodes[v];
            match (node.class, node.children.is_empty()) {
                (Some(c), true) => classes.push(c),
                (None, false) => {}
                (Some(_), false) => {
                    return Err(Error::invalid(format!("labelled node {v} has children")))
                }
                (None, true) => return Err(Error::invalid(format!("leaf {v} has no class"))),
            }
            for &c in &node.children {
                if c >= nodes.len() || parent_seen[c] || c == root {
                    return Err(Error::invalid(format!("node {c} has a bad parent link")));
                }
                parent_seen[c] = true;
                stack.push(c);
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(Error::invalid("taxonomy has nodes unreachable from the root"));
        }
        let k = classes.len();
        let mut seen = vec![false; k];
        for &c in &classes {
            if c >= k || seen[c] {
                return Err(Error::invalid(format!(
                    "leaf classes must be a permutation of 0..{k}"
                )));
            }
            seen[c] = true;
        }
        Ok(Self {
            nodes,
            root,
            num_classes: k,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    /// Edges in preorder (so stored child order survives a reload), then leaf records.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut leaves = Vec::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if let Some(c) = self.nodes[v].class {
                leaves.push((v, c));
            }
            for &c in &self.nodes[v].children {
                writeln!(out, "{v} {c}").unwrap();
            }
            stack.extend(self.nodes[v].children.iter().rev());
        }
        for (v, c) in leaves {
            writeln!(out, "leaf {v} {c}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut index: BTreeMap<usize, usize> = BTreeMap::new();
        let mut nodes: Vec<TaxonomyNode> = Vec::new();
        let mut has_parent: Vec<bool> = Vec::new();
        let mut node_of = |id: usize, nodes: &mut Vec<TaxonomyNode>, hp: &mut Vec<bool>| {
            *index.entry(id).or_insert_with(|| {
                nodes.push(TaxonomyNode {
                    children: Vec::new(),
                    class: None,
                });
                hp.push(false);
                nodes.len() - 1
            })
        };
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| Error::parse(lineno, format!("expected an integer, got {t:?}")))
            };
            match fields.as_slice() {
                [] => {}
                ["leaf", node, class] => {
                    let v = node_of(num(node)?, &mut nodes, &mut has_parent);
                    if nodes[v].class.replace(num(class)?).is_some() {
                        return Err(Error::parse(lineno, "leaf labelled twice"));
                    }
                }
                [parent, child] => {
                    let p = node_of(num(parent)?, &mut nodes, &mut has_parent);
                    let c = node_of(num(child)?, &mut nodes, &mut has_parent);
                    nodes[p].children.push(c);
                    has_parent[c] = true;
                }
                _ => return Err(Error::parse(lineno, "expected `parent child` or `leaf node class`")),
            }
        }
        let roots: Vec<usize> = (0..nodes.len()).filter(|&v| !has_parent[v]).collect();
        match roots.as_slice() {
            [root] => Self::new(nodes, *root),
            [] => Err(Error::invalid("taxonomy has no root")),
            _ => Err(Error::invalid(format!("taxonomy has {} roots", roots.len()))),
        }
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

/// Leaf classes in depth-first order, children visited in stored order.
pub fn dfs_leaf_order(t: &Taxonomy) -> Vec<usize> {
    let mut order = Vec::with_capacity(t.num_classes);
    let mut stack = vec![t.root];
    while let Some(v) = stack.pop() {
        let node = &t.nodes[v];
        if let Some(c) = node.class {
            order.push(c);
        }
        stack.extend(node.children.iter().rev());
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Average,
}

/// Agglomerative clustering of class means into a binary merge tree.
///
/// Leaves are nodes `0..K` (node `c` holds class `c`); merge `t` creates node
/// `K + t` whose children are ordered by their smallest member class. Equal
/// linkage distances merge the pair with the smallest member classes first.
pub fn agglomerative_taxonomy(means: &[Vec<f64>], linkage: Linkage) -> Result<Taxonomy> {
    let k = means.len();
    if k < 2 {
        return Err(Error::invalid("need at least two classes to cluster"));
    }
    let point_dist = euclidean_distances(means);
    let mut nodes: Vec<TaxonomyNode> = (0..k)
        .map(|c| TaxonomyNode {
            children: Vec::new(),
            class: Some(c),
        })
        .collect();

    // Active clusters, kept sorted by smallest member class.
    struct Cluster {
        node: usize,
        min_class: usize,
        size: usize,
    }
    let mut active: Vec<Cluster> = (0..k)
        .map(|c| Cluster {
            node: c,
            min_class: c,
            size: 1,
        })
        .collect();
    // Distances between active clusters, indexed by position in `active`.
    let mut dist: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| point_dist[i * k + j]).collect())
        .collect();

    while active.len() > 1 {
        let n = active.len();
        let (mut bi, mut bj, mut best) = (0, 1, f64::INFINITY);
        for i in 0..n {
            for j in i + 1..n {
                if dist[i][j] < best {
                    best = dist[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        let (si, sj) = (active[bi].size as f64, active[bj].size as f64);
        let merged_row: Vec<f64> = (0..n)
            .map(|c| match linkage {
                Linkage::Single => dist[bi][c].min(dist[bj][c]),
                Linkage::Complete => dist[bi][c].max(dist[bj][c]),
                Linkage::Average => (si * dist[bi][c] + sj * dist[bj][c]) / (si + sj),
            })
            .collect();

        let node = nodes.len();
        nodes.push(TaxonomyNode {
            children: vec![active[bi].node, active[bj].node],
            class: None,
        });
        // bi < bj, so the merged cluster keeps bi's position and bi's min class.
        active[bi] = Cluster {
            node,
            min_class: active[bi].min_class,
            size: active[bi].size + active[bj].size,
        };
        for c in 0..n {
            dist[bi][c] = merged_row[c];
            dist[c][bi] = merged_row[c];
        }
        dist[bi][bi] = 0.0;
        active.remove(bj);
        dist.remove(bj);
        for row in dist.iter_mut() {
            row.remove(bj);
        }
        debug_assert!(active.windows(2).all(|w| w[0].min_class < w[1].min_class));
    }
    let root = active[0].node;
    Taxonomy::new(nodes, root)
}

/// Confusion matrix of a multiclass model summed over folds.
///
/// With `folds == 1` the model is trained and evaluated on the full set.
/// Otherwise example `i` goes to fold `i % folds`; each round trains on one
/// fold and evaluates on all the others, and the rounds' counts are summed.
pub fn compute_confusion<M, F>(ds: &Dataset, train: F, folds: usize) -> Result<ConfusionMatrix>
where
    M: Classifier,
    F: Fn(&Dataset) -> Result<M>,
{
    if folds == 0 {
        return Err(Error::invalid("folds must be at least 1"));
    }
    let k = ds.num_classes();
    let mut total = ConfusionMatrix::zeros(k);
    if folds == 1 {
        let model = train(ds)?;
        for ex in ds.examples() {
            total.record(ex.label, model.predict(&ex.features)?);
        }
        return Ok(total);
    }
    if folds > ds.len() {
        return Err(Error::invalid(format!(
            "{folds} folds for {} examples",
            ds.len()
        )));
    }
    for f in 0..folds {
        let fold: Vec<usize> = (f..ds.len()).step_by(folds).collect();
        let fold_ds = ds.subset(&fold)?;
        let counts = fold_ds.class_counts();
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!(
                "fold {f} has no example of class {missing}; use fewer folds"
            )));
        }
        let model = train(&fold_ds)?;
        for (i, ex) in ds.examples().iter().enumerate() {
            if i % folds != f {
                total.record(ex.label, model.predict(&ex.features)?);
            }
        }
    }
    Ok(total)
}
