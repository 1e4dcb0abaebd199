//! Layered coding graphs with exactly `K` source-sink paths.
//!
//! Every edge is a codebook column and every source-sink path a codeword
//! whose `+1` bits are the edges it uses. Because the graph is layered, the
//! loss-based decision over all `K` codewords reduces to a shortest path
//! over the edges, so decoding touches each edge once regardless of `K`.

use std::fmt::Write as _;
use std::path::Path;

use crate::codebook::Codebook;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

/// Ordered edge ids from source to sink.
pub type CodePath = Vec<usize>;

/// A coding DAG. Vertex `0` is the source, the last vertex is the sink, and
/// every edge goes from a lower to a higher vertex id. Edge ids are column
/// indices of the induced codebook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingDag {
    num_paths: usize,
    slice_width: usize,
    num_slices: usize,
    num_vertices: usize,
    edges: Vec<Edge>,
    /// Out-edges per vertex, ascending by id.
    out_edges: Vec<Vec<usize>>,
    /// Number of vertex-to-sink paths.
    paths_to_sink: Vec<u64>,
}

fn smallest_power_at_least(b: usize, k: usize) -> usize {
    let mut s = 0;
    let mut p: u128 = 1;
    while p < k as u128 {
        p *= b as u128;
        s += 1;
    }
    s
}

/// Builds a trellis of width `b` with exactly `k` source-sink paths.
///
/// With `S = ceil(log_b k)` slices, a vertex of slice `t` is reached by
/// `b^(t-1)` paths. The last slice keeps `q = k / b^(S-1)` vertices, and the
/// remainder `k - q·b^(S-1)` is written in base `b`; digit `t` gives the number
/// of slice-`t` vertices with an extra edge straight to the sink. When
/// `k <= b` the single slice is contracted, leaving `k` parallel source-sink
/// edges.
pub fn build_coding_dag(k: usize, b: usize) -> Result<CodingDag> {
    if k < 2 || b < 2 {
        return Err(Error::invalid("coding DAG needs K >= 2 and b >= 2"));
    }
    let slices = smallest_power_at_least(b, k);
    let mut edges = Vec::new();
    if slices == 1 {
        edges.extend((0..k).map(|_| Edge { from: 0, to: 1 }));
        return CodingDag::from_edges(k, b, 0, edges);
    }

    let below_last = b.pow(slices as u32 - 1);
    let last_width = k / below_last;
    let mut remainder = k - last_width * below_last;
    let mut exits = vec![0usize; slices];
    for digit in exits.iter_mut().take(slices - 1) {
        *digit = remainder % b;
        remainder /= b;
    }

    // Vertex ids: source, b per slice for slices 1..S-1, last_width, sink.
    let slice_start = |t: usize| 1 + (t - 1) * b;
    let width = |t: usize| if t == slices { last_width } else { b };
    let sink = slice_start(slices) + last_width;

    for v in 0..b {
        edges.push(Edge {
            from: 0,
            to: slice_start(1) + v,
        });
    }
    for t in 1..slices {
        for u in 0..b {
            let from = slice_start(t) + u;
            for v in 0..width(t + 1) {
                edges.push(Edge {
                    from,
                    to: slice_start(t + 1) + v,
                });
            }
            if u < exits[t - 1] {
                edges.push(Edge { from, to: sink });
            }
        }
    }
    for v in 0..last_width {
        edges.push(Edge {
            from: slice_start(slices) + v,
            to: sink,
        });
    }
    CodingDag::from_edges(k, b, slices, edges)
}

impl CodingDag {
    /// Validates an edge list (edge id = position) and indexes it.
    pub fn from_edges(
        num_paths: usize,
        slice_width: usize,
        num_slices: usize,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::invalid("coding DAG has no edges"));
        }
        let num_vertices = edges.iter().map(|e| e.to.max(e.from)).max().unwrap() + 1;
        let sink = num_vertices - 1;
        let mut out_edges = vec![Vec::new(); num_vertices];
        let mut in_degree = vec![0usize; num_vertices];
        for (id, e) in edges.iter().enumerate() {
            if e.from >= e.to {
                return Err(Error::invalid(format!(
                    "edge {id} ({} -> {}) does not point forward",
                    e.from, e.to
                )));
            }
            out_edges[e.from].push(id);
            in_degree[e.to] += 1;
        }
        for v in 0..num_vertices {
            if v != 0 && in_degree[v] == 0 {
                return Err(Error::invalid(format!("vertex {v} is unreachable")));
            }
            if v != sink && out_edges[v].is_empty() {
                return Err(Error::invalid(format!("vertex {v} is a dead end")));
            }
        }

        let mut paths_to_sink = vec![0u64; num_vertices];
        paths_to_sink[sink] = 1;
        for v in (0..sink).rev() {
            paths_to_sink[v] = out_edges[v]
                .iter()
                .map(|&e| paths_to_sink[edges[e].to])
                .fold(0u64, u64::saturating_add);
        }
        if paths_to_sink[0] != num_paths as u64 {
            return Err(Error::invalid(format!(
                "graph has {} source-sink paths, expected {num_paths}",
                paths_to_sink[0]
            )));
        }
        Ok(Self {
            num_paths,
            slice_width,
            num_slices,
            num_vertices,
            edges,
            out_edges,
            paths_to_sink,
        })
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn slice_width(&self) -> usize {
        self.slice_width
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.num_vertices - 1
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    /// Depth-first, out-edges in id order.
    pub fn canonical_paths(&self) -> Vec<CodePath> {
        let mut paths = Vec::with_capacity(self.num_paths);
        let mut current = Vec::new();
        self.walk(self.source(), &mut current, &mut paths);
        paths
    }

    fn walk(&self, v: usize, current: &mut CodePath, out: &mut Vec<CodePath>) {
        if v == self.sink() {
            out.push(current.clone());
            return;
        }
        for &e in &self.out_edges[v] {
            current.push(e);
            self.walk(self.edges[e].to, current, out);
            current.pop();
        }
    }

    /// Position of `path` in the canonical order.
    pub fn path_index(&self, path: &[usize]) -> Result<usize> {
        let mut v = self.source();
        let mut index = 0u64;
        for &e in path {
            let pos = self.out_edges[v]
                .iter()
                .position(|&x| x == e)
                .ok_or_else(|| Error::invalid(format!("edge {e} does not leave vertex {v}")))?;
            index += self.out_edges[v][..pos]
                .iter()
                .map(|&x| self.paths_to_sink[self.edges[x].to])
                .sum::<u64>();
            v = self.edges[e].to;
        }
        if v != self.sink() {
            return Err(Error::invalid("path does not end at the sink"));
        }
        Ok(index as usize)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {}\n",
            self.num_paths, self.slice_width, self.num_slices
        );
        for (id, e) in self.edges.iter().enumerate() {
            writeln!(out, "{} {} {}", e.from, e.to, id).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::invalid("empty DAG file"))?;
        let header = parse_usizes(header, 1, 3)?;
        let mut slots: Vec<Option<Edge>> = Vec::new();
        for (lineno, line) in lines {
            let f = parse_usizes(line, lineno + 1, 3)?;
            let id = f[2];
            if id >= slots.len() {
                slots.resize(id + 1, None);
            }
            if slots[id].is_some() {
                return Err(Error::parse(lineno + 1, format!("duplicate edge id {id}")));
            }
            slots[id] = Some(Edge {
                from: f[0],
                to: f[1],
            });
        }
        let edges = slots
            .into_iter()
            .enumerate()
            .map(|(id, e)| e.ok_or_else(|| Error::invalid(format!("edge id {id} missing"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(header[0], header[1], header[2], edges)
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

fn parse_usizes(line: &str, lineno: usize, n: usize) -> Result<Vec<usize>> {
    let fields = line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(lineno, format!("expected an integer, got {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if fields.len() != n {
        return Err(Error::parse(lineno, format!("expected {n} fields")));
    }
    Ok(fields)
}

pub fn canonical_path_order(dag: &CodingDag) -> Vec<CodePath> {
    dag.canonical_paths()
}

/// Row `k` marks the edges of canonical path `k` with `+1`.
pub fn dag_to_codebook(dag: &CodingDag) -> Result<Codebook> {
    let l = dag.num_edges();
    let paths = dag.canonical_paths();
    let mut bits = vec![-1i8; paths.len() * l];
    for (k, path) in paths.iter().enumerate() {
        for &e in path {
            bits[k * l + e] = 1;
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(paths.len());
    for k in 0..paths.len() {
        if !seen.insert(&bits[k * l..(k + 1) * l]) {
            return Err(Error::invalid(format!(
                "path {k} repeats the edge set of an earlier path"
            )));
        }
    }
    Codebook::new(paths.len(), l, bits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphDecode {
    /// Canonical path index of the minimizer.
    pub class: usize,
    /// Total decoding loss of that path over all edges.
    pub cost: f64,
    /// Loss pairs read plus edge relaxations performed.
    pub operations: usize,
}

/// Decodes edge losses `(L(+f_e), L(-f_e))` by shortest path.
///
/// A path's cost is the use-loss of its edges plus the not-use loss of all
/// other edges, i.e. the full loss sum of its codeword. Ties go to the
/// smallest canonical index.
pub fn dag_soft_decode(dag: &CodingDag, edge_losses: &[(f64, f64)]) -> Result<usize> {
    dag_soft_decode_detailed(dag, edge_losses).map(|d| d.class)
}

pub fn dag_soft_decode_detailed(dag: &CodingDag, edge_losses: &[(f64, f64)]) -> Result<GraphDecode> {
    if edge_losses.len() != dag.num_edges() {
        return Err(Error::DimensionMismatch {
            expected: dag.num_edges(),
            got: edge_losses.len(),
        });
    }
    let mut operations = 0usize;
    let mut base = 0.0;
    let mut weight = Vec::with_capacity(edge_losses.len());
    for (e, &(used, unused)) in edge_losses.iter().enumerate() {
        if !used.is_finite() || !unused.is_finite() {
            return Err(Error::NonFinite(format!("loss of edge {e}")));
        }
        base += unused;
        weight.push(used - unused);
        operations += 1;
    }

    let sink = dag.sink();
    let mut dist = vec![f64::INFINITY; dag.num_vertices()];
    let mut choice = vec![usize::MAX; dag.num_vertices()];
    dist[sink] = 0.0;
    for v in (0..sink).rev() {
        for &e in dag.out_edges(v) {
            operations += 1;
            let d = weight[e] + dist[dag.edges[e].to];
            if d < dist[v] {
                dist[v] = d;
                choice[v] = e;
            }
        }
    }

    let mut v = dag.source();
    let mut index = 0u64;
    while v != sink {
        let e = choice[v];
        for &x in dag.out_edges(v) {
            if x == e {
                break;
            }
            index += dag.paths_to_sink[dag.edges[x].to];
        }
        v = dag.edges[e].to;
    }
    Ok(GraphDecode {
        class: index as usize,
        cost: base + dist[dag.source()],
        operations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_paths(dag: &CodingDag) -> u64 {
        let mut count = vec![0u64; dag.num_vertices()];
        count[0] = 1;
        for v in 0..dag.num_vertices() {
            for &e in dag.out_edges(v) {
                count[dag.edges()[e].to] += count[v];
            }
        }
        count[dag.sink()]
    }

    #[test]
    fn eight_paths_binary() {
        let dag = build_coding_dag(8, 2).unwrap();
        assert_eq!(count_paths(&dag), 8);
        assert_eq!(dag.num_edges(), 12);
        assert_eq!(dag.num_slices(), 3);
    }

    #[test]
    fn two_classes_are_parallel_edges() {
        let dag = build_coding_dag(2, 2).unwrap();
        assert_eq!(dag.num_edges(), 2);
        assert_eq!(dag.canonical_paths(), vec![vec![0], vec![1]]);
        let cb = dag_to_codebook(&dag).unwrap();
        assert_eq!(cb.row(0), &[1, -1]);
        assert_eq!(cb.row(1), &[-1, 1]);
    }

    #[test]
    fn thousand_classes() {
        let dag = build_coding_dag(1000, 2).unwrap();
        assert_eq!(count_paths(&dag), 1000);
        assert_eq!(dag.num_edges(), 42);
    }

    #[test]
    fn path_counts_for_many_sizes() {
        for b in [2, 3, 5] {
            for k in (2..=64).chain([1000]) {
                let dag = build_coding_dag(k, b).unwrap();
                assert_eq!(count_paths(&dag), k as u64, "K={k} b={b}");
                assert!(dag.out_edges(0).len() <= b);
            }
        }
    }

    #[test]
    fn every_edge_on_some_path() {
        for (k, b) in [(7, 2), (20, 3), (100, 5)] {
            let dag = build_coding_dag(k, b).unwrap();
            let mut used = vec![false; dag.num_edges()];
            for p in dag.canonical_paths() {
                for e in p {
                    used[e] = true;
                }
            }
            assert!(used.iter().all(|&u| u), "K={k} b={b}");
        }
    }

    #[test]
    fn codebook_rows_are_paths() {
        let dag = build_coding_dag(8, 2).unwrap();
        let cb = dag_to_codebook(&dag).unwrap();
        let paths = dag.canonical_paths();
        assert_eq!(cb.rows(), 8);
        for (k, p) in paths.iter().enumerate() {
            let plus = cb.row(k).iter().filter(|&&b| b > 0).count();
            assert_eq!(plus, p.len());
            // +1 bits chain from source to sink.
            let mut v = dag.source();
            let mut remaining: Vec<usize> = (0..cb.cols()).filter(|&j| cb.get(k, j) > 0).collect();
            while v != dag.sink() {
                let pos = remaining
                    .iter()
                    .position(|&e| dag.edges()[e].from == v)
                    .expect("path continues");
                v = dag.edges()[remaining.remove(pos)].to;
            }
            assert!(remaining.is_empty());
        }
    }

    #[test]
    fn canonical_order_shares_prefixes() {
        let dag = build_coding_dag(8, 2).unwrap();
        let paths = dag.canonical_paths();
        let shared: Vec<usize> = paths
            .windows(2)
            .map(|w| w[0].iter().filter(|e| w[1].contains(e)).count())
            .collect();
        // Siblings share two edges, cousins the first edge, and the two
        // halves of the trellis nothing.
        assert_eq!(shared, vec![2, 1, 2, 0, 2, 1, 2]);
        for (i, p) in paths.iter().enumerate() {
            assert_eq!(dag.path_index(p).unwrap(), i);
        }
    }

    #[test]
    fn reversed_edge_ids_reverse_enumeration() {
        let dag = build_coding_dag(12, 3).unwrap();
        let l = dag.num_edges();
        let reversed_edges: Vec<Edge> = dag.edges().iter().rev().copied().collect();
        let rev = CodingDag::from_edges(12, 3, dag.num_slices(), reversed_edges).unwrap();
        let to_vertices = |d: &CodingDag, p: &CodePath| -> Vec<usize> {
            p.iter().map(|&e| d.edges()[e].to).collect()
        };
        let forward: Vec<_> = dag.canonical_paths().iter().map(|p| to_vertices(&dag, p)).collect();
        let mut backward: Vec<_> = rev.canonical_paths().iter().map(|p| to_vertices(&rev, p)).collect();
        backward.reverse();
        assert_eq!(forward, backward);
        assert_eq!(rev.num_edges(), l);
    }

    #[test]
    fn text_round_trip() {
        let dag = build_coding_dag(37, 3).unwrap();
        assert_eq!(CodingDag::parse(&dag.to_text()).unwrap(), dag);
    }

    #[test]
    fn rejects_wrong_path_count() {
        let dag = build_coding_dag(8, 2).unwrap();
        let mut text = dag.to_text();
        text.replace_range(0..1, "9");
        assert!(CodingDag::parse(&text).is_err());
    }

    #[test]
    fn equal_losses_pick_first_path() {
        let dag = build_coding_dag(30, 3).unwrap();
        let losses = vec![(0.7, 0.7); dag.num_edges()];
        assert_eq!(dag_soft_decode(&dag, &losses).unwrap(), 0);
    }

    #[test]
    fn decisive_path_wins() {
        let dag = build_coding_dag(20, 2).unwrap();
        let paths = dag.canonical_paths();
        for target in [0, 7, 19] {
            let mut losses = vec![(10.0, 0.0); dag.num_edges()];
            for &e in &paths[target] {
                losses[e] = (0.0, 10.0);
            }
            assert_eq!(dag_soft_decode(&dag, &losses).unwrap(), target);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let dag = build_coding_dag(4, 2).unwrap();
        let mut losses = vec![(1.0, 0.0); dag.num_edges()];
        losses[1].0 = f64::NAN;
        assert!(dag_soft_decode(&dag, &losses).is_err());
        assert!(dag_soft_decode(&dag, &losses[1..]).is_err());
    }

    #[test]
    fn decode_work_is_linear_in_edges() {
        let dag = build_coding_dag(1000, 2).unwrap();
        let losses: Vec<(f64, f64)> = (0..dag.num_edges()).map(|e| (e as f64 * 0.1, 1.0)).collect();
        let d = dag_soft_decode_detailed(&dag, &losses).unwrap();
        assert_eq!(d.operations, 2 * dag.num_edges());
        assert!(d.operations < 1000);
    }
}
