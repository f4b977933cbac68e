//! Sparse undirected graphs, normalized propagation operators, dataset I/O.
//!
//! A [`Graph`] stores its adjacency in CSR form with `f64` weights; simple
//! graphs have weight 1 everywhere and no diagonal entries, while supernode
//! graphs produced by coarsening carry arbitrary non-negative weights and may
//! store internal-edge mass on the diagonal. Self-loops used by the
//! propagation operators are never stored: each node carries a self-loop mass
//! `d̃ − d` that [`normalize`] adds on the fly, so the operators act as
//! `D̃^{-1/2} Ã D̃^{-1/2}` (symmetric) or `D̃^{-1} Ã` (random walk) with
//! `Ã = A + S`, `S = diag(self-loop mass)`.

use crate::{Error, Result};
use ndarray::{Array2, ArrayView2, Axis};
use serde::Serialize;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

pub type FeatureMatrix = Array2<f64>;
pub type EmbeddingMatrix = Array2<f64>;
pub type Labels = Vec<usize>;

/// Undirected weighted graph in CSR form.
///
/// `degrees[i]` is the weighted row sum of the adjacency (including a stored
/// diagonal entry once); `d_tilde[i]` additionally includes the node's
/// self-loop mass (1 for simple graphs, cluster size for supernode graphs).
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    d_tilde: Vec<f64>,
}

/// Construction metadata for [`build_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildMeta {
    /// Number of duplicate input edges that were collapsed.
    pub duplicates: usize,
}

/// Builds a simple unweighted graph from an undirected edge list.
/// Duplicate edges are collapsed (counted in the returned metadata);
/// self-loops in the input are rejected.
pub fn build_graph(edges: &[(usize, usize)], n: usize) -> Result<(Graph, BuildMeta)> {
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    let mut unique = Vec::with_capacity(edges.len());
    let mut duplicates = 0;
    for &(u, v) in edges {
        if u >= n {
            return Err(Error::NodeOutOfRange { id: u, n });
        }
        if v >= n {
            return Err(Error::NodeOutOfRange { id: v, n });
        }
        if u == v {
            return Err(Error::InvalidParameter(format!(
                "self-loop ({u},{u}) in input; self-loops are added by normalization only"
            )));
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            unique.push((key.0, key.1, 1.0));
        } else {
            duplicates += 1;
        }
    }
    let graph = Graph::from_weighted_edges(n, &unique, None)?;
    Ok((graph, BuildMeta { duplicates }))
}

impl Graph {
    /// Builds a weighted graph from unique undirected entries `(u, v, w)` with
    /// `u ≤ v`; `u == v` stores a diagonal entry. `self_loop_mass` defaults to
    /// 1 per node (simple-graph convention).
    pub fn from_weighted_edges(
        n: usize,
        entries: &[(usize, usize, f64)],
        self_loop_mass: Option<&[f64]>,
    ) -> Result<Graph> {
        if let Some(mass) = self_loop_mass {
            if mass.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "self-loop mass has length {} for n = {n}",
                    mass.len()
                )));
            }
        }
        let mut counts = vec![0usize; n];
        for &(u, v, w) in entries {
            if u >= n {
                return Err(Error::NodeOutOfRange { id: u, n });
            }
            if v >= n {
                return Err(Error::NodeOutOfRange { id: v, n });
            }
            if u > v {
                return Err(Error::InvalidParameter(format!(
                    "entry ({u},{v}) not in canonical u ≤ v order"
                )));
            }
            if !(w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "negative or non-finite weight {w} on edge ({u},{v})"
                )));
            }
            counts[u] += 1;
            if u != v {
                counts[v] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut cursor = row_ptr[..n].to_vec();
        // Entries are sorted by (u, v); inserting (u,v) then (v,u) in this
        // order leaves every CSR row sorted by column.
        for &(u, v, w) in entries {
            col_idx[cursor[u]] = v;
            weights[cursor[u]] = w;
            cursor[u] += 1;
        }
        for &(u, v, w) in entries {
            if u != v {
                col_idx[cursor[v]] = u;
                weights[cursor[v]] = w;
                cursor[v] += 1;
            }
        }
        for i in 0..n {
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            debug_assert!(row.windows(2).all(|p| p[0] < p[1]) || row.windows(2).all(|p| p[0] != p[1]));
        }
        let mut degrees = vec![0.0; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                degrees[i] += weights[k];
            }
        }
        let d_tilde = match self_loop_mass {
            Some(mass) => degrees.iter().zip(mass).map(|(d, m)| d + m).collect(),
            None => degrees.iter().map(|d| d + 1.0).collect(),
        };
        Ok(Graph {
            n,
            row_ptr,
            col_idx,
            weights,
            degrees,
            d_tilde,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored undirected off-diagonal edges.
    pub fn num_edges(&self) -> usize {
        let diag = self.diagonal().iter().filter(|&&d| d != 0.0).count();
        (self.col_idx.len() - diag) / 2
    }

    /// Weighted degrees d (row sums of the adjacency, diagonal included once).
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Self-loop-augmented degrees d̃.
    pub fn d_tilde(&self) -> &[f64] {
        &self.d_tilde
    }

    /// Full adjacency-matrix sum Σ_ij A_ij (off-diagonal weights twice,
    /// diagonal once); equals 2m for simple graphs.
    pub fn total_weight(&self) -> f64 {
        self.degrees.iter().sum()
    }

    /// Neighbors of `u` as parallel (column, weight) slices.
    pub fn neighbors(&self, u: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[u];
        let hi = self.row_ptr[u + 1];
        (&self.col_idx[lo..hi], &self.weights[lo..hi])
    }

    /// Stored diagonal entries (0 where absent).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.n];
        for u in 0..self.n {
            let (cols, ws) = self.neighbors(u);
            for (c, w) in cols.iter().zip(ws) {
                if *c == u {
                    diag[u] = *w;
                }
            }
        }
        diag
    }

    /// Unique undirected off-diagonal edges as (u, v, w) with u < v, in
    /// CSR row order.
    pub fn undirected_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.col_idx.len() / 2);
        for u in 0..self.n {
            let (cols, ws) = self.neighbors(u);
            for (&v, &w) in cols.iter().zip(ws) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// Dense adjacency including self-loop mass on the diagonal (Ã).
    pub fn dense_a_tilde(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for u in 0..self.n {
            let (cols, ws) = self.neighbors(u);
            for (&v, &w) in cols.iter().zip(ws) {
                a[[u, v]] += w;
            }
            a[[u, u]] += self.d_tilde[u] - self.degrees[u];
        }
        a
    }

    /// Component id per node (0-based, in discovery order from node 0).
    pub fn connected_components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                let (cols, _) = self.neighbors(u);
                for &v in cols {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.connected_components().iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormKind {
    Symmetric,
    RandomWalk,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" | "sym" => Ok(NormKind::Symmetric),
            "random_walk" | "rw" => Ok(NormKind::RandomWalk),
            other => Err(Error::InvalidParameter(format!(
                "unknown normalization kind '{other}' (expected symmetric | random_walk)"
            ))),
        }
    }
}

/// One-step propagation operator Â over a graph.
///
/// `Symmetric` applies `D̃^{-1/2} Ã D̃^{-1/2}`, `RandomWalk` applies
/// `D̃^{-1} Ã`. Both share the spectrum (similar matrices).
pub struct PropagationOperator<'g> {
    graph: &'g Graph,
    kind: NormKind,
    inv_sqrt: Vec<f64>,
    inv: Vec<f64>,
}

/// Builds the propagation operator for a graph. Every `d̃` entry is positive
/// by construction (self-loop mass ≥ 1 on all our graph constructions).
pub fn normalize(graph: &Graph, kind: NormKind) -> PropagationOperator<'_> {
    assert!(
        graph.d_tilde.iter().all(|&d| d > 0.0),
        "zero d̃ entry; self-loop mass must be positive"
    );
    let inv_sqrt = graph.d_tilde.iter().map(|d| 1.0 / d.sqrt()).collect();
    let inv = graph.d_tilde.iter().map(|d| 1.0 / d).collect();
    PropagationOperator {
        graph,
        kind,
        inv_sqrt,
        inv,
    }
}

impl<'g> PropagationOperator<'g> {
    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n
    }

    /// y = Ã x for one column block, with the self-loop mass applied on the
    /// fly. Deterministic row-major evaluation.
    fn apply_a_tilde(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let g = self.graph;
        let d = x.ncols();
        let mut y = Array2::zeros((g.n, d));
        for u in 0..g.n {
            let loop_mass = g.d_tilde[u] - g.degrees[u];
            let mut row = y.row_mut(u);
            let xu = x.row(u);
            for j in 0..d {
                row[j] = loop_mass * xu[j];
            }
            let (cols, ws) = g.neighbors(u);
            for (&v, &w) in cols.iter().zip(ws) {
                let xv = x.row(v);
                for j in 0..d {
                    row[j] += w * xv[j];
                }
            }
        }
        y
    }

    /// One application of Â.
    pub fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.graph.n, "row count must match node count");
        match self.kind {
            NormKind::Symmetric => {
                let mut t = x.to_owned();
                for (mut row, s) in t.axis_iter_mut(Axis(0)).zip(&self.inv_sqrt) {
                    row.map_inplace(|v| *v *= s);
                }
                let mut y = self.apply_a_tilde(&t.view());
                for (mut row, s) in y.axis_iter_mut(Axis(0)).zip(&self.inv_sqrt) {
                    row.map_inplace(|v| *v *= s);
                }
                y
            }
            NormKind::RandomWalk => {
                let mut y = self.apply_a_tilde(x);
                for (mut row, s) in y.axis_iter_mut(Axis(0)).zip(&self.inv) {
                    row.map_inplace(|v| *v *= s);
                }
                y
            }
        }
    }

    /// One application of Â^T (the symmetric kind is self-adjoint; the
    /// random-walk transpose is Ã D̃^{-1}).
    pub fn apply_transpose(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        match self.kind {
            NormKind::Symmetric => self.apply(x),
            NormKind::RandomWalk => {
                let mut t = x.to_owned();
                for (mut row, s) in t.axis_iter_mut(Axis(0)).zip(&self.inv) {
                    row.map_inplace(|v| *v *= s);
                }
                self.apply_a_tilde(&t.view())
            }
        }
    }

    /// Â acting on a single vector.
    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let col = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("shape");
        self.apply(&col.view()).column(0).to_vec()
    }

    /// Unit eigenvector of the symmetric operator at eigenvalue 1:
    /// u ∝ sqrt(d̃). For connected graphs this spans the dominant eigenspace.
    pub fn dominant_unit_vector(&self) -> Vec<f64> {
        let mut u: Vec<f64> = self.graph.d_tilde.iter().map(|d| d.sqrt()).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut u {
            *v /= norm;
        }
        u
    }

    /// Dense matrix of the operator (diagnostic / oracle use).
    pub fn dense(&self) -> Array2<f64> {
        let mut a = self.graph.dense_a_tilde();
        match self.kind {
            NormKind::Symmetric => {
                for i in 0..self.graph.n {
                    for j in 0..self.graph.n {
                        a[[i, j]] *= self.inv_sqrt[i] * self.inv_sqrt[j];
                    }
                }
            }
            NormKind::RandomWalk => {
                for i in 0..self.graph.n {
                    for j in 0..self.graph.n {
                        a[[i, j]] *= self.inv[i];
                    }
                }
            }
        }
        a
    }
}

/// Â^k X by k successive sparse products; Â^k is never materialized.
pub fn propagate(op: &PropagationOperator, x: &ArrayView2<f64>, k: usize) -> Array2<f64> {
    assert_eq!(x.nrows(), op.graph.n, "row count must match node count");
    let mut y = x.to_owned();
    for _ in 0..k {
        y = op.apply(&y.view());
    }
    y
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads a dataset bundle. `n` is inferred from the feature row count; edges
/// referencing nodes ≥ n and feature/label length mismatches are errors with
/// the offending line number.
pub fn load_dataset(
    edge_path: &Path,
    feature_path: &Path,
    label_path: &Path,
) -> Result<(Graph, FeatureMatrix, Labels)> {
    let (graph, features) = load_graph_features(edge_path, feature_path)?;
    let n = features.nrows();
    let labels = read_labels(label_path)?;
    if labels.len() != n {
        return Err(parse_err(
            label_path,
            labels.len().min(n) + 1,
            format!("{} labels for {} feature rows", labels.len(), n),
        ));
    }
    Ok((graph, features, labels))
}

/// Edge list plus features; node count comes from the feature rows.
pub fn load_graph_features(
    edge_path: &Path,
    feature_path: &Path,
) -> Result<(Graph, FeatureMatrix)> {
    let features = read_features(feature_path)?;
    let edges = read_edges(edge_path, features.nrows())?;
    let graph = graph_from_entries(features.nrows(), &edges)?;
    Ok((graph, features))
}

/// Builds a graph from raw `(u, v, w)` entries in any order, collapsing
/// duplicates (first weight wins).
pub fn graph_from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Result<Graph> {
    let mut sorted: Vec<(usize, usize, f64)> = entries
        .iter()
        .map(|&(u, v, w)| (u.min(v), u.max(v), w))
        .collect();
    sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    sorted.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    Graph::from_weighted_edges(n, &sorted, None)
}

pub fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut edges = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let u: usize = it
            .next()
            .unwrap()
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad node id"))?;
        let v: usize = it
            .next()
            .ok_or_else(|| parse_err(path, line_no, "missing second endpoint"))?
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad node id"))?;
        let w: f64 = match it.next() {
            Some(tok) => tok
                .parse()
                .map_err(|_| parse_err(path, line_no, "bad edge weight"))?,
            None => 1.0,
        };
        if it.next().is_some() {
            return Err(parse_err(path, line_no, "trailing tokens"));
        }
        if u >= n || v >= n {
            return Err(parse_err(
                path,
                line_no,
                format!("edge ({u},{v}) references a node ≥ n = {n}"),
            ));
        }
        edges.push((u, v, w));
    }
    Ok(edges)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| parse_err(path, line_no, "bad feature value"))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("{} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty feature file"));
    }
    let d = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / d;
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| parse_err(path, 1, format!("feature shape: {e}")))
}

pub fn read_labels(path: &Path) -> Result<Labels> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let l: usize = trimmed
            .parse()
            .map_err(|_| parse_err(path, idx + 1, "bad label"))?;
        labels.push(l);
    }
    Ok(labels)
}

/// Number of classes implied by a label vector.
pub fn num_classes(labels: &[usize]) -> usize {
    labels.iter().copied().max().map_or(0, |m| m + 1)
}

/// Writes the edge file format ("u v" or "u v w" per line). Weights are
/// omitted when they are all exactly 1.
pub fn write_edge_file(graph: &Graph, path: &Path) -> Result<()> {
    let edges = graph.undirected_edges();
    let simple = edges.iter().all(|&(_, _, w)| w == 1.0) && graph.diagonal().iter().all(|&d| d == 0.0);
    let mut out = String::new();
    for (u, v, w) in edges {
        if simple {
            writeln!(out, "{u} {v}").unwrap();
        } else {
            writeln!(out, "{u} {v} {}", fmt_f64(w)).unwrap();
        }
    }
    if !simple {
        for (u, d) in graph.diagonal().iter().enumerate() {
            if *d != 0.0 {
                writeln!(out, "{u} {u} {}", fmt_f64(*d)).unwrap();
            }
        }
    }
    write_text(path, &out)
}

pub fn write_feature_file(x: &ArrayView2<f64>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in x.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt_f64(*v));
            first = false;
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_label_file(labels: &[usize], path: &Path) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        writeln!(out, "{l}").unwrap();
    }
    write_text(path, &out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// 17-significant-digit decimal form used across all numeric text output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Erdős–Rényi helper shared by tests across modules.
#[cfg(test)]
pub(crate) fn random_test_graph(n: usize, p: f64, seed: u64) -> Graph {
    use rand::Rng;
    let mut rng = crate::rng::stream(seed, "test-graph", 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    build_graph(&edges, n).unwrap().0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn p3() -> Graph {
        build_graph(&[(0, 1), (1, 2)], 3).unwrap().0
    }

    fn k3() -> Graph {
        build_graph(&[(0, 1), (0, 2), (1, 2)], 3).unwrap().0
    }

    #[test]
    fn p3_degrees() {
        let g = p3();
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        assert_eq!(g.d_tilde(), &[2.0, 3.0, 2.0]);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn isolated_node() {
        let (g, _) = build_graph(&[], 1).unwrap();
        assert_eq!(g.degrees(), &[0.0]);
        let op = normalize(&g, NormKind::RandomWalk);
        assert_eq!(op.apply_vec(&[3.0]), vec![3.0]);
    }

    #[test]
    fn k3_degrees() {
        let g = k3();
        assert_eq!(g.degrees(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn duplicate_edges_collapse_with_flag() {
        let (g, meta) = build_graph(&[(0, 1), (1, 0), (0, 1)], 2).unwrap();
        assert_eq!(meta.duplicates, 2);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn out_of_range_and_self_loop_rejected() {
        assert!(build_graph(&[(0, 5)], 3).is_err());
        assert!(build_graph(&[(1, 1)], 3).is_err());
    }

    #[test]
    fn k3_random_walk_rows_uniform() {
        let g = k3();
        let op = normalize(&g, NormKind::RandomWalk);
        let dense = op.dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((dense[[i, j]] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn p3_random_walk_rows() {
        let g = p3();
        let op = normalize(&g, NormKind::RandomWalk);
        let dense = op.dense();
        let expect = [
            [0.5, 0.5, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.0, 0.5, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((dense[[i, j]] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn propagate_matches_hand_computation() {
        let g = p3();
        let op = normalize(&g, NormKind::RandomWalk);
        let x = array![[1.0], [0.0], [0.0]];
        let y = propagate(&op, &x.view(), 1);
        assert!((y[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((y[[1, 0]] - 1.0 / 3.0).abs() < 1e-15);
        assert!(y[[2, 0]].abs() < 1e-15);
        let y0 = propagate(&op, &x.view(), 0);
        assert_eq!(y0, x);
    }

    #[test]
    fn k3_one_step_is_column_mean() {
        let g = k3();
        let op = normalize(&g, NormKind::RandomWalk);
        let x = array![[1.0, 2.0], [3.0, 5.0], [5.0, 8.0]];
        let y = propagate(&op, &x.view(), 1);
        for i in 0..3 {
            assert!((y[[i, 0]] - 3.0).abs() < 1e-12);
            assert!((y[[i, 1]] - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_walk_rows_stochastic() {
        let g = random_test_graph(37, 0.15, 5);
        let op = normalize(&g, NormKind::RandomWalk);
        let ones = Array2::ones((g.n(), 1));
        let y = op.apply(&ones.view());
        for v in y.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_operator_is_self_adjoint() {
        let g = random_test_graph(23, 0.2, 9);
        let op = normalize(&g, NormKind::Symmetric);
        let mut rng = crate::rng::stream(9, "sym-test", 0);
        use rand::Rng;
        let x: Vec<f64> = (0..g.n()).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = (0..g.n()).map(|_| rng.random::<f64>() - 0.5).collect();
        let ax = op.apply_vec(&x);
        let ay = op.apply_vec(&y);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn transpose_is_adjoint_for_random_walk() {
        let g = random_test_graph(19, 0.25, 3);
        let op = normalize(&g, NormKind::RandomWalk);
        use rand::Rng;
        let mut rng = crate::rng::stream(3, "rw-adj", 0);
        let x = Array2::from_shape_fn((g.n(), 2), |_| rng.random::<f64>() - 0.5);
        let y = Array2::from_shape_fn((g.n(), 2), |_| rng.random::<f64>() - 0.5);
        let ax = op.apply(&x.view());
        let aty = op.apply_transpose(&y.view());
        let lhs: f64 = ax.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(aty.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn propagate_power_splits_exactly() {
        let g = random_test_graph(17, 0.3, 4);
        let op = normalize(&g, NormKind::Symmetric);
        use rand::Rng;
        let mut rng = crate::rng::stream(4, "split", 0);
        let x = Array2::from_shape_fn((g.n(), 3), |_| rng.random::<f64>());
        let whole = propagate(&op, &x.view(), 5);
        let part = propagate(&op, &propagate(&op, &x.view(), 2).view(), 3);
        assert_eq!(whole, part);
    }

    #[test]
    fn dataset_roundtrip() {
        let dir = std::env::temp_dir().join(format!("rgccl-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let e = dir.join("edges.txt");
        let f = dir.join("features.csv");
        let l = dir.join("labels.txt");
        write_text(&e, "0 1\n1 2\n").unwrap();
        write_text(&f, "1.0,0.0\n0.0,1.0\n1.0,1.0\n").unwrap();
        write_text(&l, "0\n0\n1\n").unwrap();
        let (g, x, labels) = load_dataset(&e, &f, &l).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        assert_eq!(x.nrows(), 3);
        assert_eq!(labels, vec![0, 0, 1]);
        write_edge_file(&g, &e).unwrap();
        let (g2, _, _) = load_dataset(&e, &f, &l).unwrap();
        assert_eq!(g2.num_edges(), 2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_edge_file_gives_isolated_nodes() {
        let dir = std::env::temp_dir().join(format!("rgccl-io2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let e = dir.join("edges.txt");
        let f = dir.join("features.csv");
        let l = dir.join("labels.txt");
        write_text(&e, "").unwrap();
        write_text(&f, "1.0\n2.0\n").unwrap();
        write_text(&l, "0\n1\n").unwrap();
        let (g, _, _) = load_dataset(&e, &f, &l).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 0);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn edge_beyond_n_reports_line() {
        let dir = std::env::temp_dir().join(format!("rgccl-io3-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let e = dir.join("edges.txt");
        let f = dir.join("features.csv");
        let l = dir.join("labels.txt");
        write_text(&e, "0 1\n0 5\n").unwrap();
        write_text(&f, "1.0\n2.0\n3.0\n").unwrap();
        write_text(&l, "0\n1\n0\n").unwrap();
        let err = load_dataset(&e, &f, &l).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "missing line number: {msg}");
        std::fs::remove_dir_all(&dir).ok();
    }

}
