//! Random graph coarsening by edge contraction.
//!
//! Each round draws edges without replacement with probability proportional
//! to ω(u,v) = 1/(d_u + d_v) (self-loop-free weighted degrees, computed once
//! up front) and merges the endpoint clusters when their combined size stays
//! below the cap δ. The surviving clusters define a partition matrix P; the
//! coarse graph is W′ = P^T A P with internal-edge mass on the diagonal, and
//! coarse features are degree-weighted member means X′ = D̃′^{-1} P^T D̃ X.

use crate::graph::{FeatureMatrix, Graph};
use crate::{Error, Result};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;

/// Node-to-cluster assignment with contiguous cluster ids `0..num_clusters`,
/// numbered by smallest member node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assign: Vec<usize>,
    pub num_clusters: usize,
    pub sizes: Vec<usize>,
}

impl Partition {
    /// Identity partition (every node its own cluster).
    pub fn identity(n: usize) -> Partition {
        Partition {
            assign: (0..n).collect(),
            num_clusters: n,
            sizes: vec![1; n],
        }
    }

    /// Builds a partition from raw cluster labels, renumbering them to
    /// contiguous ids in order of smallest member.
    pub fn from_assignment(raw: &[usize]) -> Partition {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut assign = Vec::with_capacity(raw.len());
        for &c in raw {
            let next = remap.len();
            let id = *remap.entry(c).or_insert(next);
            assign.push(id);
        }
        let num_clusters = remap.len();
        let mut sizes = vec![0usize; num_clusters];
        for &c in &assign {
            sizes[c] += 1;
        }
        Partition {
            assign,
            num_clusters,
            sizes,
        }
    }

    pub fn n(&self) -> usize {
        self.assign.len()
    }
}

/// Coarse graph together with the aggregated self-loop-augmented degrees
/// d̃′_i = Σ_{u ∈ S_i} d̃_u (these equal the coarse graph's own d̃ and are
/// what all coarse-side normalization uses).
#[derive(Debug, Clone)]
pub struct CoarsenedGraph {
    pub graph: Graph,
    pub agg_degrees: Vec<f64>,
}

/// Contraction weights ω(u,v) = 1/(d_u + d_v) over unique off-diagonal
/// edges, with d the self-loop-free weighted degree.
pub fn merge_weights(graph: &Graph) -> Vec<(usize, usize, f64)> {
    let diag = graph.diagonal();
    let d: Vec<f64> = graph
        .degrees()
        .iter()
        .zip(&diag)
        .map(|(deg, dg)| deg - dg)
        .collect();
    graph
        .undirected_edges()
        .into_iter()
        .map(|(u, v, _)| {
            let s = d[u] + d[v];
            let w = if s > 0.0 { 1.0 / s } else { 0.0 };
            (u, v, w)
        })
        .collect()
}

/// Fenwick tree over item weights supporting O(log n) prefix search, used
/// for sequential weighted sampling without replacement.
struct Fenwick {
    tree: Vec<f64>,
    len: usize,
}

impl Fenwick {
    fn new(weights: &[f64]) -> Fenwick {
        let len = weights.len();
        let mut tree = vec![0.0; len + 1];
        for (i, &w) in weights.iter().enumerate() {
            let idx = i + 1;
            tree[idx] += w;
            let parent = idx + (idx & idx.wrapping_neg());
            if parent <= len {
                tree[parent] += tree[idx];
            }
        }
        Fenwick { tree, len }
    }

    fn total(&self) -> f64 {
        let mut idx = self.len;
        let mut sum = 0.0;
        while idx > 0 {
            sum += self.tree[idx];
            idx -= idx & idx.wrapping_neg();
        }
        sum
    }

    fn add(&mut self, i: usize, delta: f64) {
        let mut idx = i + 1;
        while idx <= self.len {
            self.tree[idx] += delta;
            idx += idx & idx.wrapping_neg();
        }
    }

    /// Index of the item containing cumulative mass `target` (0-based).
    fn search(&self, mut target: f64) -> usize {
        let mut pos = 0usize;
        let mut step = self.len.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= self.len && self.tree[next] < target {
                target -= self.tree[next];
                pos = next;
            }
            step /= 2;
        }
        pos.min(self.len.saturating_sub(1))
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the clusters of `a` and `b` if combined size stays below
    /// `cap`; the smaller root id survives. Returns whether a merge happened.
    fn union_capped(&mut self, a: usize, b: usize, cap: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb || self.size[ra] + self.size[rb] >= cap {
            return false;
        }
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        self.size[keep] += self.size[drop];
        true
    }
}

/// One coarsening round: draws ⌊r·n⌋ edges (capped at the edge count)
/// without replacement by ω weight and contracts them under the size cap δ.
pub fn random_coarsen<R: Rng>(
    graph: &Graph,
    r: f64,
    delta: usize,
    rng: &mut R,
) -> Result<(Partition, CoarsenedGraph)> {
    if !r.is_finite() || !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "contraction rate r = {r} outside [0, 1]"
        )));
    }
    if delta < 1 {
        return Err(Error::InvalidParameter(
            "cluster size cap delta must be at least 1".into(),
        ));
    }
    let n = graph.n();
    let edges = merge_weights(graph);
    let m = edges.len();
    let requested = (r * n as f64).floor() as usize;
    let draws = requested.min(m);

    let weights: Vec<f64> = edges.iter().map(|&(_, _, w)| w).collect();
    let mut fenwick = Fenwick::new(&weights);
    let mut live = weights.clone();
    let mut uf = UnionFind::new(n);
    for _ in 0..draws {
        let total = fenwick.total();
        if total <= 0.0 {
            break;
        }
        let mut idx = fenwick.search(rng.random::<f64>() * total);
        if live[idx] == 0.0 {
            // Numerical residue selected a removed edge; take the next live
            // one deterministically.
            idx = (0..m)
                .map(|k| (idx + k) % m)
                .find(|&k| live[k] > 0.0)
                .expect("positive total implies a live edge");
        }
        let (u, v, _) = edges[idx];
        fenwick.add(idx, -live[idx]);
        live[idx] = 0.0;
        uf.union_capped(u, v, delta);
    }

    let mut roots = vec![0usize; n];
    for u in 0..n {
        roots[u] = uf.find(u);
    }
    let partition = Partition::from_assignment(&roots);
    let coarse = contract(graph, &partition)?;
    Ok((partition, coarse))
}

/// W′ = P^T A P as a graph: off-diagonal entries are cross-cluster edge
/// mass, the diagonal is twice the internal edge mass, and cluster sizes
/// become the self-loop mass so d̃′ aggregates member d̃ exactly.
pub fn contract(graph: &Graph, partition: &Partition) -> Result<CoarsenedGraph> {
    if partition.assign.len() != graph.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition over {} nodes for a graph with {}",
            partition.assign.len(),
            graph.n()
        )));
    }
    let np = partition.num_clusters;
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (u, v, w) in graph.undirected_edges() {
        let (cu, cv) = (partition.assign[u], partition.assign[v]);
        if cu == cv {
            *acc.entry((cu, cu)).or_insert(0.0) += 2.0 * w;
        } else {
            let key = (cu.min(cv), cu.max(cv));
            *acc.entry(key).or_insert(0.0) += w;
        }
    }
    for (u, dg) in graph.diagonal().into_iter().enumerate() {
        if dg != 0.0 {
            let c = partition.assign[u];
            *acc.entry((c, c)).or_insert(0.0) += dg;
        }
    }
    let entries: Vec<(usize, usize, f64)> = acc.into_iter().map(|((u, v), w)| (u, v, w)).collect();
    let loop_mass: Vec<f64> = partition.sizes.iter().map(|&s| s as f64).collect();
    let coarse = Graph::from_weighted_edges(np, &entries, Some(&loop_mass))?;
    let agg_degrees = coarse.d_tilde().to_vec();
    Ok(CoarsenedGraph {
        graph: coarse,
        agg_degrees,
    })
}

/// Coarse features X′ = D̃′^{-1} P^T D̃ X (d̃-weighted member means).
pub fn coarsen_features(
    original: &Graph,
    partition: &Partition,
    coarse: &CoarsenedGraph,
    x: &ArrayView2<f64>,
) -> Result<FeatureMatrix> {
    if x.nrows() != original.n() || partition.assign.len() != original.n() {
        return Err(Error::DimensionMismatch(format!(
            "features {}x{} with partition over {} for a graph with {} nodes",
            x.nrows(),
            x.ncols(),
            partition.assign.len(),
            original.n()
        )));
    }
    let d = x.ncols();
    let d_tilde = original.d_tilde();
    let mut out = Array2::zeros((partition.num_clusters, d));
    for u in 0..original.n() {
        let c = partition.assign[u];
        let w = d_tilde[u];
        let row = x.row(u);
        for j in 0..d {
            out[[c, j]] += w * row[j];
        }
    }
    for c in 0..partition.num_clusters {
        let inv = 1.0 / coarse.agg_degrees[c];
        for j in 0..d {
            out[[c, j]] *= inv;
        }
    }
    Ok(out)
}

/// Fraction of node pairs sharing a cluster, per class pair. Entry (a, a)
/// is over unordered within-class pairs, entry (a, b) over the n_a·n_b
/// cross pairs. Every class needs at least 2 members.
pub fn partition_stats(partition: &Partition, labels: &[usize]) -> Result<Array2<f64>> {
    if labels.len() != partition.assign.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a partition over {} nodes",
            labels.len(),
            partition.assign.len()
        )));
    }
    let k = crate::graph::num_classes(labels);
    let mut class_counts = vec![0usize; k];
    for &l in labels {
        class_counts[l] += 1;
    }
    for (c, &count) in class_counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::DegenerateClass(c));
        }
    }
    // members[cluster][class]
    let mut members = vec![vec![0usize; k]; partition.num_clusters];
    for (u, &c) in partition.assign.iter().enumerate() {
        members[c][labels[u]] += 1;
    }
    let mut same: Array2<f64> = Array2::zeros((k, k));
    for row in &members {
        for a in 0..k {
            same[[a, a]] += (row[a] * row[a].saturating_sub(1) / 2) as f64;
            for b in (a + 1)..k {
                let cross = (row[a] * row[b]) as f64;
                same[[a, b]] += cross;
                same[[b, a]] += cross;
            }
        }
    }
    let mut q = Array2::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let pairs = if a == b {
                (class_counts[a] * (class_counts[a] - 1) / 2) as f64
            } else {
                (class_counts[a] * class_counts[b]) as f64
            };
            q[[a, b]] = same[[a, b]] / pairs;
        }
    }
    Ok(q)
}

/// Report from [`uniform_partition_check`]: the exact within-cluster identity
/// gap and the same-cluster pair rates under uniform equal-size partitions.
#[derive(Debug, Clone, Serialize)]
pub struct UniformPartitionReport {
    /// max over trials and clusters of |s·Σ‖z_u − z̄‖² − Σ_pairs ‖z_u − z_v‖²|.
    pub identity_max_gap: f64,
    /// Mean same-cluster pair rate per class over trials.
    pub same_cluster_rates: Vec<f64>,
    /// Analytic rate (s − 1)/(n − 1) for a uniform partition.
    pub expected_rate: f64,
    pub trials: usize,
}

/// Draws `trials` uniform partitions into clusters of exactly `s` nodes
/// (shuffle and chop; requires s | n) and checks, per cluster, the identity
/// between s times the centroid scatter and the pairwise squared distances,
/// alongside the per-class same-cluster rates.
pub fn uniform_partition_check(
    z: &ArrayView2<f64>,
    labels: &[usize],
    s: usize,
    trials: usize,
    seed: u64,
) -> Result<UniformPartitionReport> {
    let n = z.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            n
        )));
    }
    if s < 2 || n % s != 0 {
        return Err(Error::InvalidParameter(format!(
            "cluster size {s} must be ≥ 2 and divide n = {n}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let k = crate::graph::num_classes(labels);
    let d = z.ncols();
    let mut identity_max_gap: f64 = 0.0;
    let mut rate_sums = vec![0.0; k];
    for trial in 0..trials {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = crate::rng::stream(seed, "uniform-partition", trial as u64);
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut raw = vec![0usize; n];
        for (pos, &u) in order.iter().enumerate() {
            raw[u] = pos / s;
        }
        let partition = Partition::from_assignment(&raw);
        for chunk in order.chunks(s) {
            let mut centroid = vec![0.0; d];
            for &u in chunk {
                for j in 0..d {
                    centroid[j] += z[[u, j]];
                }
            }
            for v in &mut centroid {
                *v /= s as f64;
            }
            let scatter: f64 = chunk
                .iter()
                .map(|&u| {
                    (0..d)
                        .map(|j| (z[[u, j]] - centroid[j]).powi(2))
                        .sum::<f64>()
                })
                .sum();
            let mut pairwise = 0.0;
            for (i, &u) in chunk.iter().enumerate() {
                for &v in &chunk[i + 1..] {
                    pairwise += (0..d).map(|j| (z[[u, j]] - z[[v, j]]).powi(2)).sum::<f64>();
                }
            }
            identity_max_gap = identity_max_gap.max((s as f64 * scatter - pairwise).abs());
        }
        let q = partition_stats(&partition, labels)?;
        for c in 0..k {
            rate_sums[c] += q[[c, c]];
        }
    }
    Ok(UniformPartitionReport {
        identity_max_gap,
        same_cluster_rates: rate_sums.iter().map(|v| v / trials as f64).collect(),
        expected_rate: (s as f64 - 1.0) / (n as f64 - 1.0),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use ndarray::array;

    fn p3() -> Graph {
        build_graph(&[(0, 1), (1, 2)], 3).unwrap().0
    }

    #[test]
    fn merge_weights_path() {
        let w = merge_weights(&p3());
        assert_eq!(w.len(), 2);
        for (_, _, omega) in w {
            assert!((omega - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn merge_weights_triangle_and_star() {
        let k3 = build_graph(&[(0, 1), (0, 2), (1, 2)], 3).unwrap().0;
        for (_, _, omega) in merge_weights(&k3) {
            assert!((omega - 0.25).abs() < 1e-15);
        }
        let star = build_graph(&[(0, 1), (0, 2), (0, 3)], 4).unwrap().0;
        for (_, _, omega) in merge_weights(&star) {
            assert!((omega - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn contract_path_merge() {
        let g = p3();
        let partition = Partition::from_assignment(&[0, 0, 1]);
        let coarse = contract(&g, &partition).unwrap();
        let cg = &coarse.graph;
        assert_eq!(cg.n(), 2);
        assert_eq!(cg.diagonal(), vec![2.0, 0.0]);
        assert_eq!(cg.degrees(), &[3.0, 1.0]);
        assert_eq!(coarse.agg_degrees, vec![5.0, 2.0]);
        let (cols, ws) = cg.neighbors(0);
        assert_eq!(cols, &[0, 1]);
        assert_eq!(ws, &[2.0, 1.0]);
    }

    #[test]
    fn coarse_features_are_weighted_means() {
        let g = p3();
        let partition = Partition::from_assignment(&[0, 0, 1]);
        let coarse = contract(&g, &partition).unwrap();
        let x = array![[10.0, 1.0], [5.0, 2.0], [7.0, 3.0]];
        let xp = coarsen_features(&g, &partition, &coarse, &x.view()).unwrap();
        // d̃ = [2, 3, 2]: cluster 0 is (2·x0 + 3·x1)/5, cluster 1 is x2.
        assert!((xp[[0, 0]] - 7.0).abs() < 1e-15);
        assert!((xp[[0, 1]] - 8.0 / 5.0).abs() < 1e-15);
        assert!((xp[[1, 0]] - 7.0).abs() < 1e-15);
        assert!((xp[[1, 1]] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_is_identity() {
        let g = crate::graph::random_test_graph(30, 0.2, 11);
        let mut rng = crate::rng::stream(11, "coarsen", 0);
        let (p, coarse) = random_coarsen(&g, 0.0, 10, &mut rng).unwrap();
        assert_eq!(p, Partition::identity(30));
        assert_eq!(coarse.graph.num_edges(), g.num_edges());
        assert_eq!(coarse.agg_degrees, g.d_tilde());
    }

    #[test]
    fn delta_one_blocks_all_merges() {
        let g = crate::graph::random_test_graph(30, 0.2, 12);
        let mut rng = crate::rng::stream(12, "coarsen", 0);
        let (p, _) = random_coarsen(&g, 0.9, 1, &mut rng).unwrap();
        assert_eq!(p.num_clusters, 30);
    }

    #[test]
    fn mass_and_degree_conservation() {
        let g = crate::graph::random_test_graph(60, 0.15, 13);
        let n = g.n() as f64;
        let two_m = g.total_weight();
        for trial in 0..5u64 {
            let mut rng = crate::rng::stream(13, "coarsen", trial);
            let (p, coarse) = random_coarsen(&g, 0.5, 10, &mut rng).unwrap();
            assert!((coarse.graph.total_weight() - two_m).abs() < 1e-9);
            let agg_sum: f64 = coarse.agg_degrees.iter().sum();
            assert!((agg_sum - (two_m + n)).abs() < 1e-9);
            assert!(p.sizes.iter().all(|&s| s <= 9));
            assert_eq!(p.sizes.iter().sum::<usize>(), 60);
        }
    }

    #[test]
    fn same_seed_same_partition() {
        let g = crate::graph::random_test_graph(50, 0.2, 14);
        let mut r1 = crate::rng::stream(99, "coarsen", 0);
        let mut r2 = crate::rng::stream(99, "coarsen", 0);
        let (p1, _) = random_coarsen(&g, 0.5, 10, &mut r1).unwrap();
        let (p2, _) = random_coarsen(&g, 0.5, 10, &mut r2).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn full_rate_caps_at_edge_count() {
        let g = build_graph(&[(0, 1), (2, 3)], 6).unwrap().0;
        let mut rng = crate::rng::stream(1, "coarsen", 0);
        let (p, _) = random_coarsen(&g, 1.0, 10, &mut rng).unwrap();
        assert_eq!(p.num_clusters, 4);
        assert_eq!(p.assign[0], p.assign[1]);
        assert_eq!(p.assign[2], p.assign[3]);
    }

    #[test]
    fn cluster_ids_numbered_by_smallest_member() {
        let p = Partition::from_assignment(&[7, 7, 3, 3, 9]);
        assert_eq!(p.assign, vec![0, 0, 1, 1, 2]);
        assert_eq!(p.sizes, vec![2, 2, 1]);
    }

    #[test]
    fn partition_stats_hand_case() {
        let p = Partition::from_assignment(&[0, 0, 0, 1]);
        let q = partition_stats(&p, &[0, 0, 1, 1]).unwrap();
        assert_eq!(q[[0, 0]], 1.0);
        assert_eq!(q[[1, 1]], 0.0);
        assert_eq!(q[[0, 1]], 0.5);
        assert_eq!(q[[1, 0]], 0.5);
    }

    #[test]
    fn partition_stats_rejects_singleton_class() {
        let p = Partition::identity(3);
        assert!(matches!(
            partition_stats(&p, &[0, 0, 1]).unwrap_err(),
            Error::DegenerateClass(1)
        ));
    }

    #[test]
    fn uniform_partition_identity_and_rate() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, "identity-z", 0);
        let z = Array2::from_shape_fn((20, 3), |_| rng.random::<f64>() * 4.0 - 2.0);
        let labels: Vec<usize> = (0..20).map(|u| usize::from(u >= 10)).collect();
        let report = uniform_partition_check(&z.view(), &labels, 4, 200, 5).unwrap();
        assert!(report.identity_max_gap < 1e-10, "gap {}", report.identity_max_gap);
        assert!((report.expected_rate - 3.0 / 19.0).abs() < 1e-15);
        for rate in &report.same_cluster_rates {
            assert!(
                (rate - report.expected_rate).abs() < 0.05,
                "rate {rate} vs expected {}",
                report.expected_rate
            );
        }
    }

    #[test]
    fn uniform_partition_requires_divisible_size() {
        let z = Array2::zeros((10, 2));
        let labels = vec![0; 10];
        assert!(uniform_partition_check(&z.view(), &labels, 3, 5, 1).is_err());
        assert!(uniform_partition_check(&z.view(), &labels, 1, 5, 1).is_err());
    }

    #[test]
    fn dense_block_contracts_more_within_itself() {
        let params = crate::csbm::CsbmParams {
            n: 100,
            p1: 0.5,
            p2: 0.1,
            q: 0.01,
            mu1: vec![1.0],
            mu2: vec![-1.0],
            sigma: 1.0,
            seed: 21,
            enforce_ordering: true,
        };
        let (g, _, labels) = crate::csbm::sample_csbm(&params).unwrap();
        let mut q11 = 0.0;
        let mut q12 = 0.0;
        for trial in 0..20u64 {
            let mut rng = crate::rng::stream(100, "coarsen", trial);
            let (p, _) = random_coarsen(&g, 0.5, 10, &mut rng).unwrap();
            let q = partition_stats(&p, &labels).unwrap();
            q11 += q[[0, 0]];
            q12 += q[[0, 1]];
        }
        assert!(
            q11 > q12,
            "within-class rate {q11} should exceed cross-class {q12}"
        );
    }
}
