//! Spectral diagnostics for propagation operators.
//!
//! All operators here share the spectrum of the symmetric form
//! `D̃^{-1/2} Ã D̃^{-1/2}`, which lies in [−1, 1] with a known unit
//! eigenvector `u ∝ sqrt(d̃)` at eigenvalue 1. Small problems use a dense
//! symmetric eigensolver; larger ones use deflated power iteration on
//! shifted operators whose spectra are non-negative, so the dominant
//! eigenvalue is signed unambiguously.

use crate::coarsen::{coarsen_features, CoarsenedGraph, Partition};
use serde::Serialize;
use crate::graph::{normalize, FeatureMatrix, Graph, NormKind, PropagationOperator};
use crate::{Error, Result};
use ndarray::ArrayView2;

/// Largest problem size handled by the dense eigensolver.
pub const DENSE_EIGEN_MAX: usize = 512;
const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 100_000;
const POWER_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Extreme eigenvalues of a propagation operator: the largest, the
/// second-largest (signed, counted with multiplicity), and the smallest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_min: f64,
}

/// Computes the spectral summary, choosing dense or iterative solver by
/// problem size.
pub fn spectral_summary(op: &PropagationOperator) -> Result<SpectralSummary> {
    if op.n() < 2 {
        return Err(Error::InvalidParameter(
            "spectral summary needs at least 2 nodes".into(),
        ));
    }
    if op.n() <= DENSE_EIGEN_MAX {
        dense_summary(op)
    } else {
        power_summary(op)
    }
}

/// Second-largest signed eigenvalue.
pub fn lambda2(op: &PropagationOperator) -> Result<f64> {
    Ok(spectral_summary(op)?.lambda2)
}

/// Dense route: full symmetric eigendecomposition of the similar symmetric
/// operator.
pub fn dense_summary(op: &PropagationOperator) -> Result<SpectralSummary> {
    if op.n() < 2 {
        return Err(Error::InvalidParameter(
            "spectral summary needs at least 2 nodes".into(),
        ));
    }
    let sym = normalize(op.graph(), NormKind::Symmetric);
    let dense = sym.dense();
    let n = op.n();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| dense[[i, j]]);
    let eig = m.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(SpectralSummary {
        lambda1: vals[0],
        lambda2: vals[1],
        lambda_min: vals[n - 1],
    })
}

/// Iterative route: λ2 from deflated power iteration on (M + I) restricted
/// to the complement of u (spectrum in [0, 2], dominant value 1 + λ2), and
/// λ_min from power iteration on I − M (dominant value 1 − λ_min).
pub fn power_summary(op: &PropagationOperator) -> Result<SpectralSummary> {
    if op.n() < 2 {
        return Err(Error::InvalidParameter(
            "spectral summary needs at least 2 nodes".into(),
        ));
    }
    let sym = normalize(op.graph(), NormKind::Symmetric);
    let u = sym.dominant_unit_vector();
    let n = op.n();

    let shifted_deflated = |v: &[f64]| {
        let mut w = sym.apply_vec(v);
        for i in 0..n {
            w[i] += v[i];
        }
        let dot: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        for i in 0..n {
            w[i] -= dot * u[i];
        }
        w
    };
    let theta2 = power_dominant(n, shifted_deflated, Some(&u), "power-lambda2")?;
    let lambda2 = theta2 - 1.0;

    let reflected = |v: &[f64]| {
        let w = sym.apply_vec(v);
        v.iter().zip(&w).map(|(a, b)| a - b).collect()
    };
    let theta_min = power_dominant(n, reflected, None, "power-lambda-min")?;
    let lambda_min = 1.0 - theta_min;

    Ok(SpectralSummary {
        lambda1: 1.0,
        lambda2,
        lambda_min,
    })
}

/// Power iteration with Rayleigh-quotient estimate and residual stopping
/// rule ‖Av − θv‖ ≤ tol. The operator must have a non-negative spectrum.
fn power_dominant(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    orthogonal_to: Option<&[f64]>,
    tag: &str,
) -> Result<f64> {
    use rand::Rng;
    let mut rng = crate::rng::stream(POWER_SEED, tag, 0);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    if let Some(u) = orthogonal_to {
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        for i in 0..n {
            v[i] -= dot * u[i];
        }
    }
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    if nv == 0.0 {
        return Err(Error::InvalidParameter(
            "power iteration started from the zero vector".into(),
        ));
    }
    for x in &mut v {
        *x /= nv;
    }
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        let w = apply(&v);
        theta = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - theta * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= POWER_TOL {
            return Ok(theta);
        }
        let nw = norm(&w);
        if nw == 0.0 {
            // The operator annihilates the iterate: dominant eigenvalue 0.
            return Ok(0.0);
        }
        v = w;
        for x in &mut v {
            *x /= nw;
        }
    }
    Err(Error::NoConvergence {
        estimate: theta,
        residual,
        iterations: POWER_MAX_ITERS,
    })
}

/// Frobenius distance from the span of the operator's dominant eigenvector:
/// ‖Z − u(u^T Z)‖_F with u ∝ sqrt(d̃), unit norm.
pub fn subspace_distance(op: &PropagationOperator, z: &ArrayView2<f64>) -> f64 {
    assert_eq!(z.nrows(), op.n(), "row count must match node count");
    let u = op.dominant_unit_vector();
    let d = z.ncols();
    let mut coeff = vec![0.0; d];
    for (i, ui) in u.iter().enumerate() {
        for j in 0..d {
            coeff[j] += ui * z[[i, j]];
        }
    }
    let mut sq = 0.0;
    for (i, ui) in u.iter().enumerate() {
        for j in 0..d {
            let r = z[[i, j]] - ui * coeff[j];
            sq += r * r;
        }
    }
    sq.sqrt()
}

/// Spectral summary of one community's induced subgraph.
#[derive(Debug, Clone, Serialize)]
pub struct CommunitySpectrum {
    pub class: usize,
    pub n: usize,
    pub lambda2: f64,
    pub lambda_min: f64,
    /// Set when the community has fewer than 2 nodes; λ values are 0.
    pub degenerate: bool,
    pub connected: bool,
}

/// λ2 of each class's induced subgraph (within-class edges only). Isolated
/// or single-node communities are reported as degenerate rather than an
/// error.
pub fn community_spectra(graph: &Graph, labels: &[usize]) -> Result<Vec<CommunitySpectrum>> {
    if labels.len() != graph.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a graph with {} nodes",
            labels.len(),
            graph.n()
        )));
    }
    let k = crate::graph::num_classes(labels);
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let nodes: Vec<usize> = (0..graph.n()).filter(|&u| labels[u] == c).collect();
        if nodes.len() < 2 {
            out.push(CommunitySpectrum {
                class: c,
                n: nodes.len(),
                lambda2: 0.0,
                lambda_min: 0.0,
                degenerate: true,
                connected: nodes.len() == 1,
            });
            continue;
        }
        let sub = induced_subgraph(graph, &nodes)?;
        let op = normalize(&sub, NormKind::Symmetric);
        let summary = spectral_summary(&op)?;
        out.push(CommunitySpectrum {
            class: c,
            n: nodes.len(),
            lambda2: summary.lambda2,
            lambda_min: summary.lambda_min,
            degenerate: false,
            connected: sub.is_connected(),
        });
    }
    Ok(out)
}

/// Subgraph induced by `nodes` (sorted, deduplicated by the caller's
/// construction); keeps edge weights, diagonal entries, and each node's
/// self-loop mass.
pub fn induced_subgraph(graph: &Graph, nodes: &[usize]) -> Result<Graph> {
    let mut index = vec![usize::MAX; graph.n()];
    for (new, &old) in nodes.iter().enumerate() {
        if old >= graph.n() {
            return Err(Error::NodeOutOfRange {
                id: old,
                n: graph.n(),
            });
        }
        index[old] = new;
    }
    let mut entries = Vec::new();
    for &u in nodes {
        let (cols, ws) = graph.neighbors(u);
        for (&v, &w) in cols.iter().zip(ws) {
            if index[v] != usize::MAX && u <= v {
                entries.push((index[u], index[v], w));
            }
        }
    }
    entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mass: Vec<f64> = nodes
        .iter()
        .map(|&u| graph.d_tilde()[u] - graph.degrees()[u])
        .collect();
    Graph::from_weighted_edges(nodes.len(), &entries, Some(&mass))
}

/// Result of the propagation-distance bound check between a graph and its
/// contraction.
#[derive(Debug, Clone, Serialize)]
pub struct PropagationBoundReport {
    /// max_u ‖(Â^k X)_u − (Â′^k X′)_{cluster(u)}‖₂.
    pub lhs_max: f64,
    /// √(d̃max/d̃min) · (n·λ2^k + n′·λ2′^k), degrees pooled over both graphs.
    pub rhs: f64,
    pub lambda2_original: f64,
    pub lambda2_coarse: f64,
    pub holds: bool,
}

/// Checks that k-step random-walk propagation on the original and coarse
/// graphs stays within the spectral bound. Rows of `x` should be
/// non-negative with norm at most 1 (see [`prepare_rows_nonneg_unit`]).
/// Both graphs must be connected.
pub fn propagation_bound_check(
    graph: &Graph,
    coarse: &CoarsenedGraph,
    partition: &Partition,
    x: &ArrayView2<f64>,
    k: usize,
) -> Result<PropagationBoundReport> {
    if !graph.is_connected() {
        return Err(Error::InvalidParameter(
            "propagation bound requires a connected graph".into(),
        ));
    }
    if !coarse.graph.is_connected() {
        return Err(Error::InvalidParameter(
            "propagation bound requires a connected coarse graph".into(),
        ));
    }
    let xp = coarsen_features(graph, partition, coarse, x)?;
    let op = normalize(graph, NormKind::RandomWalk);
    let op_c = normalize(&coarse.graph, NormKind::RandomWalk);
    let prop = crate::graph::propagate(&op, x, k);
    let prop_c = crate::graph::propagate(&op_c, &xp.view(), k);

    let mut lhs_max: f64 = 0.0;
    for u in 0..graph.n() {
        let c = partition.assign[u];
        let sq: f64 = (0..x.ncols())
            .map(|j| (prop[[u, j]] - prop_c[[c, j]]).powi(2))
            .sum();
        lhs_max = lhs_max.max(sq.sqrt());
    }

    let l2 = spectral_summary(&op)?.lambda2;
    let l2c = spectral_summary(&op_c)?.lambda2;
    let pooled = graph.d_tilde().iter().chain(coarse.agg_degrees.iter());
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for &d in pooled {
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let n = graph.n() as f64;
    let np = coarse.graph.n() as f64;
    let rhs = (dmax / dmin).sqrt() * (n * l2.powi(k as i32) + np * l2c.powi(k as i32));
    Ok(PropagationBoundReport {
        lhs_max,
        rhs,
        lambda2_original: l2,
        lambda2_coarse: l2c,
        holds: lhs_max <= rhs,
    })
}

/// Shifts a feature matrix to be entrywise non-negative and scales each row
/// to unit norm (zero rows stay zero). The propagation bound assumes inputs
/// in this form.
pub fn prepare_rows_nonneg_unit(x: &ArrayView2<f64>) -> FeatureMatrix {
    let mut out = x.to_owned();
    let min = out.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        out.map_inplace(|v| *v -= min);
    }
    for mut row in out.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.map_inplace(|v| *v /= norm);
        }
    }
    out
}
