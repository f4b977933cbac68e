//! Contextual stochastic block model sampler with two communities.
//!
//! Nodes `0..n/2` form block 1 and the rest block 2. Within-block edges
//! appear with probability `p1` (block 1) or `p2` (block 2); cross-block
//! edges with probability `q`. Features are isotropic Gaussians around a
//! per-class mean. Edge and feature randomness come from separate derived
//! streams, so the same seed yields the same graph regardless of feature
//! dimension.

use crate::graph::{build_graph, FeatureMatrix, Graph, Labels};
use crate::rng::stream;
use serde::Serialize;
use crate::{Error, Result};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Serialize)]
pub struct CsbmParams {
    pub n: usize,
    pub p1: f64,
    pub p2: f64,
    pub q: f64,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    /// Require p1 > p2 > q (the dense/sparse community layout every
    /// downstream bias diagnostic assumes).
    pub enforce_ordering: bool,
}

impl CsbmParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "n must be even and ≥ 2, got {}",
                self.n
            )));
        }
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("q", self.q)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {p} outside [0, 1]"
                )));
            }
        }
        if self.mu1.len() != self.mu2.len() || self.mu1.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "class means must share a positive dimension, got {} and {}",
                self.mu1.len(),
                self.mu2.len()
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.enforce_ordering && !(self.p1 > self.p2 && self.p2 > self.q) {
            return Err(Error::InvalidParameter(format!(
                "require p1 > p2 > q, got p1 = {}, p2 = {}, q = {}",
                self.p1, self.p2, self.q
            )));
        }
        Ok(())
    }
}

/// Samples a graph, features, and labels (0 for block 1, 1 for block 2).
pub fn sample_csbm(params: &CsbmParams) -> Result<(Graph, FeatureMatrix, Labels)> {
    params.validate()?;
    let n = params.n;
    let half = n / 2;

    let mut edge_rng = stream(params.seed, "csbm-edges", 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if u < half && v < half {
                params.p1
            } else if u >= half && v >= half {
                params.p2
            } else {
                params.q
            };
            if edge_rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let (graph, _) = build_graph(&edges, n)?;

    let d = params.mu1.len();
    let mut feat_rng = stream(params.seed, "csbm-features", 0);
    let normal = Normal::new(0.0, params.sigma).expect("sigma validated positive");
    let mut x = Array2::zeros((n, d));
    for u in 0..n {
        let mu = if u < half { &params.mu1 } else { &params.mu2 };
        for j in 0..d {
            x[[u, j]] = mu[j] + normal.sample(&mut feat_rng);
        }
    }

    let labels: Labels = (0..n).map(|u| usize::from(u >= half)).collect();
    Ok((graph, x, labels))
}

/// Mean squared distance from the class centroid, per class. Rows of `z` are
/// grouped by `labels`; a class with no members is an error.
pub fn embedding_variance_by_class(
    z: &ndarray::ArrayView2<f64>,
    labels: &[usize],
) -> Result<Vec<f64>> {
    if z.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {} labels",
            z.nrows(),
            labels.len()
        )));
    }
    let c = crate::graph::num_classes(labels);
    let d = z.ncols();
    let mut counts = vec![0usize; c];
    let mut centroids = vec![vec![0.0; d]; c];
    for (row, &l) in z.rows().into_iter().zip(labels) {
        counts[l] += 1;
        for j in 0..d {
            centroids[l][j] += row[j];
        }
    }
    for (l, count) in counts.iter().enumerate() {
        if *count == 0 {
            return Err(Error::DegenerateClass(l));
        }
        for v in &mut centroids[l] {
            *v /= *count as f64;
        }
    }
    let mut out = vec![0.0; c];
    for (row, &l) in z.rows().into_iter().zip(labels) {
        let sq: f64 = row
            .iter()
            .zip(&centroids[l])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        out[l] += sq;
    }
    for (l, count) in counts.iter().enumerate() {
        out[l] /= *count as f64;
    }
    Ok(out)
}
