//! Contrastive objective over an original/coarse embedding pair.
//!
//! The loss couples two reciprocal terms. Alignment: β / Tr(Zᵀ Z′), where Z
//! embeds the original nodes and Z′ lifts the coarse embeddings back to
//! nodes; a larger trace means the views agree, so minimizing the reciprocal
//! pulls them together. Separation: α / Σ_{(i,j)} n_i n_j ‖h_i − h_j‖² over
//! a sampled set of supernode pairs weighted by cluster sizes; pushing
//! supernodes apart grows the sum and shrinks the term. Non-positive
//! denominators are clamped to a small guard with zero gradient, and the
//! clamp is reported so training traces expose it.

use crate::{Error, Result};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use std::collections::HashSet;

/// Denominator guard; a term whose denominator falls at or below this is
/// frozen at value coefficient/EPS_GUARD with zero gradient.
pub const EPS_GUARD: f64 = 1e-8;

/// Unordered distinct supernode pairs used by the separation term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativePairSet {
    pub pairs: Vec<(usize, usize)>,
}

impl NegativePairSet {
    /// Samples `count` distinct unordered pairs uniformly by rejection,
    /// capped at the number of available pairs. The result is sorted, so a
    /// given sampled set is order-deterministic.
    pub fn sample_uniform<R: Rng>(n_super: usize, count: usize, rng: &mut R) -> NegativePairSet {
        let total = n_super.saturating_mul(n_super.saturating_sub(1)) / 2;
        if count >= total {
            let mut pairs = Vec::with_capacity(total);
            for i in 0..n_super {
                for j in (i + 1)..n_super {
                    pairs.push((i, j));
                }
            }
            return NegativePairSet { pairs };
        }
        let mut set = HashSet::with_capacity(count * 2);
        while set.len() < count {
            let i = rng.random_range(0..n_super);
            let j = rng.random_range(0..n_super);
            if i != j {
                set.insert((i.min(j), i.max(j)));
            }
        }
        let mut pairs: Vec<(usize, usize)> = set.into_iter().collect();
        pairs.sort_unstable();
        NegativePairSet { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Loss values and the raw denominators behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub positive: f64,
    pub negative: f64,
    /// Tr(Zᵀ Z′) before clamping.
    pub alignment_trace: f64,
    /// Σ n_i n_j ‖h_i − h_j‖² before clamping.
    pub separation_sum: f64,
    pub pos_clamped: bool,
    pub neg_clamped: bool,
}

/// Gradients with respect to each embedding argument.
#[derive(Debug, Clone)]
pub struct LossGrads {
    pub z: Array2<f64>,
    pub z_prime: Array2<f64>,
    pub h: Array2<f64>,
}

/// Full objective with analytic gradients. `z` and `z_prime` are n×d over
/// original nodes, `h` is n′×d over supernodes with `sizes` their member
/// counts; `pairs` indexes into `h`.
pub fn contrastive_loss(
    z: &ArrayView2<f64>,
    z_prime: &ArrayView2<f64>,
    h: &ArrayView2<f64>,
    sizes: &[usize],
    pairs: &NegativePairSet,
    alpha: f64,
    beta: f64,
) -> Result<(LossBreakdown, LossGrads)> {
    if z.raw_dim() != z_prime.raw_dim() {
        return Err(Error::DimensionMismatch(format!(
            "embedding views {}x{} vs {}x{}",
            z.nrows(),
            z.ncols(),
            z_prime.nrows(),
            z_prime.ncols()
        )));
    }
    if h.nrows() != sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} supernode rows for {} sizes",
            h.nrows(),
            sizes.len()
        )));
    }
    if h.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "embedding width {} vs supernode width {}",
            z.ncols(),
            h.ncols()
        )));
    }
    for &(i, j) in &pairs.pairs {
        if i >= h.nrows() || j >= h.nrows() {
            return Err(Error::NodeOutOfRange {
                id: i.max(j),
                n: h.nrows(),
            });
        }
    }
    for (name, c) in [("alpha", alpha), ("beta", beta)] {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and non-negative, got {c}"
            )));
        }
    }

    let trace: f64 = z.iter().zip(z_prime.iter()).map(|(a, b)| a * b).sum();
    let mut grad_z = Array2::zeros(z.raw_dim());
    let mut grad_zp = Array2::zeros(z.raw_dim());
    let (positive, pos_clamped) = if trace <= EPS_GUARD {
        (beta / EPS_GUARD, true)
    } else {
        let scale = -beta / (trace * trace);
        grad_z = z_prime.to_owned() * scale;
        grad_zp = z.to_owned() * scale;
        (beta / trace, false)
    };

    let d = h.ncols();
    let mut sep_sum = 0.0;
    for &(i, j) in &pairs.pairs {
        let w = (sizes[i] * sizes[j]) as f64;
        let sq: f64 = (0..d).map(|c| (h[[i, c]] - h[[j, c]]).powi(2)).sum();
        sep_sum += w * sq;
    }
    let mut grad_h = Array2::zeros(h.raw_dim());
    let (negative, neg_clamped) = if sep_sum <= EPS_GUARD {
        (alpha / EPS_GUARD, true)
    } else {
        let scale = -alpha / (sep_sum * sep_sum);
        for &(i, j) in &pairs.pairs {
            let w = (sizes[i] * sizes[j]) as f64;
            for c in 0..d {
                let diff = h[[i, c]] - h[[j, c]];
                grad_h[[i, c]] += scale * w * 2.0 * diff;
                grad_h[[j, c]] -= scale * w * 2.0 * diff;
            }
        }
        (alpha / sep_sum, false)
    };

    Ok((
        LossBreakdown {
            total: positive + negative,
            positive,
            negative,
            alignment_trace: trace,
            separation_sum: sep_sum,
            pos_clamped,
            neg_clamped,
        },
        LossGrads {
            z: grad_z,
            z_prime: grad_zp,
            h: grad_h,
        },
    ))
}
