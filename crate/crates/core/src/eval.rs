//! Embedding evaluation: linear probing, fairness-oriented classification
//! metrics, embedding density, and the two-Gaussian quadratic-discriminant
//! error model used to reason about variance gaps between communities.
//!
//! The QDA error has two independent routes: a closed form built on the
//! Gaussian CDF, and a sharded Monte Carlo estimator that classifies raw
//! samples by likelihood. They are kept separate so each can check the
//! other.

use crate::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Per-class train/test split: each class contributes exactly
/// `per_class_train` training nodes (chosen by seeded shuffle) and must keep
/// at least one test node.
pub fn train_test_split_per_class(
    labels: &[usize],
    per_class_train: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if per_class_train == 0 {
        return Err(Error::InvalidParameter(
            "per-class train count must be positive".into(),
        ));
    }
    let k = crate::graph::num_classes(labels);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..k {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&u| labels[u] == c).collect();
        if members.len() < per_class_train + 1 {
            return Err(Error::DegenerateClass(c));
        }
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::stream(seed, "split", c as u64);
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..per_class_train]);
        test.extend_from_slice(&members[per_class_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub steps: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            steps: 500,
            lr: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Multinomial logistic classifier over embeddings.
#[derive(Debug, Clone)]
pub struct ProbeModel {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Trains the probe by full-batch gradient descent on softmax cross-entropy
/// with L2 on the weights (not the bias).
pub fn train_probe(
    z: &ArrayView2<f64>,
    labels: &[usize],
    train_idx: &[usize],
    config: &ProbeConfig,
) -> Result<ProbeModel> {
    if z.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {} labels",
            z.nrows(),
            labels.len()
        )));
    }
    if train_idx.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    for &u in train_idx {
        if u >= z.nrows() {
            return Err(Error::NodeOutOfRange { id: u, n: z.nrows() });
        }
    }
    let k = crate::graph::num_classes(labels);
    let d = z.ncols();
    let n = train_idx.len();
    let xt = {
        let mut xt = Array2::zeros((n, d));
        for (row, &u) in train_idx.iter().enumerate() {
            xt.row_mut(row).assign(&z.row(u));
        }
        xt
    };
    let yt: Vec<usize> = train_idx.iter().map(|&u| labels[u]).collect();

    use rand::Rng;
    let mut rng = crate::rng::stream(config.seed, "probe-init", 0);
    let mut w = Array2::from_shape_fn((d, k), |_| (rng.random::<f64>() * 2.0 - 1.0) * 0.01);
    let mut b = Array1::from_shape_fn(k, |_| (rng.random::<f64>() * 2.0 - 1.0) * 0.01);

    for _ in 0..config.steps {
        let mut p = xt.dot(&w);
        for mut row in p.rows_mut() {
            row += &b;
        }
        softmax_rows(&mut p);
        for (row, &label) in yt.iter().enumerate() {
            p[[row, label]] -= 1.0;
        }
        let scale = 1.0 / n as f64;
        let mut gw = xt.t().dot(&p);
        gw.mapv_inplace(|v| v * scale);
        gw.scaled_add(config.l2, &w);
        let gb = p.sum_axis(ndarray::Axis(0)) * scale;
        w.scaled_add(-config.lr, &gw);
        b.scaled_add(-config.lr, &gb);
    }
    Ok(ProbeModel { w, b })
}

/// Argmax class per row; ties resolve to the smaller class index.
pub fn predict(model: &ProbeModel, z: &ArrayView2<f64>) -> Vec<usize> {
    let mut logits = z.dot(&model.w);
    for mut row in logits.rows_mut() {
        row += &model.b;
    }
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_v = row[0];
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best = c;
                    best_v = v;
                }
            }
            best
        })
        .collect()
}

/// Classification quality with per-class detail. Classes absent from the
/// ground truth are excluded from recall-based aggregates and listed in
/// `excluded_classes`.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    /// Recall per class; `None` when the class has no true samples.
    pub per_class_recall: Vec<Option<f64>>,
    /// Largest minus smallest per-class recall.
    pub recall_gap: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub confusion: Vec<Vec<usize>>,
    pub excluded_classes: Vec<usize>,
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[t][p] += 1;
    }
    m
}

pub fn classification_metrics(y_true: &[usize], y_pred: &[usize]) -> Result<ClassificationReport> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let k = crate::graph::num_classes(y_true).max(crate::graph::num_classes(y_pred));
    let confusion = confusion_matrix(y_true, y_pred, k);
    let s = y_true.len() as f64;
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let accuracy = correct as f64 / s;

    let true_counts: Vec<usize> = (0..k).map(|c| confusion[c].iter().sum()).collect();
    let pred_counts: Vec<usize> = (0..k).map(|c| (0..k).map(|t| confusion[t][c]).sum()).collect();

    let mut per_class_recall = Vec::with_capacity(k);
    let mut excluded = Vec::new();
    let mut f1_sum = 0.0;
    let mut f1_count = 0usize;
    for c in 0..k {
        if true_counts[c] == 0 {
            per_class_recall.push(None);
            excluded.push(c);
            continue;
        }
        let recall = confusion[c][c] as f64 / true_counts[c] as f64;
        per_class_recall.push(Some(recall));
        let f1_denom = (pred_counts[c] + true_counts[c]) as f64;
        let f1 = if f1_denom > 0.0 {
            2.0 * confusion[c][c] as f64 / f1_denom
        } else {
            0.0
        };
        f1_sum += f1;
        f1_count += 1;
    }
    let macro_f1 = if f1_count > 0 {
        f1_sum / f1_count as f64
    } else {
        0.0
    };
    let recalls: Vec<f64> = per_class_recall.iter().flatten().copied().collect();
    let recall_gap = match (
        recalls.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        recalls.iter().copied().fold(f64::INFINITY, f64::min),
    ) {
        (max, min) if max >= min => max - min,
        _ => 0.0,
    };

    let sum_tp: f64 = (0..k).map(|c| true_counts[c] as f64 * pred_counts[c] as f64).sum();
    let sum_t2: f64 = true_counts.iter().map(|&t| (t as f64) * (t as f64)).sum();
    let sum_p2: f64 = pred_counts.iter().map(|&p| (p as f64) * (p as f64)).sum();
    let denom = ((s * s - sum_p2) * (s * s - sum_t2)).sqrt();
    let mcc = if denom > 0.0 {
        (correct as f64 * s - sum_tp) / denom
    } else {
        0.0
    };

    Ok(ClassificationReport {
        accuracy,
        per_class_recall,
        recall_gap,
        macro_f1,
        mcc,
        confusion,
        excluded_classes: excluded,
    })
}

/// Embedding density per class: the mean distance (not squared) from the
/// class centroid, with the across-class average and sample standard
/// deviation.
#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub per_class: Vec<f64>,
    pub ave: f64,
    pub std: f64,
}

pub fn density_report(z: &ArrayView2<f64>, labels: &[usize]) -> Result<DensityReport> {
    if z.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {} labels",
            z.nrows(),
            labels.len()
        )));
    }
    let k = crate::graph::num_classes(labels);
    let d = z.ncols();
    let mut counts = vec![0usize; k];
    let mut centroids = vec![vec![0.0; d]; k];
    for (row, &l) in z.rows().into_iter().zip(labels) {
        counts[l] += 1;
        for j in 0..d {
            centroids[l][j] += row[j];
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::DegenerateClass(c));
        }
        for v in &mut centroids[c] {
            *v /= count as f64;
        }
    }
    let mut per_class = vec![0.0; k];
    for (row, &l) in z.rows().into_iter().zip(labels) {
        let sq: f64 = row
            .iter()
            .zip(&centroids[l])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        per_class[l] += sq.sqrt();
    }
    for (c, &count) in counts.iter().enumerate() {
        per_class[c] /= count as f64;
    }
    let ave = per_class.iter().sum::<f64>() / k as f64;
    let std = if k >= 2 {
        let var = per_class.iter().map(|v| (v - ave) * (v - ave)).sum::<f64>() / (k as f64 - 1.0);
        var.sqrt()
    } else {
        0.0
    };
    Ok(DensityReport {
        per_class,
        ave,
        std,
    })
}

/// Exact misclassification rates of the likelihood-ratio rule for two
/// zero-mean Gaussians with distinct variances and equal priors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QdaErrors {
    /// Error rate of the smaller-variance class... of class 1 as given.
    pub p1: f64,
    pub p2: f64,
    /// max(p1, p2) / min(p1, p2).
    pub kappa: f64,
    /// Decision threshold |x| = t separating the classes.
    pub threshold: f64,
}

/// Closed-form error rates from class variances `var1`, `var2`. The class
/// with smaller variance claims the inner region |x| < t. Equal variances
/// have no threshold; use the Monte Carlo route for that degenerate case.
pub fn qda_error_closed_form(var1: f64, var2: f64) -> Result<QdaErrors> {
    for (name, v) in [("var1", var1), ("var2", var2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if var1 == var2 {
        return Err(Error::InvalidParameter(
            "equal variances make the likelihood rule degenerate; use the Monte Carlo estimator"
                .into(),
        ));
    }
    let (lo, hi, swapped) = if var1 < var2 {
        (var1, var2, false)
    } else {
        (var2, var1, true)
    };
    let (s_lo, s_hi) = (lo.sqrt(), hi.sqrt());
    let t = (2.0 * lo * hi * (s_hi / s_lo).ln() / (hi - lo)).sqrt();
    // Inner class misclassified outside |x| ≤ t, outer class inside.
    let p_lo = 2.0 * phi(-t / s_lo);
    let p_hi = 2.0 * phi(t / s_hi) - 1.0;
    let (p1, p2) = if swapped { (p_hi, p_lo) } else { (p_lo, p_hi) };
    let kappa = p1.max(p2) / p1.min(p2);
    Ok(QdaErrors {
        p1,
        p2,
        kappa,
        threshold: t,
    })
}

/// Monte Carlo QDA error estimate with binomial standard errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QdaMcEstimate {
    pub p1: f64,
    pub p2: f64,
    pub kappa: f64,
    pub se1: f64,
    pub se2: f64,
    pub samples_per_class: usize,
}

const MC_SHARDS: u64 = 16;

/// Estimates the error rates by classifying `samples_per_class` draws per
/// class with the exact likelihood rule (ties go to class 1). Work is split
/// over 16 fixed logical shards with independent derived streams and
/// reduced in shard order, so the result is identical for any thread count.
pub fn qda_error_monte_carlo(
    var1: f64,
    var2: f64,
    samples_per_class: usize,
    seed: u64,
) -> Result<QdaMcEstimate> {
    qda_error_monte_carlo_with_threads(var1, var2, samples_per_class, seed, crate::max_threads())
}

#[derive(Default, Clone, Copy)]
struct ShardCounts {
    errors1: usize,
    errors2: usize,
    n1: usize,
    n2: usize,
}

pub fn qda_error_monte_carlo_with_threads(
    var1: f64,
    var2: f64,
    samples_per_class: usize,
    seed: u64,
    threads: usize,
) -> Result<QdaMcEstimate> {
    for (name, v) in [("var1", var1), ("var2", var2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if samples_per_class == 0 {
        return Err(Error::InvalidParameter(
            "samples_per_class must be positive".into(),
        ));
    }
    let shards = MC_SHARDS as usize;
    let threads = threads.clamp(1, shards);
    let base = samples_per_class / shards;
    let rem = samples_per_class % shards;
    let shard_n = |s: usize| base + usize::from(s < rem);

    let run_shard = |s: usize| -> ShardCounts {
        use rand_distr::Distribution;
        let mut rng = crate::rng::stream(seed, "qda-mc", s as u64);
        let n = shard_n(s);
        let normal1 = rand_distr::Normal::new(0.0, var1.sqrt()).expect("validated");
        let normal2 = rand_distr::Normal::new(0.0, var2.sqrt()).expect("validated");
        // Higher log-likelihood wins: −½ln σ² − x²/(2σ²); ties to class 1.
        let classify = |x: f64| -> usize {
            let ll1 = -0.5 * var1.ln() - x * x / (2.0 * var1);
            let ll2 = -0.5 * var2.ln() - x * x / (2.0 * var2);
            usize::from(ll2 > ll1)
        };
        let mut counts = ShardCounts {
            n1: n,
            n2: n,
            ..Default::default()
        };
        for _ in 0..n {
            if classify(normal1.sample(&mut rng)) != 0 {
                counts.errors1 += 1;
            }
        }
        for _ in 0..n {
            if classify(normal2.sample(&mut rng)) != 1 {
                counts.errors2 += 1;
            }
        }
        counts
    };

    let mut slots: Vec<ShardCounts> = vec![ShardCounts::default(); shards];
    if threads == 1 {
        for (s, slot) in slots.iter_mut().enumerate() {
            *slot = run_shard(s);
        }
    } else {
        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let run_shard = &run_shard;
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        let mut s = w;
                        while s < shards {
                            out.push((s, run_shard(s)));
                            s += threads;
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("shard worker panicked"))
                .collect::<Vec<_>>()
        });
        for (s, counts) in results {
            slots[s] = counts;
        }
    }

    let mut total = ShardCounts::default();
    for c in &slots {
        total.errors1 += c.errors1;
        total.errors2 += c.errors2;
        total.n1 += c.n1;
        total.n2 += c.n2;
    }
    let p1 = total.errors1 as f64 / total.n1 as f64;
    let p2 = total.errors2 as f64 / total.n2 as f64;
    let se = |p: f64, n: usize| (p * (1.0 - p) / n as f64).sqrt();
    let kappa = if p1.min(p2) > 0.0 {
        p1.max(p2) / p1.min(p2)
    } else {
        f64::INFINITY
    };
    Ok(QdaMcEstimate {
        p1,
        p2,
        kappa,
        se1: se(p1, total.n1),
        se2: se(p2, total.n2),
        samples_per_class,
    })
}
