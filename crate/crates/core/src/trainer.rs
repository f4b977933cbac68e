//! Training loop: per-epoch random coarsening, two-view encoding, and the
//! contrastive objective, optimized with Adam or plain gradient descent.
//!
//! Every epoch draws a fresh coarsening and a fresh negative-pair sample
//! from seeds derived as (master, "coarsen", epoch) and
//! (master, "neg-pairs", epoch), so a run is reproducible from its config
//! alone. The propagated input on the original graph never changes and is
//! computed once; the coarse side is recomputed per epoch.

use crate::coarsen::{coarsen_features, random_coarsen};
use crate::encoder::{
    backward, forward, init_params, lift, lift_transpose, propagated_input, Arch, EncoderConfig,
    ModelParams, ParamGrads,
};
use crate::graph::{normalize, Graph, NormKind};
use crate::loss::{contrastive_loss, NegativePairSet};
use crate::{Error, Result};
use ndarray::{Array2, ArrayView2};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptimizerKind {
    Adam,
    GradientDescent,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "gd" | "sgd" => Ok(OptimizerKind::GradientDescent),
            other => Err(Error::InvalidParameter(format!(
                "unknown optimizer '{other}' (expected adam | gd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub epochs: usize,
    pub lr: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Contraction rate: ⌊rate·n⌋ edge draws per epoch.
    pub rate: f64,
    /// Supernode size cap.
    pub delta: usize,
    /// Negative pairs per epoch; defaults to the epoch's supernode count.
    pub neg_pairs: Option<usize>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            encoder: EncoderConfig::default(),
            epochs: 25,
            lr: 0.01,
            alpha: 15_000.0,
            beta: 500.0,
            rate: 0.5,
            delta: 10,
            neg_pairs: None,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

/// Named hyperparameter presets for the common benchmark datasets.
pub fn preset(name: &str) -> Result<TrainConfig> {
    let sgc = |k: usize| EncoderConfig {
        arch: Arch::Sgc,
        k,
        norm_kind: NormKind::Symmetric,
        activation: crate::encoder::Activation::Identity,
        dim_out: 512,
        row_normalize_output: true,
    };
    let gcn2 = || EncoderConfig {
        arch: Arch::Gcn2 { hidden: 512 },
        k: 2,
        norm_kind: NormKind::Symmetric,
        activation: crate::encoder::Activation::Identity,
        dim_out: 512,
        row_normalize_output: true,
    };
    let base = TrainConfig::default();
    let config = match name {
        "cora" => TrainConfig {
            encoder: sgc(2),
            epochs: 25,
            lr: 0.01,
            alpha: 15_000.0,
            beta: 500.0,
            rate: 0.3,
            ..base
        },
        "citeseer" => TrainConfig {
            encoder: sgc(2),
            epochs: 200,
            lr: 0.0002,
            alpha: 15_000.0,
            beta: 500.0,
            rate: 0.5,
            ..base
        },
        "pubmed" => TrainConfig {
            encoder: sgc(2),
            epochs: 25,
            lr: 0.02,
            alpha: 20_000.0,
            beta: 200.0,
            rate: 0.5,
            ..base
        },
        "photo" => TrainConfig {
            encoder: gcn2(),
            epochs: 20,
            lr: 0.001,
            alpha: 1e5,
            beta: 1e5,
            rate: 0.7,
            ..base
        },
        "computers" => TrainConfig {
            encoder: gcn2(),
            epochs: 20,
            lr: 0.0002,
            alpha: 2e4,
            beta: 2e4,
            rate: 0.7,
            ..base
        },
        "arxiv" => TrainConfig {
            encoder: sgc(2),
            epochs: 10,
            lr: 0.0001,
            alpha: 2e6,
            beta: 2e5,
            rate: 0.7,
            ..base
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset '{other}' (expected cora | citeseer | pubmed | photo | computers | arxiv)"
            )))
        }
    };
    Ok(config)
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub positive: f64,
    pub negative: f64,
    pub n_super: usize,
    pub pos_clamped: bool,
    pub neg_clamped: bool,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    /// Set when an epoch produced a non-finite loss; the returned parameters
    /// are from before that epoch's update.
    pub aborted_nonfinite: bool,
}

struct Moments {
    m: Array2<f64>,
    v: Array2<f64>,
}

impl Moments {
    fn zeros(shape: (usize, usize)) -> Moments {
        Moments {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }
}

/// First-order optimizer over the encoder's layer matrices.
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    w1: Moments,
    w2: Option<Moments>,
    t: usize,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Optimizer {
        Optimizer {
            kind,
            lr,
            w1: Moments::zeros((params.w1.nrows(), params.w1.ncols())),
            w2: params
                .w2
                .as_ref()
                .map(|w| Moments::zeros((w.nrows(), w.ncols()))),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ParamGrads) {
        self.t += 1;
        match self.kind {
            OptimizerKind::GradientDescent => {
                params.w1.scaled_add(-self.lr, &grads.w1);
                if let (Some(w2), Some(g2)) = (params.w2.as_mut(), grads.w2.as_ref()) {
                    w2.scaled_add(-self.lr, g2);
                }
            }
            OptimizerKind::Adam => {
                let t = self.t as i32;
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                let update = |w: &mut Array2<f64>, g: &Array2<f64>, mo: &mut Moments, lr: f64| {
                    mo.m.zip_mut_with(g, |m, &gv| {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gv
                    });
                    mo.v.zip_mut_with(g, |v, &gv| {
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gv * gv
                    });
                    ndarray::Zip::from(w)
                        .and(&mo.m)
                        .and(&mo.v)
                        .for_each(|w, &m, &v| {
                            let m_hat = m / bc1;
                            let v_hat = v / bc2;
                            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                        });
                };
                update(&mut params.w1, &grads.w1, &mut self.w1, self.lr);
                if let (Some(w2), Some(g2), Some(mo2)) =
                    (params.w2.as_mut(), grads.w2.as_ref(), self.w2.as_mut())
                {
                    update(w2, g2, mo2, self.lr);
                }
            }
        }
    }
}

fn validate(config: &TrainConfig) -> Result<()> {
    if !config.lr.is_finite() || config.lr < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be finite and non-negative, got {}",
            config.lr
        )));
    }
    for (name, v) in [("alpha", config.alpha), ("beta", config.beta)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }
    Ok(())
}

/// Trains the encoder on one graph. Returns the parameters and a per-epoch
/// trace; `x` is the raw feature matrix.
pub fn train(graph: &Graph, x: &ArrayView2<f64>, config: &TrainConfig) -> Result<(ModelParams, TrainTrace)> {
    let params = init_params(&config.encoder, x.ncols(), config.seed)?;
    train_from(graph, x, config, params)
}

/// Training loop starting from given parameters (used for warm restarts).
pub fn train_from(
    graph: &Graph,
    x: &ArrayView2<f64>,
    config: &TrainConfig,
    mut params: ModelParams,
) -> Result<(ModelParams, TrainTrace)> {
    validate(config)?;
    if x.nrows() != graph.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for a graph with {} nodes",
            x.nrows(),
            graph.n()
        )));
    }
    let op = normalize(graph, config.encoder.norm_kind);
    let propagated = propagated_input(&op, x, &config.encoder);
    let mut optimizer = Optimizer::new(config.optimizer, config.lr, &params);
    let mut trace = TrainTrace::default();

    for epoch in 0..config.epochs {
        let start = std::time::Instant::now();
        let mut coarsen_rng = crate::rng::stream(config.seed, "coarsen", epoch as u64);
        let (partition, coarse) =
            random_coarsen(graph, config.rate, config.delta, &mut coarsen_rng)?;
        let xp = coarsen_features(graph, &partition, &coarse, x)?;
        let op_c = normalize(&coarse.graph, config.encoder.norm_kind);
        let propagated_c = propagated_input(&op_c, &xp.view(), &config.encoder);

        let (z, cache) = forward(&op, &propagated.view(), &params, &config.encoder)?;
        let (h, cache_c) = forward(&op_c, &propagated_c.view(), &params, &config.encoder)?;
        let z_prime = lift(&h.view(), &partition)?;

        let n_super = partition.num_clusters;
        let mut pair_rng = crate::rng::stream(config.seed, "neg-pairs", epoch as u64);
        let count = config.neg_pairs.unwrap_or(n_super);
        let pairs = NegativePairSet::sample_uniform(n_super, count, &mut pair_rng);

        let (breakdown, grads) = contrastive_loss(
            &z.view(),
            &z_prime.view(),
            &h.view(),
            &partition.sizes,
            &pairs,
            config.alpha,
            config.beta,
        )?;

        if !breakdown.total.is_finite() {
            trace.records.push(EpochRecord {
                epoch,
                loss: breakdown.total,
                positive: breakdown.positive,
                negative: breakdown.negative,
                n_super,
                pos_clamped: breakdown.pos_clamped,
                neg_clamped: breakdown.neg_clamped,
                wall_secs: start.elapsed().as_secs_f64(),
            });
            trace.aborted_nonfinite = true;
            break;
        }

        let g_h = {
            let mut g = grads.h;
            g += &lift_transpose(&grads.z_prime.view(), &partition)?;
            g
        };
        let mut param_grads = backward(
            &op,
            &propagated.view(),
            &params,
            &config.encoder,
            &cache,
            &z.view(),
            &grads.z.view(),
        )?;
        let coarse_grads = backward(
            &op_c,
            &propagated_c.view(),
            &params,
            &config.encoder,
            &cache_c,
            &h.view(),
            &g_h.view(),
        )?;
        param_grads.accumulate(&coarse_grads);
        optimizer.step(&mut params, &param_grads);

        trace.records.push(EpochRecord {
            epoch,
            loss: breakdown.total,
            positive: breakdown.positive,
            negative: breakdown.negative,
            n_super,
            pos_clamped: breakdown.pos_clamped,
            neg_clamped: breakdown.neg_clamped,
            wall_secs: start.elapsed().as_secs_f64(),
        });
    }
    Ok((params, trace))
}

/// Embeds a graph with trained parameters (forward pass only).
pub fn embed(
    graph: &Graph,
    x: &ArrayView2<f64>,
    params: &ModelParams,
    encoder: &EncoderConfig,
) -> Result<Array2<f64>> {
    let op = normalize(graph, encoder.norm_kind);
    let propagated = propagated_input(&op, x, encoder);
    let (z, _) = forward(&op, &propagated.view(), params, encoder)?;
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy_setup(seed: u64) -> (Graph, Array2<f64>) {
        let params = crate::csbm::CsbmParams {
            n: 60,
            p1: 0.4,
            p2: 0.15,
            q: 0.02,
            mu1: vec![1.0, 0.0, 0.5],
            mu2: vec![-1.0, 0.5, 0.0],
            sigma: 0.8,
            seed,
            enforce_ordering: true,
        };
        let (g, x, _) = crate::csbm::sample_csbm(&params).unwrap();
        (g, x)
    }

    fn toy_config(seed: u64) -> TrainConfig {
        TrainConfig {
            encoder: EncoderConfig {
                dim_out: 8,
                k: 2,
                ..Default::default()
            },
            epochs: 8,
            lr: 0.05,
            alpha: 100.0,
            beta: 10.0,
            rate: 0.4,
            delta: 10,
            neg_pairs: None,
            optimizer: OptimizerKind::Adam,
            seed,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (g, x) = toy_setup(70);
        let mut config = toy_config(1);
        config.lr = 0.0;
        let initial = init_params(&config.encoder, x.ncols(), config.seed).unwrap();
        let (params, trace) = train(&g, &x.view(), &config).unwrap();
        assert_eq!(params, initial);
        assert_eq!(trace.records.len(), 8);
    }

    #[test]
    fn training_is_reproducible() {
        let (g, x) = toy_setup(71);
        let config = toy_config(2);
        let (p1, t1) = train(&g, &x.view(), &config).unwrap();
        let (p2, t2) = train(&g, &x.view(), &config).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1.records.len(), t2.records.len());
        for (a, b) in t1.records.iter().zip(&t2.records) {
            assert_eq!(a.loss, b.loss);
            assert_eq!(a.positive, b.positive);
            assert_eq!(a.negative, b.negative);
            assert_eq!(a.n_super, b.n_super);
        }
    }

    #[test]
    fn loss_components_sum_exactly() {
        let (g, x) = toy_setup(72);
        let (_, trace) = train(&g, &x.view(), &toy_config(3)).unwrap();
        for rec in &trace.records {
            assert!((rec.loss - (rec.positive + rec.negative)).abs() < 1e-12);
        }
    }

    #[test]
    fn coarsening_shrinks_the_graph_each_epoch() {
        let (g, x) = toy_setup(73);
        let (_, trace) = train(&g, &x.view(), &toy_config(4)).unwrap();
        for rec in &trace.records {
            assert!(rec.n_super < 60, "epoch {} kept all nodes", rec.epoch);
            assert!(rec.n_super >= 6);
        }
        // Fresh coarsening per epoch: supernode counts should not be one
        // constant across all epochs.
        let first = trace.records[0].n_super;
        assert!(trace.records.iter().any(|r| r.n_super != first));
    }

    #[test]
    fn median_loss_improves_across_seeds() {
        let mut initial = Vec::new();
        let mut finals = Vec::new();
        for seed in 0..10u64 {
            let (g, x) = toy_setup(100 + seed);
            let mut config = toy_config(seed);
            config.epochs = 12;
            let (_, trace) = train(&g, &x.view(), &config).unwrap();
            assert!(!trace.aborted_nonfinite);
            initial.push(trace.records.first().unwrap().loss);
            finals.push(trace.records.last().unwrap().loss);
        }
        let median = |mut v: Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let mi = median(initial);
        let mf = median(finals);
        assert!(mf < mi, "median final {mf} vs initial {mi}");
    }

    #[test]
    fn nonfinite_loss_aborts_and_reports() {
        let (g, x) = toy_setup(74);
        let mut config = toy_config(5);
        config.optimizer = OptimizerKind::GradientDescent;
        // Unnormalized outputs let the parameter blow-up overflow the loss.
        config.encoder.row_normalize_output = false;
        config.lr = 1e300;
        config.epochs = 6;
        let (_, trace) = train(&g, &x.view(), &config).unwrap();
        assert!(trace.aborted_nonfinite);
        assert!(trace.records.len() < 6);
        assert!(!trace.records.last().unwrap().loss.is_finite());
    }

    #[test]
    fn gradient_descent_variant_runs() {
        let (g, x) = toy_setup(75);
        let mut config = toy_config(6);
        config.optimizer = OptimizerKind::GradientDescent;
        config.lr = 1e-4;
        let (_, trace) = train(&g, &x.view(), &config).unwrap();
        assert_eq!(trace.records.len(), 8);
        assert!(!trace.aborted_nonfinite);
    }

    #[test]
    fn two_layer_architecture_trains() {
        let (g, x) = toy_setup(76);
        let mut config = toy_config(7);
        config.encoder.arch = Arch::Gcn2 { hidden: 6 };
        config.encoder.dim_out = 4;
        let (params, trace) = train(&g, &x.view(), &config).unwrap();
        assert!(params.w2.is_some());
        assert!(!trace.aborted_nonfinite);
        assert_eq!(trace.records.len(), 8);
    }

    #[test]
    fn presets_cover_known_names() {
        for name in ["cora", "citeseer", "pubmed", "photo", "computers", "arxiv"] {
            let config = preset(name).unwrap();
            assert_eq!(config.delta, 10);
            assert_eq!(config.encoder.dim_out, 512);
            assert!(config.rate > 0.0 && config.rate < 1.0);
        }
        assert!(preset("imagenet").is_err());
        assert!(matches!(preset("photo").unwrap().encoder.arch, Arch::Gcn2 { hidden: 512 }));
        let cora = preset("cora").unwrap();
        assert_eq!(cora.epochs, 25);
        assert_eq!(cora.lr, 0.01);
        assert_eq!(cora.alpha, 15_000.0);
        assert_eq!(cora.beta, 500.0);
        assert_eq!(cora.rate, 0.3);
    }

    #[test]
    fn embed_matches_training_forward() {
        let (g, x) = toy_setup(77);
        let config = toy_config(8);
        let (params, _) = train(&g, &x.view(), &config).unwrap();
        let z = embed(&g, &x.view(), &params, &config.encoder).unwrap();
        assert_eq!(z.nrows(), 60);
        assert_eq!(z.ncols(), 8);
        for row in z.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12 || norm == 0.0);
        }
    }
}
