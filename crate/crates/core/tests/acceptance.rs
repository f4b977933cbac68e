//! Acceptance gate: ten numbered criteria covering the mechanism claims the
//! library is built around. Each test prints exactly one line,
//! `criterion N (name): PASS ...` or `... FAIL ...`, and panics on FAIL, so
//! `cargo test --test acceptance -- --nocapture` reads as a checklist.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rgccl::coarsen::{coarsen_features, partition_stats, random_coarsen, uniform_partition_check};
use rgccl::csbm::{embedding_variance_by_class, sample_csbm, CsbmParams};
use rgccl::encoder::{
    backward, forward, init_params, lift, lift_transpose, propagated_input, Arch, EncoderConfig,
    ModelParams,
};
use rgccl::eval::{
    classification_metrics, density_report, predict, qda_error_closed_form,
    qda_error_monte_carlo, train_probe, train_test_split_per_class, ProbeConfig,
};
use rgccl::graph::{graph_from_entries, normalize, propagate, Graph, NormKind};
use rgccl::loss::{contrastive_loss, NegativePairSet};
use rgccl::rng::stream;
use rgccl::spectral::{
    community_spectra, prepare_rows_nonneg_unit, propagation_bound_check, spectral_summary,
    subspace_distance,
};
use rgccl::trainer::{preset, train, Optimizer, TrainConfig};

type Check = std::result::Result<String, String>;

fn criterion<F: FnOnce() -> Check>(number: usize, name: &str, limit_secs: f64, run: F) {
    let start = std::time::Instant::now();
    let outcome = run();
    let elapsed = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) if elapsed <= limit_secs => {
            println!("criterion {number} ({name}): PASS: {detail} [{elapsed:.1} s]");
        }
        Ok(detail) => {
            let line = format!(
                "criterion {number} ({name}): FAIL: passed checks but took {elapsed:.1} s \
                 (budget {limit_secs} s): {detail}"
            );
            println!("{line}");
            panic!("{line}");
        }
        Err(detail) => {
            let line = format!("criterion {number} ({name}): FAIL: {detail} [{elapsed:.1} s]");
            println!("{line}");
            panic!("{line}");
        }
    }
}

fn er_graph(n: usize, p: f64, seed: u64, tag: &str) -> Graph {
    let mut rng = stream(seed, tag, 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    graph_from_entries(n, &edges).expect("valid edges")
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[test]
fn criterion_01_uniform_partition_identity() {
    criterion(1, "uniform partition identity", 30.0, || {
        let n = 20;
        let s = 4;
        let trials = 20_000;
        let mut rng = stream(11, "acc-c1", 0);
        let z: Array2<f64> = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let labels: Vec<usize> = (0..n).map(|u| u / (n / 2)).collect();
        let report = uniform_partition_check(&z.view(), &labels, s, trials, 11)
            .map_err(|e| e.to_string())?;
        if report.identity_max_gap > 1e-8 {
            return Err(format!(
                "scatter identity violated: max gap {:.3e}",
                report.identity_max_gap
            ));
        }
        let mut worst_rel: f64 = 0.0;
        for (c, rate) in report.same_cluster_rates.iter().enumerate() {
            let rel = (rate - report.expected_rate).abs() / report.expected_rate;
            worst_rel = worst_rel.max(rel);
            if rel > 0.02 {
                return Err(format!(
                    "class {c} co-cluster rate {rate:.5} vs analytic {:.5}, rel {rel:.4}",
                    report.expected_rate
                ));
            }
        }
        Ok(format!(
            "identity gap {:.2e}, worst relative rate discrepancy {:.4} over {} trials",
            report.identity_max_gap, worst_rel, trials
        ))
    });
}

#[test]
fn criterion_02_coclustering_ordering() {
    criterion(2, "co-clustering rate ordering", 60.0, || {
        let params = CsbmParams {
            n: 400,
            p1: 0.5,
            p2: 0.1,
            q: 0.01,
            mu1: vec![1.0, 0.0],
            mu2: vec![-1.0, 0.0],
            sigma: 1.0,
            seed: 2,
            enforce_ordering: true,
        };
        let (g, _x, labels) = sample_csbm(&params).map_err(|e| e.to_string())?;
        let trials = 200;
        let (mut q1, mut q2, mut q12) = (Vec::new(), Vec::new(), Vec::new());
        for t in 0..trials {
            let mut rng = stream(2, "acc-c2", t);
            let (partition, _) = random_coarsen(&g, 0.5, 10, &mut rng).map_err(|e| e.to_string())?;
            let stats = partition_stats(&partition, &labels).map_err(|e| e.to_string())?;
            q1.push(stats[[0, 0]]);
            q2.push(stats[[1, 1]]);
            q12.push(stats[[0, 1]]);
        }
        let (m1, se1) = mean_se(&q1);
        let (m2, se2) = mean_se(&q2);
        let (m12, se12) = mean_se(&q12);
        let gap_a = m2 - m1;
        let se_a = (se1 * se1 + se2 * se2).sqrt();
        let gap_b = m1 - m12;
        let se_b = (se1 * se1 + se12 * se12).sqrt();
        let detail = format!(
            "mean q1 {m1:.5} (se {se1:.5}), q2 {m2:.5} (se {se2:.5}), q12 {m12:.5} (se {se12:.5})"
        );
        if gap_a <= 3.0 * se_a {
            return Err(format!(
                "q2 > q1 not established: gap {gap_a:.5} vs 3 se {:.5}; {detail}",
                3.0 * se_a
            ));
        }
        if gap_b <= 3.0 * se_b {
            return Err(format!(
                "q1 > q12 not established: gap {gap_b:.5} vs 3 se {:.5}; {detail}",
                3.0 * se_b
            ));
        }
        Ok(detail)
    });
}

#[test]
fn criterion_03_propagation_bound() {
    criterion(3, "coarse propagation bound", 60.0, || {
        let mut checked = 0usize;
        let mut attempt = 0u64;
        while checked < 100 {
            attempt += 1;
            if attempt > 2000 {
                return Err(format!(
                    "only {checked} connected instances found in 2000 attempts"
                ));
            }
            let n = 20 + (attempt as usize * 13) % 81;
            let p = (1.5 * (n as f64).ln() / n as f64).min(0.6);
            let g = er_graph(n, p, attempt, "acc-c3-graph");
            if !g.is_connected() {
                continue;
            }
            let ratio = [0.3, 0.5, 0.7][checked % 3];
            let mut rng = stream(3, "acc-c3-coarsen", attempt);
            let (partition, coarse) =
                random_coarsen(&g, ratio, 10, &mut rng).map_err(|e| e.to_string())?;
            if !coarse.graph.is_connected() {
                continue;
            }
            let mut frng = stream(3, "acc-c3-x", attempt);
            let raw: Array2<f64> = Array2::from_shape_fn((n, 3), |_| frng.random::<f64>());
            let x = prepare_rows_nonneg_unit(&raw.view());
            let k = (checked % 20) + 1;
            let report = propagation_bound_check(&g, &coarse, &partition, &x.view(), k)
                .map_err(|e| e.to_string())?;
            if !report.holds {
                return Err(format!(
                    "violation at instance {checked}: n {n}, ratio {ratio}, k {k}, \
                     lhs {:.6e} > rhs {:.6e}",
                    report.lhs_max, report.rhs
                ));
            }
            checked += 1;
        }
        Ok("0 violations over 100 connected coarsened instances, k in 1..=20".into())
    });
}

fn biased_csbm(seed: u64) -> CsbmParams {
    CsbmParams {
        n: 500,
        p1: 0.5,
        p2: 0.05,
        q: 0.01,
        mu1: vec![1.0, 0.0],
        mu2: vec![-1.0, 0.0],
        sigma: 1.0,
        seed,
        enforce_ordering: true,
    }
}

#[test]
fn criterion_04_convergence_bias() {
    criterion(4, "dense block converges faster", 60.0, || {
        let seeds = 50;
        let mut hits = 0;
        for seed in 0..seeds {
            let (g, x, labels) = sample_csbm(&biased_csbm(seed)).map_err(|e| e.to_string())?;
            let op = normalize(&g, NormKind::RandomWalk);
            let z = propagate(&op, &x.view(), 2);
            let v = embedding_variance_by_class(&z.view(), &labels).map_err(|e| e.to_string())?;
            if v[0] < v[1] {
                hits += 1;
            }
        }
        let detail = format!("class-1 variance smaller in {hits}/{seeds} seeds");
        if hits * 10 >= seeds * 9 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn criterion_05_community_lambda2() {
    criterion(5, "dense block mixes faster", 120.0, || {
        let seeds = 50;
        let mut hits = 0;
        for seed in 0..seeds {
            let (g, _x, labels) = sample_csbm(&biased_csbm(seed)).map_err(|e| e.to_string())?;
            let spectra = community_spectra(&g, &labels).map_err(|e| e.to_string())?;
            if spectra[0].lambda2 < spectra[1].lambda2 {
                hits += 1;
            }
        }
        let detail = format!("lambda2(dense) < lambda2(sparse) in {hits}/{seeds} seeds");
        if hits * 20 >= seeds * 19 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn criterion_06_qda_fairness() {
    criterion(6, "qda error rates", 30.0, || {
        for (s1, s2) in [(1.0, 2.0), (0.5, 1.5), (0.8, 1.2)] {
            let (v1, v2) = (s1 * s1, s2 * s2);
            let exact = qda_error_closed_form(v1, v2).map_err(|e| e.to_string())?;
            let mc = qda_error_monte_carlo(v1, v2, 1_000_000, 6).map_err(|e| e.to_string())?;
            if (exact.p1 - mc.p1).abs() >= 0.005 || (exact.p2 - mc.p2).abs() >= 0.005 {
                return Err(format!(
                    "sigma ({s1},{s2}): closed ({:.5},{:.5}) vs mc ({:.5},{:.5})",
                    exact.p1, exact.p2, mc.p1, mc.p2
                ));
            }
        }
        let sum_sq = 2.0;
        let mut prev = f64::NEG_INFINITY;
        let mut kappas = Vec::new();
        for ratio in [1.5, 2.0, 3.0, 4.0] {
            let v1 = sum_sq / (1.0 + ratio * ratio);
            let q = qda_error_closed_form(v1, sum_sq - v1).map_err(|e| e.to_string())?;
            if q.kappa <= prev {
                return Err(format!("kappa not increasing at ratio {ratio}: {}", q.kappa));
            }
            prev = q.kappa;
            kappas.push(q.kappa);
        }
        Ok(format!(
            "closed form within 0.005 of 1e6-sample Monte Carlo at 3 pairs; \
             kappa sweep {:.4} < {:.4} < {:.4} < {:.4}",
            kappas[0], kappas[1], kappas[2], kappas[3]
        ))
    });
}

struct GradInstance {
    graph: Graph,
    x: Array2<f64>,
    config: EncoderConfig,
}

fn composed_loss(
    inst: &GradInstance,
    params: &ModelParams,
    partition: &rgccl::coarsen::Partition,
    coarse: &rgccl::coarsen::CoarsenedGraph,
    pairs: &NegativePairSet,
    alpha: f64,
    beta: f64,
    with_grads: bool,
) -> std::result::Result<(f64, bool, Option<rgccl::encoder::ParamGrads>), String> {
    let err = |e: rgccl::Error| e.to_string();
    let op = normalize(&inst.graph, inst.config.norm_kind);
    let propagated = propagated_input(&op, &inst.x.view(), &inst.config);
    let xp = coarsen_features(&inst.graph, partition, coarse, &inst.x.view()).map_err(err)?;
    let op_c = normalize(&coarse.graph, inst.config.norm_kind);
    let propagated_c = propagated_input(&op_c, &xp.view(), &inst.config);
    let (z, cache) = forward(&op, &propagated.view(), params, &inst.config).map_err(err)?;
    let (h, cache_c) = forward(&op_c, &propagated_c.view(), params, &inst.config).map_err(err)?;
    let z_prime = lift(&h.view(), partition).map_err(err)?;
    let (breakdown, grads) = contrastive_loss(
        &z.view(),
        &z_prime.view(),
        &h.view(),
        &partition.sizes,
        pairs,
        alpha,
        beta,
    )
    .map_err(err)?;
    let clamped = breakdown.pos_clamped || breakdown.neg_clamped;
    if !with_grads {
        return Ok((breakdown.total, clamped, None));
    }
    let mut g_h = grads.h;
    g_h += &lift_transpose(&grads.z_prime.view(), partition).map_err(err)?;
    let mut param_grads = backward(
        &op,
        &propagated.view(),
        params,
        &inst.config,
        &cache,
        &z.view(),
        &grads.z.view(),
    )
    .map_err(err)?;
    let coarse_grads = backward(
        &op_c,
        &propagated_c.view(),
        params,
        &inst.config,
        &cache_c,
        &h.view(),
        &g_h.view(),
    )
    .map_err(err)?;
    param_grads.accumulate(&coarse_grads);
    Ok((breakdown.total, clamped, Some(param_grads)))
}

#[test]
fn criterion_07_composed_gradient() {
    criterion(7, "composed gradient vs finite differences", 10.0, || {
        let (alpha, beta) = (50.0, 10.0);
        let mut worst_rel: f64 = 0.0;
        for instance in 0..3u64 {
            let n = 10 + instance as usize * 5;
            let g = er_graph(n, 0.4, 70 + instance, "acc-c7-graph");
            if !g.is_connected() {
                return Err(format!("instance {instance}: test graph disconnected"));
            }
            let mut frng = stream(70, "acc-c7-x", instance);
            let x: Array2<f64> =
                Array2::from_shape_fn((n, 3), |_| frng.random::<f64>() * 2.0 - 1.0);
            let mut config = EncoderConfig {
                dim_out: 4,
                ..EncoderConfig::default()
            };
            match instance {
                0 => config.k = 2,
                1 => {
                    config.k = 1;
                    config.norm_kind = NormKind::Symmetric;
                }
                _ => config.arch = Arch::Gcn2 { hidden: 5 },
            }
            let inst = GradInstance { graph: g, x, config };
            let mut crng = stream(70, "acc-c7-coarsen", instance);
            let (partition, coarse) =
                random_coarsen(&inst.graph, 0.5, 5, &mut crng).map_err(|e| e.to_string())?;
            let pairs = {
                let mut prng = stream(70, "acc-c7-pairs", instance);
                let total = partition.num_clusters * (partition.num_clusters - 1) / 2;
                NegativePairSet::sample_uniform(partition.num_clusters, total, &mut prng)
            };
            let params =
                init_params(&inst.config, 3, 70 + instance).map_err(|e| e.to_string())?;
            let (_, clamped, grads) =
                composed_loss(&inst, &params, &partition, &coarse, &pairs, alpha, beta, true)?;
            if clamped {
                return Err(format!(
                    "instance {instance}: loss clamped at base point, not differentiable"
                ));
            }
            let grads = grads.expect("requested gradients");
            let h = 1e-6;
            let mut check_matrix = |which: usize| -> std::result::Result<(), String> {
                let (rows, cols) = {
                    let w = if which == 0 {
                        &params.w1
                    } else {
                        params.w2.as_ref().expect("two-layer instance")
                    };
                    (w.nrows(), w.ncols())
                };
                for i in 0..rows {
                    for j in 0..cols {
                        let mut plus = params.clone();
                        let mut minus = params.clone();
                        {
                            let (wp, wm) = if which == 0 {
                                (&mut plus.w1, &mut minus.w1)
                            } else {
                                (
                                    plus.w2.as_mut().expect("two-layer"),
                                    minus.w2.as_mut().expect("two-layer"),
                                )
                            };
                            wp[[i, j]] += h;
                            wm[[i, j]] -= h;
                        }
                        let (lp, cp, _) = composed_loss(
                            &inst, &plus, &partition, &coarse, &pairs, alpha, beta, false,
                        )?;
                        let (lm, cm, _) = composed_loss(
                            &inst, &minus, &partition, &coarse, &pairs, alpha, beta, false,
                        )?;
                        if cp || cm {
                            return Err(format!(
                                "instance {instance}: clamp crossed during perturbation"
                            ));
                        }
                        let fd = (lp - lm) / (2.0 * h);
                        let analytic = if which == 0 {
                            grads.w1[[i, j]]
                        } else {
                            grads.w2.as_ref().expect("two-layer")[[i, j]]
                        };
                        let rel =
                            (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3);
                        worst_rel = worst_rel.max(rel);
                        if rel >= 1e-4 {
                            return Err(format!(
                                "instance {instance} w{} [{i},{j}]: analytic {analytic:.8e} \
                                 vs fd {fd:.8e}, rel {rel:.2e}",
                                which + 1
                            ));
                        }
                    }
                }
                Ok(())
            };
            check_matrix(0)?;
            if params.w2.is_some() {
                check_matrix(1)?;
            }
        }
        Ok(format!(
            "max relative error {worst_rel:.2e} over 3 instances (two single-layer, one two-layer)"
        ))
    });
}

#[test]
fn criterion_08_spectral_contraction() {
    criterion(8, "propagation contracts toward the dominant subspace", 30.0, || {
        let mut worst_margin: f64 = f64::NEG_INFINITY;
        for i in 0..10u64 {
            let n = 20 + i as usize * 6;
            let p = (2.0 * (n as f64).ln() / n as f64).min(0.5);
            let g = er_graph(n, p, 80 + i, "acc-c8-graph");
            if !g.is_connected() {
                return Err(format!("graph {i} disconnected; adjust generator"));
            }
            let op = normalize(&g, NormKind::Symmetric);
            let summary = spectral_summary(&op).map_err(|e| e.to_string())?;
            let factor = summary.lambda2.max(summary.lambda_min.abs());
            for j in 0..10u64 {
                let mut zrng = stream(80, "acc-c8-z", i * 100 + j);
                let z: Array2<f64> =
                    Array2::from_shape_fn((n, 4), |_| zrng.random::<f64>() * 2.0 - 1.0);
                let before = subspace_distance(&op, &z.view());
                let after = subspace_distance(&op, &op.apply(&z.view()).view());
                let slack = factor * before + 1e-9 - after;
                worst_margin = worst_margin.max(after - factor * before);
                if slack < 0.0 {
                    return Err(format!(
                        "graph {i}, draw {j}: distance {after:.12e} exceeds \
                         {factor:.6} * {before:.12e} + 1e-9"
                    ));
                }
            }
        }
        Ok(format!(
            "100 draws contracted; worst excess over factor*distance {worst_margin:.2e}"
        ))
    });
}

/// Same encoder and optimizer, but only the separation (negative) term on
/// the original graph: no coarsening, every node its own unit-size cluster.
fn train_negative_only(
    g: &Graph,
    x: &ArrayView2<f64>,
    config: &TrainConfig,
) -> std::result::Result<ModelParams, String> {
    let err = |e: rgccl::Error| e.to_string();
    let op = normalize(g, config.encoder.norm_kind);
    let propagated = propagated_input(&op, x, &config.encoder);
    let mut params = init_params(&config.encoder, x.ncols(), config.seed).map_err(err)?;
    let mut optimizer = Optimizer::new(config.optimizer, config.lr, &params);
    let sizes = vec![1usize; g.n()];
    for epoch in 0..config.epochs {
        let (z, cache) = forward(&op, &propagated.view(), &params, &config.encoder).map_err(err)?;
        let mut pair_rng = stream(config.seed, "neg-pairs", epoch as u64);
        let count = config.neg_pairs.unwrap_or(g.n());
        let pairs = NegativePairSet::sample_uniform(g.n(), count, &mut pair_rng);
        let (_, grads) = contrastive_loss(
            &z.view(),
            &z.view(),
            &z.view(),
            &sizes,
            &pairs,
            config.alpha,
            0.0,
        )
        .map_err(err)?;
        let param_grads = backward(
            &op,
            &propagated.view(),
            &params,
            &config.encoder,
            &cache,
            &z.view(),
            &grads.h.view(),
        )
        .map_err(err)?;
        optimizer.step(&mut params, &param_grads);
    }
    Ok(params)
}

fn probe_fairness(
    z: &ArrayView2<f64>,
    labels: &[usize],
    seed: u64,
) -> std::result::Result<(f64, f64, f64), String> {
    let err = |e: rgccl::Error| e.to_string();
    let (train_idx, test_idx) = train_test_split_per_class(labels, 20, seed).map_err(err)?;
    let probe = ProbeConfig {
        seed,
        ..ProbeConfig::default()
    };
    let model = train_probe(z, labels, &train_idx, &probe).map_err(err)?;
    let preds = predict(&model, z);
    let y_true: Vec<usize> = test_idx.iter().map(|&u| labels[u]).collect();
    let y_pred: Vec<usize> = test_idx.iter().map(|&u| preds[u]).collect();
    let report = classification_metrics(&y_true, &y_pred).map_err(err)?;
    let density = density_report(z, labels).map_err(err)?;
    Ok((report.accuracy, report.recall_gap, density.std))
}

#[test]
fn criterion_09_bias_mitigation() {
    criterion(9, "coarsening view narrows the community gap", 600.0, || {
        let seeds = 20u64;
        let mut wins = 0usize;
        let mut acc_full = Vec::new();
        let mut acc_base = Vec::new();
        for seed in 0..seeds {
            // Feature noise high enough that the sparse block's slower
            // mixing leaves a visible density gap after two hops.
            let mut mu1 = vec![0.0; 32];
            let mut mu2 = vec![0.0; 32];
            mu1[0] = 1.0;
            mu2[0] = -1.0;
            let params = CsbmParams {
                n: 400,
                p1: 0.5,
                p2: 0.05,
                q: 0.01,
                mu1,
                mu2,
                sigma: 10.0,
                seed,
                enforce_ordering: true,
            };
            let (g, x, labels) = sample_csbm(&params).map_err(|e| e.to_string())?;
            let mut config = preset("cora").map_err(|e| e.to_string())?;
            config.seed = seed;
            let (model, trace) = train(&g, &x.view(), &config).map_err(|e| e.to_string())?;
            if trace.aborted_nonfinite {
                return Err(format!("seed {seed}: training diverged"));
            }
            let z = rgccl::trainer::embed(&g, &x.view(), &model, &config.encoder)
                .map_err(|e| e.to_string())?;
            let (acc_r, gap_r, std_r) = probe_fairness(&z.view(), &labels, seed)?;

            let base_params = train_negative_only(&g, &x.view(), &config)?;
            let z_b = rgccl::trainer::embed(&g, &x.view(), &base_params, &config.encoder)
                .map_err(|e| e.to_string())?;
            let (acc_b, gap_b, std_b) = probe_fairness(&z_b.view(), &labels, seed)?;

            if std_r < std_b && gap_r < gap_b {
                wins += 1;
            }
            acc_full.push(acc_r);
            acc_base.push(acc_b);
        }
        let med_full = median(&mut acc_full);
        let med_base = median(&mut acc_base);
        let detail = format!(
            "lower density spread and lower recall gap in {wins}/{seeds} seeds; \
             median accuracy {med_full:.4} vs baseline {med_base:.4}"
        );
        if wins as f64 >= 0.7 * seeds as f64 && med_full >= med_base - 0.02 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn criterion_10_exact_small_cases() {
    criterion(10, "exact small-case regressions", 5.0, || {
        let tol = 1e-10;

        // Path graph 0-1-2 with clusters {0,1} and {2}.
        let g = graph_from_entries(3, &[(0, 1, 1.0), (1, 2, 1.0)]).map_err(|e| e.to_string())?;
        let partition = rgccl::coarsen::Partition::from_assignment(&[0, 0, 1]);
        let coarse = rgccl::coarsen::contract(&g, &partition).map_err(|e| e.to_string())?;
        let checks: [(f64, f64, &str); 6] = [
            (coarse.graph.diagonal()[0], 2.0, "merged pair keeps its internal edge doubled"),
            (coarse.graph.degrees()[0], 3.0, "supernode degree"),
            (coarse.graph.degrees()[1], 1.0, "singleton degree"),
            (coarse.agg_degrees[0], 5.0, "aggregated augmented degree"),
            (coarse.agg_degrees[1], 2.0, "singleton aggregated degree"),
            (coarse.graph.total_weight(), 4.0, "total weight conserved"),
        ];
        for (got, want, what) in checks {
            if (got - want).abs() > tol {
                return Err(format!("path contraction, {what}: {got} vs {want}"));
            }
        }
        let x = ndarray::array![[1.0], [4.0], [10.0]];
        let xp = coarsen_features(&g, &partition, &coarse, &x.view()).map_err(|e| e.to_string())?;
        // Augmented degrees 2 and 3 weight the merged rows: (2*1 + 3*4)/5.
        if (xp[[0, 0]] - 14.0 / 5.0).abs() > tol || (xp[[1, 0]] - 10.0).abs() > tol {
            return Err(format!("coarse features [{}, {}]", xp[[0, 0]], xp[[1, 0]]));
        }

        // Six-cycle: second eigenvalue of the augmented random walk is 2/3.
        let c6 = graph_from_entries(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 0, 1.0)],
        )
        .map_err(|e| e.to_string())?;
        let op = normalize(&c6, NormKind::RandomWalk);
        let summary = spectral_summary(&op).map_err(|e| e.to_string())?;
        if (summary.lambda2 - 2.0 / 3.0).abs() > tol {
            return Err(format!("six-cycle lambda2 {} vs 2/3", summary.lambda2));
        }

        // Confusion matrix [[5,0,0],[0,4,1],[1,0,4]].
        let mut y_true = vec![0; 5];
        let mut y_pred = vec![0; 5];
        y_true.extend([1; 5]);
        y_pred.extend([1, 1, 1, 1, 2]);
        y_true.extend([2; 5]);
        y_pred.extend([0, 2, 2, 2, 2]);
        let report = classification_metrics(&y_true, &y_pred).map_err(|e| e.to_string())?;
        let recalls: Vec<f64> = report.per_class_recall.iter().flatten().copied().collect();
        let expected = [1.0, 0.8, 0.8];
        for (c, (got, want)) in recalls.iter().zip(expected).enumerate() {
            if (got - want).abs() > tol {
                return Err(format!("recall[{c}] {got} vs {want}"));
            }
        }
        if (report.recall_gap - 0.2).abs() > tol {
            return Err(format!("recall gap {} vs 0.2", report.recall_gap));
        }
        if (report.accuracy - 13.0 / 15.0).abs() > tol {
            return Err(format!("accuracy {} vs 13/15", report.accuracy));
        }
        let macro_f1 = (10.0 / 11.0 + 8.0 / 9.0 + 4.0 / 5.0) / 3.0;
        if (report.macro_f1 - macro_f1).abs() > tol {
            return Err(format!("macro f1 {} vs {macro_f1}", report.macro_f1));
        }
        let mcc = 120.0 / 22200.0_f64.sqrt();
        if (report.mcc - mcc).abs() > tol {
            return Err(format!("mcc {} vs {mcc}", report.mcc));
        }
        Ok("path contraction, weighted means, six-cycle spectrum, confusion metrics all exact"
            .into())
    });
}
