//! Command-line front end for the RGCCL laboratory: synthetic graph
//! generation, random coarsening, contrastive training, probing, and the
//! community-bias diagnostics, each as a reproducible subcommand.
//!
//! Every run echoes its resolved configuration to `config-echo.txt` in the
//! output directory; all numeric output carries 17 significant digits so
//! files round-trip exactly.

use rgccl::config::{self, KvConfig};
use rgccl::graph::{self, fmt_f64, NormKind};
use rgccl::{coarsen, csbm, eval, json, rng, spectral, trainer, Error, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const USAGE: &str = "\
rgccl <subcommand> [--config PATH] [--out DIR] [--seed N] [key=value ...]

Flags other than --config are shorthand for config keys: `--ratio 0.3`
means `ratio=0.3`. Command-line pairs override the config file.

subcommands:
  csbm-gen      sample a two-block graph with Gaussian features
                keys: n p1 p2 q mu1 mu2 sigma seed enforce_ordering out
  coarsen       one random coarsening of an edge list
                keys: edges [features] [nodes] ratio delta seed out
  train         contrastive training over per-epoch coarsenings
                keys: edges features [preset] epochs lr alpha beta rate delta
                      neg_pairs optimizer arch hidden k norm activation
                      dim_out row_normalize seed out
  eval          probe stored embeddings and report fairness metrics
                keys: embeddings labels per_class_train probe_steps probe_lr
                      probe_l2 seed out
  diagnose      spectral and co-clustering bias diagnostics for a dataset
                keys: edges features labels ratio delta trials k seed out
  qda-fairness  two-Gaussian error rates, closed form and Monte Carlo
                keys: var1 var2 [samples] seed out, or sweep=LO:HI:COUNT
                      with sum_sq=S
  pipeline      csbm-gen + train + eval + diagnose in one run
                keys: csbm-gen keys, train keys, eval keys, trials, out";

/// Stdout/stderr writes that ignore a closed pipe instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! say_err {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stderr(), $($arg)*);
    }};
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&args));
}

fn run(args: &[String]) -> i32 {
    if args.is_empty() {
        say_err!("{USAGE}");
        return 2;
    }
    let command = args[0].as_str();
    if matches!(command, "--help" | "-h" | "help") {
        say!("{USAGE}");
        return 0;
    }
    let kv = match parse_args(&args[1..]) {
        Ok(kv) => kv,
        Err(e) => return fail(command, &e, 2),
    };
    let result = match command {
        "csbm-gen" => cmd_csbm_gen(&kv),
        "coarsen" => cmd_coarsen(&kv),
        "train" => cmd_train(&kv),
        "eval" => cmd_eval(&kv),
        "diagnose" => cmd_diagnose(&kv),
        "qda-fairness" => cmd_qda_fairness(&kv),
        "pipeline" => cmd_pipeline(&kv),
        other => {
            let e = Error::InvalidParameter(format!("unknown subcommand `{other}`"));
            return fail(other, &e, 2);
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => fail(command, &e, 1),
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    command: &'a str,
    error: String,
}

fn fail(command: &str, err: &Error, code: i32) -> i32 {
    let record = ErrorRecord {
        command,
        error: err.to_string(),
    };
    match json::to_string_17(&record) {
        Ok(text) => say_err!("{text}"),
        Err(_) => say_err!("{{\"command\":\"{command}\",\"error\":\"unprintable\"}}"),
    }
    code
}

/// `--config PATH` loads a file; `--name value` and bare `key=value` pairs
/// override it in command-line order.
fn parse_args(rest: &[String]) -> Result<KvConfig> {
    let mut config_path: Option<String> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < rest.len() {
        let arg = &rest[i];
        if let Some(name) = arg.strip_prefix("--") {
            let value = rest
                .get(i + 1)
                .ok_or_else(|| Error::InvalidParameter(format!("flag --{name} needs a value")))?;
            if name == "config" {
                if config_path.is_some() {
                    return Err(Error::InvalidParameter("--config given twice".into()));
                }
                config_path = Some(value.clone());
            } else {
                overrides.push((name.replace('-', "_"), value.clone()));
            }
            i += 2;
        } else if let Some((k, v)) = arg.split_once('=') {
            overrides.push((k.to_string(), v.to_string()));
            i += 1;
        } else {
            return Err(Error::InvalidParameter(format!(
                "expected --flag value or key=value, got `{arg}`"
            )));
        }
    }
    let mut kv = match config_path {
        Some(path) => KvConfig::load(&path)?,
        None => KvConfig::parse("", "args")?,
    };
    for (k, v) in overrides {
        kv.set(&k, &v);
    }
    Ok(kv)
}

fn out_dir(kv: &KvConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(kv.get("out").unwrap_or("."));
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir)
}

fn write_echo(kv: &KvConfig, out: &Path, command: &str) -> Result<()> {
    let mut text = format!("command={command}\n");
    for line in kv.echo_lines() {
        text.push_str(&line);
        text.push('\n');
    }
    graph::write_text(&out.join("config-echo.txt"), &text)
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = json::to_string_17(value)?;
    text.push('\n');
    graph::write_text(path, &text)
}

fn require_key<'a>(kv: &'a KvConfig, key: &str) -> Result<&'a str> {
    kv.get(key)
        .ok_or_else(|| Error::InvalidParameter(format!("missing required key `{key}`")))
}

fn extend(base: &[&'static str], extra: &[&'static str]) -> Vec<&'static str> {
    let mut all = base.to_vec();
    all.extend_from_slice(extra);
    all
}

// ---------------------------------------------------------------- csbm-gen

#[derive(Serialize)]
struct CsbmMeta<'a> {
    params: &'a csbm::CsbmParams,
    nodes: usize,
    edges: usize,
    feature_dim: usize,
    class_sizes: Vec<usize>,
}

fn cmd_csbm_gen(kv: &KvConfig) -> Result<()> {
    kv.require_known(&extend(config::CSBM_KEYS, &["out"]))?;
    let out = out_dir(kv)?;
    write_echo(kv, &out, "csbm-gen")?;
    let params = config::csbm_params_from_kv(&kv.retain_keys(config::CSBM_KEYS))?;
    let (g, x, labels) = csbm::sample_csbm(&params)?;
    graph::write_edge_file(&g, &out.join("edges.txt"))?;
    graph::write_feature_file(&x.view(), &out.join("features.csv"))?;
    graph::write_label_file(&labels, &out.join("labels.txt"))?;
    let mut class_sizes = vec![0usize; graph::num_classes(&labels)];
    for &l in &labels {
        class_sizes[l] += 1;
    }
    let meta = CsbmMeta {
        params: &params,
        nodes: g.n(),
        edges: g.num_edges(),
        feature_dim: x.ncols(),
        class_sizes,
    };
    write_json_file(&out.join("meta.json"), &meta)?;
    say!(
        "csbm-gen: {} nodes, {} edges -> {}",
        g.n(),
        g.num_edges(),
        out.display()
    );
    Ok(())
}

// ----------------------------------------------------------------- coarsen

#[derive(Serialize)]
struct CoarsenSummary {
    nodes: usize,
    edges: usize,
    coarse_nodes: usize,
    coarse_edges: usize,
    ratio: f64,
    delta: usize,
    seed: u64,
    requested_draws: usize,
    available_edges: usize,
    total_weight_before: f64,
    total_weight_after: f64,
}

fn cmd_coarsen(kv: &KvConfig) -> Result<()> {
    kv.require_known(&["edges", "features", "nodes", "ratio", "delta", "seed", "out"])?;
    let out = out_dir(kv)?;
    write_echo(kv, &out, "coarsen")?;
    let edge_path = PathBuf::from(require_key(kv, "edges")?);
    let features = match kv.get("features") {
        Some(path) => Some(graph::read_features(Path::new(path))?),
        None => None,
    };
    let entries = graph::read_edges(&edge_path, usize::MAX)?;
    let n = match (kv.usize("nodes")?, &features) {
        (Some(n), _) => n,
        (None, Some(x)) => x.nrows(),
        (None, None) => entries
            .iter()
            .map(|&(u, v, _)| u.max(v) + 1)
            .max()
            .ok_or_else(|| {
                Error::InvalidParameter(
                    "cannot infer node count from an empty edge list; pass nodes=N".into(),
                )
            })?,
    };
    let g = graph::graph_from_entries(n, &entries)?;
    let ratio = kv.f64_or("ratio", 0.5)?;
    let delta = kv.usize_or("delta", 10)?;
    let seed = kv.u64_or("seed", 0)?;
    let requested = (ratio * n as f64).floor() as usize;
    if requested > g.num_edges() {
        say!(
            "note: {} requested draws capped at {} available edges",
            requested,
            g.num_edges()
        );
    }
    let mut rng = rng::stream(seed, "coarsen", 0);
    let (partition, coarse) = coarsen::random_coarsen(&g, ratio, delta, &mut rng)?;
    graph::write_edge_file(&coarse.graph, &out.join("coarse-edges.txt"))?;
    graph::write_label_file(&partition.assign, &out.join("assignment.txt"))?;
    if let Some(x) = &features {
        let xc = coarsen::coarsen_features(&g, &partition, &coarse, &x.view())?;
        graph::write_feature_file(&xc.view(), &out.join("coarse-features.csv"))?;
    }
    let summary = CoarsenSummary {
        nodes: n,
        edges: g.num_edges(),
        coarse_nodes: coarse.graph.n(),
        coarse_edges: coarse.graph.num_edges(),
        ratio,
        delta,
        seed,
        requested_draws: requested,
        available_edges: g.num_edges(),
        total_weight_before: g.total_weight(),
        total_weight_after: coarse.graph.total_weight(),
    };
    write_json_file(&out.join("summary.json"), &summary)?;
    say!(
        "coarsen: {} nodes -> {} supernodes -> {}",
        n,
        coarse.graph.n(),
        out.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- train

fn epochs_csv(trace: &trainer::TrainTrace) -> String {
    let mut text =
        String::from("epoch,loss,positive,negative,n_super,pos_clamped,neg_clamped,wall_secs\n");
    for r in &trace.records {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.epoch,
            fmt_f64(r.loss),
            fmt_f64(r.positive),
            fmt_f64(r.negative),
            r.n_super,
            u8::from(r.pos_clamped),
            u8::from(r.neg_clamped),
            fmt_f64(r.wall_secs)
        )
        .unwrap();
    }
    text
}

fn cmd_train(kv: &KvConfig) -> Result<()> {
    kv.require_known(&extend(config::TRAIN_KEYS, &["edges", "features", "out"]))?;
    let out = out_dir(kv)?;
    write_echo(kv, &out, "train")?;
    let edge_path = PathBuf::from(require_key(kv, "edges")?);
    let feature_path = PathBuf::from(require_key(kv, "features")?);
    let (g, x) = graph::load_graph_features(&edge_path, &feature_path)?;
    let config = config::train_config_from_kv(&kv.retain_keys(config::TRAIN_KEYS))?;
    let (params, trace) = trainer::train(&g, &x.view(), &config)?;
    params.save(&out.join("params.bin"))?;
    write_json_file(&out.join("trace.json"), &trace)?;
    graph::write_text(&out.join("epochs.csv"), &epochs_csv(&trace))?;
    let z = trainer::embed(&g, &x.view(), &params, &config.encoder)?;
    graph::write_feature_file(&z.view(), &out.join("embeddings.csv"))?;
    let final_loss = trace.records.last().map_or(f64::NAN, |r| r.loss);
    if trace.aborted_nonfinite {
        say!("train: aborted on non-finite loss at epoch {}", trace.records.len());
    }
    say!(
        "train: {} epochs, final loss {} -> {}",
        trace.records.len(),
        fmt_f64(final_loss),
        out.display()
    );
    Ok(())
}

// -------------------------------------------------------------------- eval

#[derive(Serialize)]
struct SplitSummary {
    per_class_train: usize,
    train_size: usize,
    test_size: usize,
}

#[derive(Serialize)]
struct EvalRecord {
    split: SplitSummary,
    classification: eval::ClassificationReport,
    density: eval::DensityReport,
}

struct EvalOutput {
    record: EvalRecord,
    per_class_csv: String,
}

fn evaluate_embeddings(
    z: &ndarray::ArrayView2<f64>,
    labels: &[usize],
    kv: &KvConfig,
) -> Result<EvalOutput> {
    let per_class_train = kv.usize_or("per_class_train", 20)?;
    let probe = eval::ProbeConfig {
        steps: kv.usize_or("probe_steps", 500)?,
        lr: kv.f64_or("probe_lr", 0.1)?,
        l2: kv.f64_or("probe_l2", 1e-4)?,
        seed: kv.u64_or("seed", 0)?,
    };
    let seed = kv.u64_or("seed", 0)?;
    let (train_idx, test_idx) = eval::train_test_split_per_class(labels, per_class_train, seed)?;
    let model = eval::train_probe(z, labels, &train_idx, &probe)?;
    let preds = eval::predict(&model, z);
    let y_true: Vec<usize> = test_idx.iter().map(|&u| labels[u]).collect();
    let y_pred: Vec<usize> = test_idx.iter().map(|&u| preds[u]).collect();
    let classification = eval::classification_metrics(&y_true, &y_pred)?;
    let density = eval::density_report(z, labels)?;

    let k = graph::num_classes(labels);
    let mut csv = String::from("class,train,test,recall,density\n");
    for c in 0..k {
        let train_c = train_idx.iter().filter(|&&u| labels[u] == c).count();
        let test_c = test_idx.iter().filter(|&&u| labels[u] == c).count();
        let recall = classification
            .per_class_recall
            .get(c)
            .copied()
            .flatten()
            .unwrap_or(f64::NAN);
        writeln!(
            csv,
            "{c},{train_c},{test_c},{},{}",
            fmt_f64(recall),
            fmt_f64(density.per_class[c])
        )
        .unwrap();
    }
    Ok(EvalOutput {
        record: EvalRecord {
            split: SplitSummary {
                per_class_train,
                train_size: train_idx.len(),
                test_size: test_idx.len(),
            },
            classification,
            density,
        },
        per_class_csv: csv,
    })
}

fn cmd_eval(kv: &KvConfig) -> Result<()> {
    kv.require_known(&[
        "embeddings",
        "labels",
        "per_class_train",
        "probe_steps",
        "probe_lr",
        "probe_l2",
        "seed",
        "out",
    ])?;
    let out = out_dir(kv)?;
    write_echo(kv, &out, "eval")?;
    let z = graph::read_features(Path::new(require_key(kv, "embeddings")?))?;
    let labels = graph::read_labels(Path::new(require_key(kv, "labels")?))?;
    if labels.len() != z.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} embedding rows",
            labels.len(),
            z.nrows()
        )));
    }
    let output = evaluate_embeddings(&z.view(), &labels, kv)?;
    write_json_file(&out.join("metrics.json"), &output.record)?;
    graph::write_text(&out.join("per-class.csv"), &output.per_class_csv)?;
    let c = &output.record.classification;
    say!(
        "eval: accuracy {} gap {} macro_f1 {} mcc {} -> {}",
        fmt_f64(c.accuracy),
        fmt_f64(c.recall_gap),
        fmt_f64(c.macro_f1),
        fmt_f64(c.mcc),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- diagnose

#[derive(Serialize)]
struct CoclusterReport {
    trials: usize,
    ratio: f64,
    delta: usize,
    /// Mean co-clustering rate per class pair over trials.
    mean: Vec<Vec<f64>>,
    /// Standard error of each mean.
    se: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct PropagatedVariance {
    k: usize,
    by_class: Vec<f64>,
}

#[derive(Serialize)]
struct GraphFacts {
    nodes: usize,
    edges: usize,
    connected: bool,
    classes: usize,
    class_sizes: Vec<usize>,
}

#[derive(Serialize)]
struct DiagnoseRecord {
    graph: GraphFacts,
    spectral: spectral::SpectralSummary,
    communities: Vec<spectral::CommunitySpectrum>,
    coclustering: CoclusterReport,
    propagated_variance: PropagatedVariance,
    /// Absent when the graph or its sampled coarsening is disconnected.
    propagation_bound: Option<spectral::PropagationBoundReport>,
}

struct DiagnoseOutput {
    record: DiagnoseRecord,
    cocluster_csv: String,
}

fn diagnose_dataset(
    g: &graph::Graph,
    x: &ndarray::ArrayView2<f64>,
    labels: &[usize],
    ratio: f64,
    delta: usize,
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<DiagnoseOutput> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let op = graph::normalize(g, NormKind::RandomWalk);
    let summary = spectral::spectral_summary(&op)?;
    let communities = spectral::community_spectra(g, labels)?;
    let classes = graph::num_classes(labels);
    let mut class_sizes = vec![0usize; classes];
    for &l in labels {
        class_sizes[l] += 1;
    }

    let mut samples: Vec<ndarray::Array2<f64>> = Vec::with_capacity(trials);
    let mut csv = String::from("trial");
    for a in 0..classes {
        for b in a..classes {
            write!(csv, ",q_{a}_{b}").unwrap();
        }
    }
    csv.push('\n');
    for t in 0..trials {
        let mut rng = rng::stream(seed, "diag-coarsen", t as u64);
        let (partition, _) = coarsen::random_coarsen(g, ratio, delta, &mut rng)?;
        let stats = coarsen::partition_stats(&partition, labels)?;
        write!(csv, "{t}").unwrap();
        for a in 0..classes {
            for b in a..classes {
                write!(csv, ",{}", fmt_f64(stats[[a, b]])).unwrap();
            }
        }
        csv.push('\n');
        samples.push(stats);
    }
    let mut mean = vec![vec![0.0; classes]; classes];
    let mut se = vec![vec![0.0; classes]; classes];
    for a in 0..classes {
        for b in 0..classes {
            let values: Vec<f64> = samples.iter().map(|s| s[[a, b]]).collect();
            let m = values.iter().sum::<f64>() / trials as f64;
            mean[a][b] = m;
            if trials > 1 {
                let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                    / (trials as f64 - 1.0);
                se[a][b] = (var / trials as f64).sqrt();
            }
        }
    }

    let propagated = graph::propagate(&op, x, k);
    let by_class = csbm::embedding_variance_by_class(&propagated.view(), labels)?;

    let propagation_bound = if g.is_connected() {
        let mut rng = rng::stream(seed, "diag-bound", 0);
        let (partition, coarse) = coarsen::random_coarsen(g, ratio, delta, &mut rng)?;
        if coarse.graph.is_connected() {
            let prepared = spectral::prepare_rows_nonneg_unit(x);
            Some(spectral::propagation_bound_check(
                g,
                &coarse,
                &partition,
                &prepared.view(),
                k,
            )?)
        } else {
            None
        }
    } else {
        None
    };

    Ok(DiagnoseOutput {
        record: DiagnoseRecord {
            graph: GraphFacts {
                nodes: g.n(),
                edges: g.num_edges(),
                connected: g.is_connected(),
                classes,
                class_sizes,
            },
            spectral: summary,
            communities,
            coclustering: CoclusterReport {
                trials,
                ratio,
                delta,
                mean,
                se,
            },
            propagated_variance: PropagatedVariance { k, by_class },
            propagation_bound,
        },
        cocluster_csv: csv,
    })
}

fn cmd_diagnose(kv: &KvConfig) -> Result<()> {
    kv.require_known(&[
        "edges", "features", "labels", "ratio", "delta", "trials", "k", "seed", "out",
    ])?;
    let out = out_dir(kv)?;
    write_echo(kv, &out, "diagnose")?;
    let (g, x, labels) = graph::load_dataset(
        Path::new(require_key(kv, "edges")?),
        Path::new(require_key(kv, "features")?),
        Path::new(require_key(kv, "labels")?),
    )?;
    let output = diagnose_dataset(
        &g,
        &x.view(),
        &labels,
        kv.f64_or("ratio", 0.5)?,
        kv.usize_or("delta", 10)?,
        kv.usize_or("trials", 50)?,
        kv.usize_or("k", 2)?,
        kv.u64_or("seed", 0)?,
    )?;
    write_json_file(&out.join("diagnostics.json"), &output.record)?;
    graph::write_text(&out.join("coclustering.csv"), &output.cocluster_csv)?;
    say!(
        "diagnose: lambda2 {} over {} classes -> {}",
        fmt_f64(output.record.spectral.lambda2),
        output.record.graph.classes,
        out.display()
    );
    Ok(())
}

// ----------------------------------------------------------- qda-fairness

#[derive(Serialize)]
struct QdaRecord {
    closed_form: eval::QdaErrors,
    monte_carlo: Option<eval::QdaMcEstimate>,
}

fn parse_sweep(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidParameter(format!("sweep must be LO:HI:COUNT, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0) || hi < lo || count == 0 || (count == 1 && hi != lo) {
        return Err(Error::InvalidParameter(format!(
            "sweep needs 0 < LO ≤ HI and COUNT ≥ 1 (COUNT 1 only when LO = HI), got `{spec}`"
        )));
    }
    Ok((lo, hi, count))
}

/// Standard-deviation ratio sweep at fixed var1 + var2 = sum_sq. Ratio 1 is
/// reported as the perfectly fair point (both errors 0.5, κ = 1) since the
/// likelihood rule degenerates there.
fn sweep_csv(lo: f64, hi: f64, count: usize, sum_sq: f64) -> Result<String> {
    let mut csv = String::from("ratio,var1,var2,threshold,p1,p2,kappa\n");
    for i in 0..count {
        let ratio = if count == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (count as f64 - 1.0)
        };
        let var1 = sum_sq / (1.0 + ratio * ratio);
        let var2 = sum_sq - var1;
        let (threshold, p1, p2, kappa) = if ratio == 1.0 {
            (f64::NAN, 0.5, 0.5, 1.0)
        } else {
            let q = eval::qda_error_closed_form(var1, var2)?;
            (q.threshold, q.p1, q.p2, q.kappa)
        };
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_f64(ratio),
            fmt_f64(var1),
            fmt_f64(var2),
            fmt_f64(threshold),
            fmt_f64(p1),
            fmt_f64(p2),
            fmt_f64(kappa)
        )
        .unwrap();
    }
    Ok(csv)
}

fn cmd_qda_fairness(kv: &KvConfig) -> Result<()> {
    kv.require_known(&["var1", "var2", "samples", "sweep", "sum_sq", "seed", "out"])?;
    let out = out_dir(kv)?;
    write_echo(kv, &out, "qda-fairness")?;
    if let Some(spec) = kv.get("sweep") {
        let (lo, hi, count) = parse_sweep(spec)?;
        let sum_sq = kv.f64_or("sum_sq", 2.0)?;
        if !(sum_sq > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sum_sq must be positive, got {sum_sq}"
            )));
        }
        let csv = sweep_csv(lo, hi, count, sum_sq)?;
        graph::write_text(&out.join("sweep.csv"), &csv)?;
        say!("qda-fairness: {count} sweep rows -> {}", out.display());
        return Ok(());
    }
    let var1 = kv
        .f64("var1")?
        .ok_or_else(|| Error::InvalidParameter("missing required key `var1`".into()))?;
    let var2 = kv
        .f64("var2")?
        .ok_or_else(|| Error::InvalidParameter("missing required key `var2`".into()))?;
    let closed_form = eval::qda_error_closed_form(var1, var2)?;
    let monte_carlo = match kv.usize("samples")? {
        Some(samples) => Some(eval::qda_error_monte_carlo(
            var1,
            var2,
            samples,
            kv.u64_or("seed", 0)?,
        )?),
        None => None,
    };
    let record = QdaRecord {
        closed_form,
        monte_carlo,
    };
    write_json_file(&out.join("qda.json"), &record)?;
    say!(
        "qda-fairness: p1 {} p2 {} kappa {} -> {}",
        fmt_f64(closed_form.p1),
        fmt_f64(closed_form.p2),
        fmt_f64(closed_form.kappa),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- pipeline

#[derive(Serialize)]
struct TrainSummary {
    epochs_run: usize,
    final_loss: f64,
    aborted_nonfinite: bool,
}

#[derive(Serialize)]
struct ExperimentRecord {
    csbm: csbm::CsbmParams,
    train_config: trainer::TrainConfig,
    train: TrainSummary,
    split: SplitSummary,
    classification: eval::ClassificationReport,
    density: eval::DensityReport,
    spectral: spectral::SpectralSummary,
    communities: Vec<spectral::CommunitySpectrum>,
    coclustering: CoclusterReport,
    propagated_variance: PropagatedVariance,
    propagation_bound: Option<spectral::PropagationBoundReport>,
}

const PIPELINE_EXTRA_KEYS: &[&str] = &[
    "per_class_train",
    "probe_steps",
    "probe_lr",
    "probe_l2",
    "trials",
    "out",
];

fn cmd_pipeline(kv: &KvConfig) -> Result<()> {
    let mut allowed = extend(config::CSBM_KEYS, config::TRAIN_KEYS);
    allowed.extend_from_slice(PIPELINE_EXTRA_KEYS);
    kv.require_known(&allowed)?;
    let out = out_dir(kv)?;
    write_echo(kv, &out, "pipeline")?;

    // Bundled synthetic default: 200 nodes, dense and sparse blocks.
    let params = csbm::CsbmParams {
        n: kv.usize_or("n", 200)?,
        p1: kv.f64_or("p1", 0.5)?,
        p2: kv.f64_or("p2", 0.1)?,
        q: kv.f64_or("q", 0.01)?,
        mu1: kv.f64_list("mu1")?.unwrap_or_else(|| vec![1.0, 0.0]),
        mu2: kv.f64_list("mu2")?.unwrap_or_else(|| vec![-1.0, 0.0]),
        sigma: kv.f64_or("sigma", 1.0)?,
        seed: kv.u64_or("seed", 0)?,
        enforce_ordering: kv.bool_or("enforce_ordering", true)?,
    };
    params.validate()?;
    let (g, x, labels) = csbm::sample_csbm(&params)?;
    graph::write_edge_file(&g, &out.join("edges.txt"))?;
    graph::write_feature_file(&x.view(), &out.join("features.csv"))?;
    graph::write_label_file(&labels, &out.join("labels.txt"))?;

    let train_config = config::train_config_from_kv(&kv.retain_keys(config::TRAIN_KEYS))?;
    let (model, trace) = trainer::train(&g, &x.view(), &train_config)?;
    model.save(&out.join("params.bin"))?;
    write_json_file(&out.join("trace.json"), &trace)?;
    graph::write_text(&out.join("epochs.csv"), &epochs_csv(&trace))?;
    let z = trainer::embed(&g, &x.view(), &model, &train_config.encoder)?;
    graph::write_feature_file(&z.view(), &out.join("embeddings.csv"))?;

    let eval_output = evaluate_embeddings(&z.view(), &labels, kv)?;
    graph::write_text(&out.join("per-class.csv"), &eval_output.per_class_csv)?;

    let diag = diagnose_dataset(
        &g,
        &x.view(),
        &labels,
        train_config.rate,
        train_config.delta,
        kv.usize_or("trials", 50)?,
        train_config.encoder.k,
        kv.u64_or("seed", 0)?,
    )?;
    graph::write_text(&out.join("coclustering.csv"), &diag.cocluster_csv)?;

    let record = ExperimentRecord {
        csbm: params,
        train_config,
        train: TrainSummary {
            epochs_run: trace.records.len(),
            final_loss: trace.records.last().map_or(f64::NAN, |r| r.loss),
            aborted_nonfinite: trace.aborted_nonfinite,
        },
        split: eval_output.record.split,
        classification: eval_output.record.classification,
        density: eval_output.record.density,
        spectral: diag.record.spectral,
        communities: diag.record.communities,
        coclustering: diag.record.coclustering,
        propagated_variance: diag.record.propagated_variance,
        propagation_bound: diag.record.propagation_bound,
    };
    write_json_file(&out.join("experiment.json"), &record)?;
    say!(
        "pipeline: accuracy {} gap {} density_std {} -> {}",
        fmt_f64(record.classification.accuracy),
        fmt_f64(record.classification.recall_gap),
        fmt_f64(record.density.std),
        out.display()
    );
    Ok(())
}
