//! C ABI over the rgccl library: opaque handles, status codes, and a
//! per-thread error message. Every function catches panics at the boundary;
//! nothing unwinds into the caller.
//!
//! Configuration strings use the same `key=value` line format as the CLI,
//! one entry per line, `#` comments allowed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rgccl::config::{csbm_params_from_kv, train_config_from_kv, KvConfig, TRAIN_KEYS};
use rgccl::csbm::sample_csbm;
use rgccl::encoder::{EncoderConfig, ModelParams};
use rgccl::eval::{
    classification_metrics, density_report, predict, qda_error_closed_form, train_probe,
    train_test_split_per_class, ProbeConfig,
};
use rgccl::graph::{
    load_dataset, load_graph_features, normalize, FeatureMatrix, Graph, Labels, NormKind,
};
use rgccl::spectral::spectral_summary;
use rgccl::trainer::{embed, train};

/// Result code returned by every fallible call. Anything other than `Ok`
/// leaves a description in `rgccl_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgcclStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// A value was rejected (bad config entry, missing labels, ...).
    InvalidArgument = 3,
    /// A file could not be read.
    Io = 4,
    /// A file or config string could not be parsed.
    Parse = 5,
    /// An iterative numerical routine failed to converge.
    Numeric = 6,
    /// The caller-provided buffer is shorter than required.
    BufferTooSmall = 7,
    /// An internal invariant failed; the library state is still valid.
    Panic = 8,
}

/// A loaded or generated graph with node features and optional labels.
pub struct RgcclDataset {
    graph: Graph,
    features: FeatureMatrix,
    labels: Option<Labels>,
}

/// Trained encoder weights plus the architecture they belong to.
pub struct RgcclModel {
    params: ModelParams,
    encoder: EncoderConfig,
}

/// Linear-probe quality and embedding-density summary, test split only.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RgcclMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Largest minus smallest per-class recall.
    pub recall_gap: f64,
    pub mcc: f64,
    /// Mean over classes of the average embedding distance to the class
    /// centroid, and the sample standard deviation of those averages.
    pub density_ave: f64,
    pub density_std: f64,
}

/// Closed-form two-class error rates of the variance-only quadratic rule.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RgcclQda {
    /// Misclassification probability for the low-variance class.
    pub p1: f64,
    /// Misclassification probability for the high-variance class.
    pub p2: f64,
    /// Error ratio max(p1, p2) / min(p1, p2).
    pub kappa: f64,
    /// Decision threshold |x| = t separating the two classes.
    pub threshold: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: RgcclStatus, msg: impl Into<Vec<u8>>) -> RgcclStatus {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
    status
}

fn fail_core(err: rgccl::Error) -> RgcclStatus {
    use rgccl::Error::*;
    let status = match &err {
        Io { .. } => RgcclStatus::Io,
        Parse { .. } => RgcclStatus::Parse,
        NoConvergence { .. } => RgcclStatus::Numeric,
        NodeOutOfRange { .. } | DimensionMismatch(_) | InvalidParameter(_)
        | DegenerateClass(_) => RgcclStatus::InvalidArgument,
    };
    fail(status, err.to_string())
}

/// Runs a body with panic containment and a cleared error slot.
fn guarded<F: FnOnce() -> RgcclStatus>(body: F) -> RgcclStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RgcclStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Reads a required UTF-8 string argument.
///
/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, RgcclStatus> {
    if ptr.is_null() {
        return Err(fail(RgcclStatus::NullArgument, format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(RgcclStatus::Utf8, format!("{what} is not valid UTF-8")))
}

fn parse_kv(source: &str, body: &str, allowed: &[&str]) -> Result<KvConfig, RgcclStatus> {
    let kv = KvConfig::parse(body, source).map_err(fail_core)?;
    kv.require_known(allowed).map_err(fail_core)?;
    Ok(kv)
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, RgcclStatus> {
    if ptr.is_null() {
        Err(fail(RgcclStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(unsafe { &*ptr })
    }
}

/// Message for the most recent failed call on this thread, or null if the
/// most recent call succeeded. The pointer is valid until the next rgccl
/// call on the same thread.
#[no_mangle]
pub extern "C" fn rgccl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Samples a two-block stochastic block model dataset with Gaussian node
/// features. Config keys: n, p1, p2, q (required); mu1, mu2 (comma-separated
/// means), sigma, seed, enforce_ordering.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_csbm_generate(
    config: *const c_char,
    out: *mut *mut RgcclDataset,
) -> RgcclStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RgcclStatus::NullArgument, "out is null");
        }
        unsafe { *out = std::ptr::null_mut() };
        let body = match unsafe { text(config, "config") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let kv = match parse_kv("<csbm config>", body, rgccl::config::CSBM_KEYS) {
            Ok(kv) => kv,
            Err(status) => return status,
        };
        let params = match csbm_params_from_kv(&kv) {
            Ok(p) => p,
            Err(e) => return fail_core(e),
        };
        match sample_csbm(&params) {
            Ok((graph, features, labels)) => {
                let handle = Box::new(RgcclDataset {
                    graph,
                    features,
                    labels: Some(labels),
                });
                unsafe { *out = Box::into_raw(handle) };
                RgcclStatus::Ok
            }
            Err(e) => fail_core(e),
        }
    })
}

/// Loads a dataset from an edge list, a feature CSV, and an optional label
/// file (pass null to skip labels; evaluation then becomes unavailable).
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rgccl_dataset_load(
    edges: *const c_char,
    features: *const c_char,
    labels: *const c_char,
    out: *mut *mut RgcclDataset,
) -> RgcclStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RgcclStatus::NullArgument, "out is null");
        }
        unsafe { *out = std::ptr::null_mut() };
        let edge_path = match unsafe { text(edges, "edges path") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let feature_path = match unsafe { text(features, "features path") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let loaded = if labels.is_null() {
            load_graph_features(Path::new(edge_path), Path::new(feature_path))
                .map(|(graph, features)| (graph, features, None))
        } else {
            let label_path = match unsafe { text(labels, "labels path") } {
                Ok(s) => s,
                Err(status) => return status,
            };
            load_dataset(
                Path::new(edge_path),
                Path::new(feature_path),
                Path::new(label_path),
            )
            .map(|(graph, features, labels)| (graph, features, Some(labels)))
        };
        match loaded {
            Ok((graph, features, labels)) => {
                let handle = Box::new(RgcclDataset {
                    graph,
                    features,
                    labels,
                });
                unsafe { *out = Box::into_raw(handle) };
                RgcclStatus::Ok
            }
            Err(e) => fail_core(e),
        }
    })
}

/// Releases a dataset handle. Null is accepted and ignored.
///
/// # Safety
/// `ds` must be null or a pointer returned by a dataset constructor, not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn rgccl_dataset_free(ds: *mut RgcclDataset) {
    guarded(|| {
        if !ds.is_null() {
            drop(unsafe { Box::from_raw(ds) });
        }
        RgcclStatus::Ok
    });
}

/// Number of nodes.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_dataset_nodes(
    ds: *const RgcclDataset,
    out: *mut usize,
) -> RgcclStatus {
    guarded(|| {
        let (ds, out) = match unsafe { (deref(ds, "dataset"), deref(out, "out")) } {
            (Ok(d), Ok(_)) => (d, out),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        unsafe { *out = ds.graph.n() };
        RgcclStatus::Ok
    })
}

/// Number of undirected edges (diagonal entries not counted).
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_dataset_edges(
    ds: *const RgcclDataset,
    out: *mut usize,
) -> RgcclStatus {
    guarded(|| {
        let (ds, out) = match unsafe { (deref(ds, "dataset"), deref(out, "out")) } {
            (Ok(d), Ok(_)) => (d, out),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        unsafe { *out = ds.graph.num_edges() };
        RgcclStatus::Ok
    })
}

/// Feature dimension.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_dataset_feature_dim(
    ds: *const RgcclDataset,
    out: *mut usize,
) -> RgcclStatus {
    guarded(|| {
        let (ds, out) = match unsafe { (deref(ds, "dataset"), deref(out, "out")) } {
            (Ok(d), Ok(_)) => (d, out),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        unsafe { *out = ds.features.ncols() };
        RgcclStatus::Ok
    })
}

/// Second largest eigenvalue of the self-loop-augmented random-walk
/// propagation operator; governs how fast repeated propagation mixes.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_dataset_lambda2(
    ds: *const RgcclDataset,
    out: *mut f64,
) -> RgcclStatus {
    guarded(|| {
        let (ds, out) = match unsafe { (deref(ds, "dataset"), deref(out, "out")) } {
            (Ok(d), Ok(_)) => (d, out),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let op = normalize(&ds.graph, NormKind::RandomWalk);
        match spectral_summary(&op) {
            Ok(summary) => {
                unsafe { *out = summary.lambda2 };
                RgcclStatus::Ok
            }
            Err(e) => fail_core(e),
        }
    })
}

/// Trains an encoder on the dataset with the contrastive coarsening
/// objective. `config` may be null for defaults; keys match the CLI train
/// command (preset, epochs, lr, alpha, beta, rate, delta, neg_pairs,
/// optimizer, seed, arch, hidden, k, norm, activation, dim_out,
/// row_normalize).
///
/// # Safety
/// `ds` must be a live dataset handle, `config` null or NUL-terminated,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_train(
    ds: *const RgcclDataset,
    config: *const c_char,
    out: *mut *mut RgcclModel,
) -> RgcclStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RgcclStatus::NullArgument, "out is null");
        }
        unsafe { *out = std::ptr::null_mut() };
        let ds = match unsafe { deref(ds, "dataset") } {
            Ok(d) => d,
            Err(status) => return status,
        };
        let body = if config.is_null() {
            ""
        } else {
            match unsafe { text(config, "config") } {
                Ok(s) => s,
                Err(status) => return status,
            }
        };
        let kv = match parse_kv("<train config>", body, TRAIN_KEYS) {
            Ok(kv) => kv,
            Err(status) => return status,
        };
        let train_config = match train_config_from_kv(&kv) {
            Ok(c) => c,
            Err(e) => return fail_core(e),
        };
        match train(&ds.graph, &ds.features.view(), &train_config) {
            Ok((params, trace)) => {
                if trace.aborted_nonfinite {
                    return fail(
                        RgcclStatus::Numeric,
                        "training aborted on a non-finite loss; adjust lr or alpha/beta",
                    );
                }
                let handle = Box::new(RgcclModel {
                    params,
                    encoder: train_config.encoder,
                });
                unsafe { *out = Box::into_raw(handle) };
                RgcclStatus::Ok
            }
            Err(e) => fail_core(e),
        }
    })
}

/// Releases a model handle. Null is accepted and ignored.
///
/// # Safety
/// `model` must be null or a pointer returned by `rgccl_train`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn rgccl_model_free(model: *mut RgcclModel) {
    guarded(|| {
        if !model.is_null() {
            drop(unsafe { Box::from_raw(model) });
        }
        RgcclStatus::Ok
    });
}

/// Embedding dimension produced by the model.
///
/// # Safety
/// `model` must be a live model handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_model_dim(
    model: *const RgcclModel,
    out: *mut usize,
) -> RgcclStatus {
    guarded(|| {
        let (model, out) = match unsafe { (deref(model, "model"), deref(out, "out")) } {
            (Ok(m), Ok(_)) => (m, out),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        unsafe { *out = model.encoder.dim_out };
        RgcclStatus::Ok
    })
}

/// Writes node embeddings row-major into `out` (nodes x dim doubles).
/// `len` is the capacity of `out` in doubles and must be at least
/// nodes * dim.
///
/// # Safety
/// `model` and `ds` must be live handles; `out` must point to at least
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rgccl_embed(
    model: *const RgcclModel,
    ds: *const RgcclDataset,
    out: *mut f64,
    len: usize,
) -> RgcclStatus {
    guarded(|| {
        let model = match unsafe { deref(model, "model") } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let ds = match unsafe { deref(ds, "dataset") } {
            Ok(d) => d,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(RgcclStatus::NullArgument, "out is null");
        }
        let needed = ds.graph.n() * model.encoder.dim_out;
        if len < needed {
            return fail(
                RgcclStatus::BufferTooSmall,
                format!("buffer holds {len} doubles, embedding needs {needed}"),
            );
        }
        let z = match embed(&ds.graph, &ds.features.view(), &model.params, &model.encoder) {
            Ok(z) => z,
            Err(e) => return fail_core(e),
        };
        let slice = unsafe { std::slice::from_raw_parts_mut(out, needed) };
        for (slot, value) in slice.iter_mut().zip(z.iter()) {
            *slot = *value;
        }
        RgcclStatus::Ok
    })
}

const EVAL_KEYS: &[&str] = &["per_class_train", "probe_steps", "probe_lr", "probe_l2", "seed"];

/// Embeds the dataset, trains a softmax probe on a per-class split of the
/// labels, and reports test-split metrics plus the embedding density
/// spread. Requires a labeled dataset. `config` may be null; keys:
/// per_class_train (default 20), probe_steps, probe_lr, probe_l2, seed.
///
/// # Safety
/// `model` and `ds` must be live handles, `config` null or NUL-terminated,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_evaluate(
    model: *const RgcclModel,
    ds: *const RgcclDataset,
    config: *const c_char,
    out: *mut RgcclMetrics,
) -> RgcclStatus {
    guarded(|| {
        let model = match unsafe { deref(model, "model") } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let ds = match unsafe { deref(ds, "dataset") } {
            Ok(d) => d,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(RgcclStatus::NullArgument, "out is null");
        }
        let labels = match &ds.labels {
            Some(l) => l,
            None => {
                return fail(
                    RgcclStatus::InvalidArgument,
                    "dataset has no labels; load with a label file to evaluate",
                )
            }
        };
        let body = if config.is_null() {
            ""
        } else {
            match unsafe { text(config, "config") } {
                Ok(s) => s,
                Err(status) => return status,
            }
        };
        let kv = match parse_kv("<eval config>", body, EVAL_KEYS) {
            Ok(kv) => kv,
            Err(status) => return status,
        };
        let metrics = (|| -> rgccl::Result<RgcclMetrics> {
            let per_class = kv.usize_or("per_class_train", 20)?;
            let seed = kv.u64_or("seed", 0)?;
            let probe = ProbeConfig {
                steps: kv.usize_or("probe_steps", ProbeConfig::default().steps)?,
                lr: kv.f64_or("probe_lr", ProbeConfig::default().lr)?,
                l2: kv.f64_or("probe_l2", ProbeConfig::default().l2)?,
                seed,
            };
            let z = embed(&ds.graph, &ds.features.view(), &model.params, &model.encoder)?;
            let (train_idx, test_idx) = train_test_split_per_class(labels, per_class, seed)?;
            let probe_model = train_probe(&z.view(), labels, &train_idx, &probe)?;
            let preds = predict(&probe_model, &z.view());
            let y_true: Vec<usize> = test_idx.iter().map(|&u| labels[u]).collect();
            let y_pred: Vec<usize> = test_idx.iter().map(|&u| preds[u]).collect();
            let report = classification_metrics(&y_true, &y_pred)?;
            let density = density_report(&z.view(), labels)?;
            Ok(RgcclMetrics {
                accuracy: report.accuracy,
                macro_f1: report.macro_f1,
                recall_gap: report.recall_gap,
                mcc: report.mcc,
                density_ave: density.ave,
                density_std: density.std,
            })
        })();
        match metrics {
            Ok(m) => {
                unsafe { *out = m };
                RgcclStatus::Ok
            }
            Err(e) => fail_core(e),
        }
    })
}

/// Closed-form error rates of the optimal variance-only quadratic decision
/// rule for two zero-mean Gaussian classes. Variances must be positive and
/// distinct (use a Monte Carlo estimate for the equal-variance case).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rgccl_qda_closed_form(
    var1: f64,
    var2: f64,
    out: *mut RgcclQda,
) -> RgcclStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RgcclStatus::NullArgument, "out is null");
        }
        match qda_error_closed_form(var1, var2) {
            Ok(q) => {
                unsafe {
                    *out = RgcclQda {
                        p1: q.p1,
                        p2: q.p2,
                        kappa: q.kappa,
                        threshold: q.threshold,
                    }
                };
                RgcclStatus::Ok
            }
            Err(e) => fail_core(e),
        }
    })
}
