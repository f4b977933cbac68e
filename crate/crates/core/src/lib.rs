//! Desk-scale laboratory for Random Graph Coarsening Contrastive Learning (RGCCL).
//!
//! The crate covers the full pipeline: synthetic two-block graph generation
//! ([`csbm`]), weighted random edge-contraction coarsening ([`coarsen`]), a
//! shared-parameter linear graph encoder ([`encoder`]), the contrastive
//! objective ([`loss`]), a deterministic training loop ([`trainer`]), and the
//! diagnostics used to study community bias: spectral contraction rates
//! ([`spectral`]) and classification / density / fairness metrics ([`eval`]).
//!
//! Everything is deterministic given the seeds carried in the configs; RNG
//! streams are derived with [`rng::derive_seed`] so independent components
//! never share a stream.

pub mod csbm;
pub mod coarsen;
pub mod config;
pub mod encoder;
pub mod eval;
pub mod graph;
pub mod json;
pub mod loss;
pub mod rng;
pub mod spectral;
pub mod trainer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range for n = {n}")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("eigensolver did not converge: residual {residual:.3e} after {iterations} iterations (last estimate {estimate})")]
    NoConvergence {
        estimate: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("class {0} has too few members")]
    DegenerateClass(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Parallelism cap: `RGCCL_THREADS` when set (minimum 1), otherwise the
/// number of available cores.
pub fn max_threads() -> usize {
    std::env::var("RGCCL_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}
