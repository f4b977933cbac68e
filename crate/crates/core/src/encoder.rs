//! Shared-parameter graph encoders.
//!
//! Two architectures over one weight set abstraction: an SGC-style encoder
//! `Z = σ(Â^k X W)` whose propagation depth k is a config knob, and a
//! two-layer GCN `Z = σ(Â relu(Â X W1) W2)` that always uses one hop per
//! layer. Both can row-normalize the output. The same parameters encode an
//! original graph and any of its coarsenings; embeddings of a coarse graph
//! are lifted back to original nodes by cluster lookup.
//!
//! Backpropagation is hand-rolled and returns parameter gradients given
//! ∂L/∂Z, so training composes losses without an autodiff dependency.

use crate::coarsen::Partition;
use crate::graph::{propagate, EmbeddingMatrix, NormKind, PropagationOperator};
use crate::{Error, Result};
use serde::Serialize;
use ndarray::{Array2, ArrayView2, Axis};
use std::io::{Read as _, Write as _};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(&self, s: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => s.clone(),
            Activation::Relu => s.mapv(|v| v.max(0.0)),
        }
    }

    /// Elementwise derivative evaluated at the pre-activation.
    fn mask(&self, s: &Array2<f64>, g: &mut Array2<f64>) {
        if let Activation::Relu = self {
            g.zip_mut_with(s, |gv, sv| {
                if *sv <= 0.0 {
                    *gv = 0.0;
                }
            });
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation '{other}' (expected identity | relu)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Arch {
    /// Single weight matrix after k propagation steps.
    Sgc,
    /// Two-layer network, one propagation hop per layer; ignores k.
    Gcn2 { hidden: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct EncoderConfig {
    pub arch: Arch,
    pub k: usize,
    pub norm_kind: NormKind,
    pub activation: Activation,
    pub dim_out: usize,
    pub row_normalize_output: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            arch: Arch::Sgc,
            k: 2,
            norm_kind: NormKind::RandomWalk,
            activation: Activation::Identity,
            dim_out: 64,
            row_normalize_output: true,
        }
    }
}

/// Encoder weights. `w2` is present only for the two-layer architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w1: Array2<f64>,
    pub w2: Option<Array2<f64>>,
    pub init_seed: u64,
}

/// Uniform ±1/√fan_in initialization on derived streams, one per layer.
pub fn init_params(config: &EncoderConfig, dim_in: usize, seed: u64) -> Result<ModelParams> {
    if dim_in == 0 || config.dim_out == 0 {
        return Err(Error::InvalidParameter(
            "encoder dimensions must be positive".into(),
        ));
    }
    let sample = |rows: usize, cols: usize, tag: &str| {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, tag, 0);
        let bound = 1.0 / (rows as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
    };
    match config.arch {
        Arch::Sgc => Ok(ModelParams {
            w1: sample(dim_in, config.dim_out, "init-w1"),
            w2: None,
            init_seed: seed,
        }),
        Arch::Gcn2 { hidden } => {
            if hidden == 0 {
                return Err(Error::InvalidParameter(
                    "hidden width must be positive".into(),
                ));
            }
            Ok(ModelParams {
                w1: sample(dim_in, hidden, "init-w1"),
                w2: Some(sample(hidden, config.dim_out, "init-w2")),
                init_seed: seed,
            })
        }
    }
}

impl ModelParams {
    pub fn dim_in(&self) -> usize {
        self.w1.nrows()
    }

    pub fn dim_out(&self) -> usize {
        self.w2.as_ref().unwrap_or(&self.w1).ncols()
    }

    /// Largest singular value across layers, by alternating power iteration.
    pub fn spectral_norm(&self) -> f64 {
        let mut best = matrix_spectral_norm(&self.w1);
        if let Some(w2) = &self.w2 {
            best = best.max(matrix_spectral_norm(w2));
        }
        best
    }

    const MAGIC: &'static [u8; 8] = b"RGCCLPM\0";

    /// Flat little-endian binary serialization of all layers.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        let mut buf = Vec::new();
        buf.extend_from_slice(Self::MAGIC);
        buf.extend_from_slice(&1u32.to_le_bytes());
        let layers: u32 = if self.w2.is_some() { 2 } else { 1 };
        buf.extend_from_slice(&layers.to_le_bytes());
        buf.extend_from_slice(&self.init_seed.to_le_bytes());
        let mut push = |w: &Array2<f64>| {
            buf.extend_from_slice(&(w.nrows() as u64).to_le_bytes());
            buf.extend_from_slice(&(w.ncols() as u64).to_le_bytes());
            for v in w.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        };
        push(&self.w1);
        if let Some(w2) = &self.w2 {
            push(w2);
        }
        f.write_all(&buf).map_err(io)
    }

    pub fn load(path: &Path) -> Result<ModelParams> {
        let io = |e| Error::Io {
            path: path.display().to_string(),
            source: e,
        };
        let parse = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: msg.into(),
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(io)?
            .read_to_end(&mut bytes)
            .map_err(io)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, len: usize| -> Result<&[u8]> {
            if *pos + len > bytes.len() {
                return Err(parse("truncated parameter file"));
            }
            let s = &bytes[*pos..*pos + len];
            *pos += len;
            Ok(s)
        };
        if take(&mut pos, 8)? != Self::MAGIC {
            return Err(parse("not a parameter file (bad magic)"));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if version != 1 {
            return Err(parse(&format!("unsupported parameter version {version}")));
        }
        let layers = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if layers != 1 && layers != 2 {
            return Err(parse(&format!("bad layer count {layers}")));
        }
        let init_seed = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let read_matrix = |pos: &mut usize| -> Result<Array2<f64>> {
            let rows = u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()) as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()));
            }
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| parse(&format!("bad matrix shape: {e}")))
        };
        let w1 = read_matrix(&mut pos)?;
        let w2 = if layers == 2 {
            Some(read_matrix(&mut pos)?)
        } else {
            None
        };
        if pos != bytes.len() {
            return Err(parse("trailing bytes in parameter file"));
        }
        Ok(ModelParams { w1, w2, init_seed })
    }
}

fn matrix_spectral_norm(w: &Array2<f64>) -> f64 {
    use rand::Rng;
    let mut rng = crate::rng::stream(0x5D17_1E5C_0B5E_55ED, "spectral-norm", 0);
    let mut v: Vec<f64> = (0..w.ncols()).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut sigma = 0.0;
    for _ in 0..1000 {
        // u = W v, then v = W^T u, tracking ‖u‖ as the singular value.
        let mut u = vec![0.0; w.nrows()];
        for i in 0..w.nrows() {
            u[i] = (0..w.ncols()).map(|j| w[[i, j]] * v[j]).sum();
        }
        let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nu == 0.0 {
            return 0.0;
        }
        for a in &mut u {
            *a /= nu;
        }
        let mut vt = vec![0.0; w.ncols()];
        for j in 0..w.ncols() {
            vt[j] = (0..w.nrows()).map(|i| w[[i, j]] * u[i]).sum();
        }
        let nv = vt.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        for a in &mut vt {
            *a /= nv;
        }
        v = vt;
        if (nv - sigma).abs() <= 1e-12 * nv.max(1.0) {
            return nv;
        }
        sigma = nv;
    }
    sigma
}

/// Input to the weight layers: Â^k X for the single-layer architecture, Â X
/// for the two-layer one (its second hop happens inside the forward pass).
pub fn propagated_input(
    op: &PropagationOperator,
    x: &ArrayView2<f64>,
    config: &EncoderConfig,
) -> Array2<f64> {
    match config.arch {
        Arch::Sgc => propagate(op, x, config.k),
        Arch::Gcn2 { .. } => propagate(op, x, 1),
    }
}

/// Intermediate values retained for backpropagation.
pub struct ForwardCache {
    s1: Option<Array2<f64>>,
    t: Option<Array2<f64>>,
    s_out: Array2<f64>,
    row_norms: Option<Vec<f64>>,
}

/// Forward pass from a propagated input. The two-layer architecture also
/// needs the operator for its second hop.
pub fn forward(
    op: &PropagationOperator,
    propagated: &ArrayView2<f64>,
    params: &ModelParams,
    config: &EncoderConfig,
) -> Result<(EmbeddingMatrix, ForwardCache)> {
    if propagated.ncols() != params.w1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "input width {} vs first layer fan-in {}",
            propagated.ncols(),
            params.w1.nrows()
        )));
    }
    let (s_out, s1, t) = match (config.arch, &params.w2) {
        (Arch::Sgc, None) => (propagated.dot(&params.w1), None, None),
        (Arch::Gcn2 { .. }, Some(w2)) => {
            let s1 = propagated.dot(&params.w1);
            let h1 = Activation::Relu.apply(&s1);
            let t = op.apply(&h1.view());
            let s_out = t.dot(w2);
            (s_out, Some(s1), Some(t))
        }
        _ => {
            return Err(Error::InvalidParameter(
                "architecture and parameter layer count disagree".into(),
            ))
        }
    };
    let y = config.activation.apply(&s_out);
    let (z, row_norms) = if config.row_normalize_output {
        let mut z = y;
        let mut norms = Vec::with_capacity(z.nrows());
        for mut row in z.axis_iter_mut(Axis(0)) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.map_inplace(|v| *v /= norm);
            }
            norms.push(norm);
        }
        (z, Some(norms))
    } else {
        (y, None)
    };
    Ok((
        z,
        ForwardCache {
            s1,
            t,
            s_out,
            row_norms,
        },
    ))
}

/// Parameter gradients, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub w1: Array2<f64>,
    pub w2: Option<Array2<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> ParamGrads {
        ParamGrads {
            w1: Array2::zeros(params.w1.raw_dim()),
            w2: params.w2.as_ref().map(|w| Array2::zeros(w.raw_dim())),
        }
    }

    pub fn accumulate(&mut self, other: &ParamGrads) {
        self.w1 += &other.w1;
        if let (Some(a), Some(b)) = (self.w2.as_mut(), other.w2.as_ref()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.w1.mapv_inplace(|v| v * factor);
        if let Some(w2) = self.w2.as_mut() {
            w2.mapv_inplace(|v| v * factor);
        }
    }
}

/// Backpropagates ∂L/∂Z (the normalized output) to parameter gradients for
/// one view. Rows that normalized a zero vector propagate zero gradient.
pub fn backward(
    op: &PropagationOperator,
    propagated: &ArrayView2<f64>,
    params: &ModelParams,
    config: &EncoderConfig,
    cache: &ForwardCache,
    z: &ArrayView2<f64>,
    g_z: &ArrayView2<f64>,
) -> Result<ParamGrads> {
    if g_z.raw_dim() != z.raw_dim() {
        return Err(Error::DimensionMismatch(
            "output gradient shape differs from output shape".into(),
        ));
    }
    let mut g = g_z.to_owned();
    if let Some(norms) = &cache.row_norms {
        // z = y/‖y‖ has Jacobian (I − z zᵀ)/‖y‖ per row.
        for (i, &r) in norms.iter().enumerate() {
            if r > 0.0 {
                let zi = z.row(i);
                let dot: f64 = g.row(i).iter().zip(zi.iter()).map(|(a, b)| a * b).sum();
                let mut gr = g.row_mut(i);
                for (gv, zv) in gr.iter_mut().zip(zi.iter()) {
                    *gv = (*gv - dot * zv) / r;
                }
            } else {
                g.row_mut(i).fill(0.0);
            }
        }
    }
    config.activation.mask(&cache.s_out, &mut g);
    match (config.arch, &params.w2) {
        (Arch::Sgc, None) => Ok(ParamGrads {
            w1: propagated.t().dot(&g),
            w2: None,
        }),
        (Arch::Gcn2 { .. }, Some(w2)) => {
            let t = cache.t.as_ref().expect("two-layer cache");
            let s1 = cache.s1.as_ref().expect("two-layer cache");
            let w2_grad = t.t().dot(&g);
            let g_t = g.dot(&w2.t());
            let mut g_h1 = op.apply_transpose(&g_t.view());
            Activation::Relu.mask(s1, &mut g_h1);
            Ok(ParamGrads {
                w1: propagated.t().dot(&g_h1),
                w2: Some(w2_grad),
            })
        }
        _ => Err(Error::InvalidParameter(
            "architecture and parameter layer count disagree".into(),
        )),
    }
}

/// Lifts coarse-node embeddings back to original nodes: row u of the result
/// is the embedding of u's cluster.
pub fn lift(h: &ArrayView2<f64>, partition: &Partition) -> Result<EmbeddingMatrix> {
    if h.nrows() != partition.num_clusters {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {} clusters",
            h.nrows(),
            partition.num_clusters
        )));
    }
    let mut z = Array2::zeros((partition.assign.len(), h.ncols()));
    for (u, &c) in partition.assign.iter().enumerate() {
        z.row_mut(u).assign(&h.row(c));
    }
    Ok(z)
}

/// Adjoint of [`lift`]: sums per-node gradient rows over each cluster,
/// mapping ∂L/∂(lifted) to ∂L/∂(coarse embedding).
pub fn lift_transpose(g: &ArrayView2<f64>, partition: &Partition) -> Result<EmbeddingMatrix> {
    if g.nrows() != partition.assign.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gradient rows for {} nodes",
            g.nrows(),
            partition.assign.len()
        )));
    }
    let mut out = Array2::zeros((partition.num_clusters, g.ncols()));
    for (u, &c) in partition.assign.iter().enumerate() {
        let mut row = out.row_mut(c);
        row += &g.row(u);
    }
    Ok(out)
}
