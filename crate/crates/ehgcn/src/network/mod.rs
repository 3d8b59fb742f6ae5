//! Dual-space graph network: Euclidean convolution stage, Poincaré-ball
//! layers with learnable per-layer curvature, Möbius fusion, readout and
//! loss, plus adjacency normalization and a deterministic FLOP estimator.
//!
//! The plain operations here work on concrete arrays and manifold points;
//! training and gradient checks run the same mathematics through the model
//! tape so analytic gradients stay in lockstep with the forward pass.

mod model;
mod tape;
mod train;

pub use model::{
    batch_gradients, forward_window, window_gradients, window_loss, ModelGrads, ModelParams,
    PreparedWindow, WindowEval,
};
pub use train::{evaluate, train, EvalReport, TraceRow};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Curvature, GeometryError, ManifoldPoint, TangentVector};
use crate::sparse::SparseMatrix;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network config: {0}")]
    InvalidConfig(String),
    #[error("empty vertex set")]
    EmptyGraph,
    #[error("no events to classify")]
    EmptyWindow,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Pointwise nonlinearity applied in tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: &Array1<f64>) -> Array1<f64> {
        match self {
            Activation::Relu => x.mapv(|v| v.max(0.0)),
            Activation::Identity => x.clone(),
        }
    }
}

/// Which normalized structure feeds message passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationSource {
    Pairwise,
    Hypergraph,
    Both,
}

/// Architecture and optimization settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub euclidean_widths: Vec<usize>,
    pub hyperbolic_widths: Vec<usize>,
    pub num_classes: usize,
    pub initial_c: f64,
    pub learning_rate: f64,
    /// Curvature updates clamp at this floor to stay positive.
    pub c_min: f64,
    /// Steps updating only the Euclidean stage and classifier.
    pub phase1_steps: usize,
    /// Steps updating everything, curvatures included.
    pub phase2_steps: usize,
    pub seed: u64,
    pub aggregation_source: AggregationSource,
    /// Fuse each node with its aggregated neighbours by Möbius addition
    /// after every ball layer.
    pub mobius_fusion: bool,
    /// Skip the ball stack and classify pooled Euclidean features.
    pub euclidean_only: bool,
    pub activation: Activation,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let fail = |m: String| Err(NetworkError::InvalidConfig(m));
        if self.input_dim == 0 {
            return fail("input_dim must be at least 1".into());
        }
        if self.euclidean_widths.is_empty() || self.hyperbolic_widths.is_empty() {
            return fail("at least one layer of each kind is required".into());
        }
        if self.euclidean_widths.iter().any(|&w| w == 0)
            || self.hyperbolic_widths.iter().any(|&w| w == 0)
        {
            return fail("layer widths must be at least 1".into());
        }
        if self.num_classes < 2 {
            return fail(format!("num_classes {} must be at least 2", self.num_classes));
        }
        if !(self.initial_c.is_finite() && self.initial_c > 0.0) {
            return fail(format!("initial_c {} must be positive", self.initial_c));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(format!(
                "learning_rate {} must be non-negative",
                self.learning_rate
            ));
        }
        if !(self.c_min.is_finite() && self.c_min > 0.0 && self.c_min <= self.initial_c) {
            return fail(format!(
                "c_min {} must be in (0, initial_c]",
                self.c_min
            ));
        }
        Ok(())
    }

    /// Width feeding the classifier.
    pub fn classifier_input_dim(&self) -> usize {
        if self.euclidean_only {
            *self.euclidean_widths.last().expect("validated")
        } else {
            *self.hyperbolic_widths.last().expect("validated")
        }
    }

    /// One curvature for the embedding plus one per ball layer.
    pub fn num_curvatures(&self) -> usize {
        self.hyperbolic_widths.len() + 1
    }
}

/// Structure counts a window contributes to the FLOP estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    /// Nonzeros of the aggregation matrix actually used.
    pub agg_nnz: usize,
    pub hyperedges: usize,
    /// Total (vertex, hyperedge) memberships.
    pub incidences: usize,
}

/// Symmetric normalization `D^-1/2 (Adj + I) D^-1/2` where the diagonal is
/// set to one before computing degrees (adding a loop to a vertex that
/// already has one keeps weight 1).
pub fn normalize_pairwise(adj: &SparseMatrix) -> Result<SparseMatrix, NetworkError> {
    let n = adj.n();
    if n == 0 {
        return Err(NetworkError::EmptyGraph);
    }
    let mut degrees = vec![1.0f64; n];
    for i in 0..n {
        for &(j, w) in adj.row(i) {
            if w < 0.0 || !w.is_finite() {
                return Err(NetworkError::InvalidConfig(format!(
                    "adjacency weight {w} at ({i}, {j}) must be finite and non-negative"
                )));
            }
            if j != i {
                degrees[i] += w;
            }
        }
    }
    let mut triplets = Vec::with_capacity(adj.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, 1.0 / degrees[i]));
        for &(j, w) in adj.row(i) {
            if j != i && w > 0.0 {
                triplets.push((i, j, w / (degrees[i] * degrees[j]).sqrt()));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, triplets))
}

/// Clique-style hypergraph normalization
/// `D_v^-1/2 I W_e D_e^-1 I^T D_v^-1/2` with unit hyperedge weights.
/// Vertices in no hyperedge get an identity self-loop row.
pub fn normalize_hypergraph(
    num_vertices: usize,
    hyperedges: &[Vec<usize>],
) -> Result<SparseMatrix, NetworkError> {
    if num_vertices == 0 {
        return Err(NetworkError::EmptyGraph);
    }
    let mut vertex_degree = vec![0usize; num_vertices];
    for (e, edge) in hyperedges.iter().enumerate() {
        if edge.is_empty() {
            return Err(NetworkError::Shape(format!("hyperedge {e} is empty")));
        }
        for &v in edge {
            if v >= num_vertices {
                return Err(NetworkError::Shape(format!(
                    "hyperedge {e} member {v} out of range for {num_vertices} vertices"
                )));
            }
            vertex_degree[v] += 1;
        }
    }
    let mut accum: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for edge in hyperedges {
        let inv_size = 1.0 / edge.len() as f64;
        for &a in edge {
            for &b in edge {
                *accum.entry((a, b)).or_insert(0.0) += inv_size;
            }
        }
    }
    let mut triplets: Vec<(usize, usize, f64)> = accum
        .into_iter()
        .map(|((i, j), v)| {
            let scale = ((vertex_degree[i] * vertex_degree[j]) as f64).sqrt();
            (i, j, v / scale)
        })
        .collect();
    for (v, &d) in vertex_degree.iter().enumerate() {
        if d == 0 {
            triplets.push((v, v, 1.0));
        }
    }
    Ok(SparseMatrix::from_triplets(num_vertices, triplets))
}

/// The aggregation matrix for the configured source; `Both` is the
/// elementwise mean of the two normalizations.
pub fn aggregation_matrix(
    source: AggregationSource,
    adj: &SparseMatrix,
    hyperedges: &[Vec<usize>],
) -> Result<SparseMatrix, NetworkError> {
    match source {
        AggregationSource::Pairwise => normalize_pairwise(adj),
        AggregationSource::Hypergraph => normalize_hypergraph(adj.n(), hyperedges),
        AggregationSource::Both => {
            let p = normalize_pairwise(adj)?;
            let h = normalize_hypergraph(adj.n(), hyperedges)?;
            Ok(SparseMatrix::elementwise_mean(&p, &h))
        }
    }
}

/// `phi(A X W^T + b)` with the bias broadcast over rows.
pub fn euclidean_gcn_layer(
    x: &Array2<f64>,
    a: &SparseMatrix,
    w: &Array2<f64>,
    b: &Array1<f64>,
    act: Activation,
) -> Result<Array2<f64>, NetworkError> {
    if a.n() != x.nrows() {
        return Err(NetworkError::Shape(format!(
            "aggregation is {}x{} but features have {} rows",
            a.n(),
            a.n(),
            x.nrows()
        )));
    }
    if w.ncols() != x.ncols() {
        return Err(NetworkError::Shape(format!(
            "weight takes {} inputs but features have {} columns",
            w.ncols(),
            x.ncols()
        )));
    }
    if b.len() != w.nrows() {
        return Err(NetworkError::Shape(format!(
            "bias has {} entries for {} outputs",
            b.len(),
            w.nrows()
        )));
    }
    let pre = a.mat_apply(x).dot(&w.t()) + b;
    Ok(match act {
        Activation::Relu => pre.mapv(|v| v.max(0.0)),
        Activation::Identity => pre,
    })
}

/// Rows become ball points via the exponential map at the origin.
pub fn to_hyperbolic(x: &Array2<f64>, c: Curvature) -> Vec<ManifoldPoint> {
    x.rows()
        .into_iter()
        .map(|row| TangentVector::new(row.to_owned()).exp_origin(c))
        .collect()
}

/// Möbius linear stage: `(W (x) H_i) (+) exp_o(b)` at the input curvature.
pub fn hyperbolic_transform(
    h: &[ManifoldPoint],
    w: &Array2<f64>,
    b: &Array1<f64>,
    c_in: Curvature,
) -> Result<Vec<ManifoldPoint>, NetworkError> {
    if b.len() != w.nrows() {
        return Err(NetworkError::Shape(format!(
            "bias has {} entries for {} outputs",
            b.len(),
            w.nrows()
        )));
    }
    let bias_point = TangentVector::new(b.clone()).exp_origin(c_in);
    h.iter()
        .map(|p| Ok(p.mobius_matvec(w)?.mobius_add(&bias_point)?))
        .collect()
}

/// Message passing in tangent space:
/// `H_i = exp_o(sum_j A_ij log_o(H_j))`. A row of zeros yields the origin.
pub fn hyperbolic_aggregate(
    h: &[ManifoldPoint],
    a: &SparseMatrix,
    c_in: Curvature,
) -> Vec<ManifoldPoint> {
    assert_eq!(a.n(), h.len(), "aggregation size must match node count");
    let logs: Vec<Array1<f64>> = h.iter().map(|p| p.log_origin().coords().clone()).collect();
    let dim = h.first().map_or(0, ManifoldPoint::dim);
    (0..a.n())
        .map(|i| {
            let mut sum = Array1::zeros(dim);
            for &(j, w) in a.row(i) {
                sum.scaled_add(w, &logs[j]);
            }
            TangentVector::new(sum).exp_origin(c_in)
        })
        .collect()
}

/// Tangent nonlinearity with a curvature change:
/// `exp_o^{c_out}(phi(log_o^{c_in}(H_i)))`.
pub fn hyperbolic_activation(
    h: &[ManifoldPoint],
    act: Activation,
    c_out: Curvature,
) -> Vec<ManifoldPoint> {
    h.iter()
        .map(|p| {
            let t = act.apply(p.log_origin().coords());
            TangentVector::new(t).exp_origin(c_out)
        })
        .collect()
}

/// Fusion step `H_i (+) exp_o(sum_j log_o(H_j))`; the neighbour sum lives
/// in tangent space so the result is order-independent.
pub fn mobius_fusion(
    h: &ManifoldPoint,
    neighbors: &[ManifoldPoint],
) -> Result<ManifoldPoint, GeometryError> {
    if neighbors.is_empty() {
        return Ok(h.clone());
    }
    let mut sum = Array1::zeros(h.dim());
    for p in neighbors {
        sum += p.log_origin().coords();
    }
    let shift = TangentVector::new(sum).exp_origin(h.curvature());
    h.mobius_add(&shift)
}

/// Mean of the node log maps; the window's tangent-space summary.
pub fn readout_pool(h: &[ManifoldPoint]) -> Result<Array1<f64>, NetworkError> {
    if h.is_empty() {
        return Err(NetworkError::EmptyWindow);
    }
    let dim = h[0].dim();
    let mut sum = Array1::zeros(dim);
    for p in h {
        sum += p.log_origin().coords();
    }
    Ok(sum / h.len() as f64)
}

/// Affine classifier over the pooled tangent vector.
pub fn classify(
    pooled: &Array1<f64>,
    w_out: &Array2<f64>,
    b_out: &Array1<f64>,
) -> Result<Array1<f64>, NetworkError> {
    if w_out.ncols() != pooled.len() {
        return Err(NetworkError::Shape(format!(
            "classifier takes {} inputs but pooled vector has {}",
            w_out.ncols(),
            pooled.len()
        )));
    }
    Ok(w_out.dot(pooled) + b_out)
}

/// `ln sum_k exp(x_k)` computed against the max for stability.
pub fn log_sum_exp(x: &Array1<f64>) -> f64 {
    let m = x.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    m + x.mapv(|v| (v - m).exp()).sum().ln()
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let lse = log_sum_exp(logits);
    logits.mapv(|v| (v - lse).exp())
}

/// Softmax cross-entropy; `ln(num_classes)` for uniform logits.
pub fn cross_entropy(logits: &Array1<f64>, label: usize) -> f64 {
    assert!(label < logits.len(), "label out of range");
    log_sum_exp(logits) - logits[label]
}

/// Gradient-descent update on a curvature magnitude with a positive floor.
pub fn curvature_step(c: f64, grad: f64, eta: f64, c_min: f64) -> f64 {
    (c - eta * grad).max(c_min)
}

/// Per-stage FLOP counts under the fixed conventions below.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlopReport {
    pub entries: Vec<(String, u64)>,
    pub total: u64,
}

/// `2 n d_in d_out` per linear or Möbius matrix-vector stage.
pub fn linear_flops(nodes: u64, d_in: u64, d_out: u64) -> u64 {
    2 * nodes * d_in * d_out
}

/// `2 nnz d` per sparse weighted aggregation at width d.
pub fn aggregation_flops(nnz: u64, d: u64) -> u64 {
    2 * nnz * d
}

/// `6 n d` per map or activation application (exp, log, bias shift, phi);
/// a fixed transcendental-cost convention.
pub fn map_flops(nodes: u64, d: u64) -> u64 {
    6 * nodes * d
}

/// Deterministic per-stage FLOP estimate for one window. Every per-node
/// and per-nonzero term is linear in the window counts; an empty window
/// costs nothing.
pub fn estimate_flops(cfg: &NetworkConfig, stats: &GraphStats) -> FlopReport {
    let mut entries: Vec<(String, u64)> = Vec::new();
    if stats.nodes == 0 {
        return FlopReport { entries, total: 0 };
    }
    let n = stats.nodes as u64;
    let nnz = stats.agg_nnz as u64;
    let mut d_prev = cfg.input_dim as u64;
    for (k, &w) in cfg.euclidean_widths.iter().enumerate() {
        let w = w as u64;
        let cost = aggregation_flops(nnz, d_prev) + linear_flops(n, d_prev, w) + map_flops(n, w);
        entries.push((format!("euclidean_layer_{k}"), cost));
        d_prev = w;
    }
    if !cfg.euclidean_only {
        entries.push(("to_hyperbolic".into(), map_flops(n, d_prev)));
        for (k, &w) in cfg.hyperbolic_widths.iter().enumerate() {
            let w = w as u64;
            // transform: log + matvec + exp + bias shift
            let transform = map_flops(n, d_prev)
                + linear_flops(n, d_prev, w)
                + map_flops(n, w)
                + map_flops(n, w);
            // aggregate: log + weighted sum + exp
            let aggregate = map_flops(n, w) + aggregation_flops(nnz, w) + map_flops(n, w);
            // activation: log + phi + exp
            let activation = 3 * map_flops(n, w);
            entries.push((format!("hyperbolic_layer_{k}"), transform + aggregate + activation));
            if cfg.mobius_fusion {
                let sum = aggregation_flops(nnz.saturating_sub(n), w);
                let fusion = map_flops(n, w) + sum + map_flops(n, w) + map_flops(n, w);
                entries.push((format!("fusion_{k}"), fusion));
            }
            d_prev = w;
        }
        entries.push((
            "readout_pool".into(),
            map_flops(n, d_prev) + aggregation_flops(n, d_prev),
        ));
    } else {
        entries.push(("readout_pool".into(), aggregation_flops(n, d_prev)));
    }
    entries.push((
        "classifier".into(),
        linear_flops(1, d_prev, cfg.num_classes as u64),
    ));
    let total = entries.iter().map(|(_, v)| v).sum();
    FlopReport { entries, total }
}
