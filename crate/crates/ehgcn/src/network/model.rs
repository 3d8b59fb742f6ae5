//! Model parameters and the differentiable forward pass.
//!
//! One window becomes one tape: the node-feature matrix flows through the
//! Euclidean stage, gets lifted onto the ball, passes through the
//! hyperbolic layers, and pools into logits, with each layer a handful of
//! matrix-valued tape nodes. Curvatures enter the tape as ordinary scalar
//! leaves, so one backward sweep yields every gradient at once, including
//! each layer's curvature.

use std::rc::Rc;

use ndarray::{Array1, Array2, Axis};

use super::tape::{NodeId, Tape};
use super::{Activation, GraphStats, NetworkConfig, NetworkError};
use crate::seed;
use crate::sparse::SparseMatrix;

/// One classification instance: per-node features, the normalized
/// aggregation matrix, the class label, and size counts for FLOP reports.
#[derive(Debug, Clone)]
pub struct PreparedWindow {
    pub features: Array2<f64>,
    pub agg: SparseMatrix,
    pub label: usize,
    pub stats: GraphStats,
}

/// All trainable state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Euclidean stage weights and biases, outermost first.
    pub euclid: Vec<(Array2<f64>, Array1<f64>)>,
    /// Ball layer weights and tangent-space biases.
    pub hyper: Vec<(Array2<f64>, Array1<f64>)>,
    /// Embedding curvature followed by each layer's output curvature.
    pub curvatures: Vec<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

fn init_matrix(rows: usize, cols: usize, rng_seed: u64) -> Array2<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    let bound = 1.0 / (cols as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

impl ModelParams {
    /// Seeded uniform init in `[-1/sqrt(d_in), +1/sqrt(d_in)]`, zero
    /// biases, every curvature at `initial_c`.
    pub fn init(cfg: &NetworkConfig) -> ModelParams {
        let mut matrix_index = 0u64;
        let mut next = |rows: usize, cols: usize| {
            let m = init_matrix(rows, cols, seed::derive(cfg.seed, "init", matrix_index));
            matrix_index += 1;
            m
        };
        let mut euclid = Vec::new();
        let mut d_prev = cfg.input_dim;
        for &w in &cfg.euclidean_widths {
            euclid.push((next(w, d_prev), Array1::zeros(w)));
            d_prev = w;
        }
        let mut hyper = Vec::new();
        for &w in &cfg.hyperbolic_widths {
            hyper.push((next(w, d_prev), Array1::zeros(w)));
            d_prev = w;
        }
        let d_cls = cfg.classifier_input_dim();
        ModelParams {
            euclid,
            hyper,
            curvatures: vec![cfg.initial_c; cfg.num_curvatures()],
            w_out: next(cfg.num_classes, d_cls),
            b_out: Array1::zeros(cfg.num_classes),
        }
    }

    pub fn num_params(&self) -> usize {
        self.flatten().len()
    }

    /// Fixed-order serialization of every parameter: per Euclidean layer
    /// the row-major weight then bias, the same for ball layers, then
    /// curvatures, classifier weight, classifier bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.euclid.iter().chain(&self.hyper) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out.extend(&self.curvatures);
        out.extend(self.w_out.iter());
        out.extend(self.b_out.iter());
        out
    }

    /// Inverse of [`flatten`]; panics on length mismatch.
    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut pos = 0usize;
        for (w, b) in self.euclid.iter_mut().chain(self.hyper.iter_mut()) {
            for slot in w.iter_mut().chain(b.iter_mut()) {
                *slot = flat[pos];
                pos += 1;
            }
        }
        for slot in self
            .curvatures
            .iter_mut()
            .chain(self.w_out.iter_mut())
            .chain(self.b_out.iter_mut())
        {
            *slot = flat[pos];
            pos += 1;
        }
        assert_eq!(pos, flat.len(), "flat vector length mismatch");
    }
}

/// Gradients in the same shapes and order as [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub euclid: Vec<(Array2<f64>, Array1<f64>)>,
    pub hyper: Vec<(Array2<f64>, Array1<f64>)>,
    pub curvatures: Vec<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> ModelGrads {
        let z = |v: &Vec<(Array2<f64>, Array1<f64>)>| {
            v.iter()
                .map(|(w, b)| (Array2::zeros(w.dim()), Array1::zeros(b.len())))
                .collect()
        };
        ModelGrads {
            euclid: z(&params.euclid),
            hyper: z(&params.hyper),
            curvatures: vec![0.0; params.curvatures.len()],
            w_out: Array2::zeros(params.w_out.dim()),
            b_out: Array1::zeros(params.b_out.len()),
        }
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, other: &ModelGrads, k: f64) {
        for (dst, src) in self.euclid.iter_mut().zip(&other.euclid) {
            dst.0.scaled_add(k, &src.0);
            dst.1.scaled_add(k, &src.1);
        }
        for (dst, src) in self.hyper.iter_mut().zip(&other.hyper) {
            dst.0.scaled_add(k, &src.0);
            dst.1.scaled_add(k, &src.1);
        }
        for (dst, src) in self.curvatures.iter_mut().zip(&other.curvatures) {
            *dst += k * src;
        }
        self.w_out.scaled_add(k, &other.w_out);
        self.b_out.scaled_add(k, &other.b_out);
    }

    /// Same order as [`ModelParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.euclid.iter().chain(&self.hyper) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out.extend(&self.curvatures);
        out.extend(self.w_out.iter());
        out.extend(self.b_out.iter());
        out
    }
}

/// Forward-pass summary for one window.
#[derive(Debug, Clone)]
pub struct WindowEval {
    pub loss: f64,
    pub predicted: usize,
    pub logits: Array1<f64>,
}

struct TapeModel {
    tape: Tape,
    euclid_ids: Vec<(NodeId, NodeId)>,
    hyper_ids: Vec<(NodeId, NodeId)>,
    curvature_ids: Vec<NodeId>,
    w_out_id: NodeId,
    b_out_id: NodeId,
    logits: NodeId,
    loss: NodeId,
}

fn row_leaf(tape: &mut Tape, v: &Array1<f64>) -> NodeId {
    tape.leaf(v.clone().insert_axis(Axis(0)))
}

/// Unweighted off-diagonal adjacency: which vertices contribute fused
/// neighbor shifts. Rows without neighbors stay empty, which the Mobius
/// addition maps to the identity shift.
fn fusion_matrix(agg: &SparseMatrix) -> SparseMatrix {
    let n = agg.n();
    let mut triplets = Vec::new();
    for i in 0..n {
        for &(j, _) in agg.row(i) {
            if j != i {
                triplets.push((i, j, 1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, triplets)
}

fn validate_window(
    cfg: &NetworkConfig,
    window: &PreparedWindow,
) -> Result<(), NetworkError> {
    let n = window.features.nrows();
    if n == 0 {
        return Err(NetworkError::EmptyWindow);
    }
    if window.features.ncols() != cfg.input_dim {
        return Err(NetworkError::Shape(format!(
            "window features have {} columns, config expects {}",
            window.features.ncols(),
            cfg.input_dim
        )));
    }
    if window.agg.n() != n {
        return Err(NetworkError::Shape(format!(
            "aggregation is over {} vertices but window has {} nodes",
            window.agg.n(),
            n
        )));
    }
    if window.label >= cfg.num_classes {
        return Err(NetworkError::Shape(format!(
            "label {} out of range for {} classes",
            window.label, cfg.num_classes
        )));
    }
    Ok(())
}

fn build_tape(
    params: &ModelParams,
    cfg: &NetworkConfig,
    window: &PreparedWindow,
) -> Result<TapeModel, NetworkError> {
    validate_window(cfg, window)?;
    let n = window.features.nrows();
    let mut tape = Tape::new();

    let euclid_ids: Vec<(NodeId, NodeId)> = params
        .euclid
        .iter()
        .map(|(w, b)| (tape.leaf(w.clone()), row_leaf(&mut tape, b)))
        .collect();
    let hyper_ids: Vec<(NodeId, NodeId)> = params
        .hyper
        .iter()
        .map(|(w, b)| (tape.leaf(w.clone()), row_leaf(&mut tape, b)))
        .collect();
    let curvature_ids: Vec<NodeId> = params
        .curvatures
        .iter()
        .map(|&c| tape.scalar_leaf(c))
        .collect();
    let w_out_id = tape.leaf(params.w_out.clone());
    let b_out_id = row_leaf(&mut tape, &params.b_out);

    let agg = Rc::new(window.agg.clone());
    let mut x = tape.leaf(window.features.clone());

    for &(w_id, b_id) in &euclid_ids {
        let summed = tape.agg_mul(Rc::clone(&agg), x);
        let lin = tape.matmul(summed, w_id);
        let pre = tape.add_row(lin, b_id);
        x = match cfg.activation {
            Activation::Relu => tape.relu(pre),
            Activation::Identity => pre,
        };
    }

    if !cfg.euclidean_only {
        let c0 = curvature_ids[0];
        x = tape.exp_map_o(x, c0);
        for (k, &(w_id, b_id)) in hyper_ids.iter().enumerate() {
            let c_in = curvature_ids[k];
            let c_out = curvature_ids[k + 1];
            // Transform: (W (x) H) (+) exp(b) at c_in.
            let bias_point = tape.exp_map_o(b_id, c_in);
            let bias_rows = tape.repeat_rows(bias_point, n);
            let t = tape.log_map_o(x, c_in);
            let wt = tape.matmul(t, w_id);
            let p = tape.exp_map_o(wt, c_in);
            let transformed = tape.mobius_add(p, bias_rows, c_in);
            // Aggregate in tangent space; the exp/log pair around the sum
            // cancels exactly (independently of c_in), so the activation
            // applies straight to the summed tangent vectors.
            let logs = tape.log_map_o(transformed, c_in);
            let summed = tape.agg_mul(Rc::clone(&agg), logs);
            let act = match cfg.activation {
                Activation::Relu => tape.relu(summed),
                Activation::Identity => summed,
            };
            x = tape.exp_map_o(act, c_out);
            if cfg.mobius_fusion {
                let shifts = Rc::new(fusion_matrix(&window.agg));
                let out_logs = tape.log_map_o(x, c_out);
                let fused = tape.agg_mul(shifts, out_logs);
                let shift = tape.exp_map_o(fused, c_out);
                x = tape.mobius_add(x, shift, c_out);
            }
        }
        let c_last = *curvature_ids.last().expect("at least embedding curvature");
        x = tape.log_map_o(x, c_last);
    }

    let pooled = tape.mean_rows(x);
    let lin = tape.matmul(pooled, w_out_id);
    let logits = tape.add_row(lin, b_out_id);
    let loss = tape.cross_entropy(logits, window.label);

    Ok(TapeModel {
        tape,
        euclid_ids,
        hyper_ids,
        curvature_ids,
        w_out_id,
        b_out_id,
        logits,
        loss,
    })
}

fn eval_from(model: &TapeModel) -> WindowEval {
    let logits = model.tape.value(model.logits).row(0).to_owned();
    let predicted = logits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
        .map(|(i, _)| i)
        .unwrap_or(0);
    WindowEval {
        loss: model.tape.scalar(model.loss),
        predicted,
        logits,
    }
}

fn check_finite(model: &TapeModel) -> Result<(), NetworkError> {
    // Scan every node, not just the loss: max-based operations downstream
    // can absorb a NaN and leave the loss finite.
    if let Some((node, op)) = model.tape.first_non_finite() {
        return Err(NetworkError::NonFinite(format!("{op} (node {node})")));
    }
    Ok(())
}

/// Forward pass only.
pub fn forward_window(
    params: &ModelParams,
    cfg: &NetworkConfig,
    window: &PreparedWindow,
) -> Result<WindowEval, NetworkError> {
    let model = build_tape(params, cfg, window)?;
    check_finite(&model)?;
    Ok(eval_from(&model))
}

/// Loss value alone; the finite-difference probes use this.
pub fn window_loss(
    params: &ModelParams,
    cfg: &NetworkConfig,
    window: &PreparedWindow,
) -> Result<f64, NetworkError> {
    Ok(forward_window(params, cfg, window)?.loss)
}

/// One backward sweep for one window.
pub fn window_gradients(
    params: &ModelParams,
    cfg: &NetworkConfig,
    window: &PreparedWindow,
) -> Result<(ModelGrads, WindowEval), NetworkError> {
    let model = build_tape(params, cfg, window)?;
    check_finite(&model)?;
    let grads = model.tape.backward(model.loss);
    let take_pair = |(w_id, b_id): (NodeId, NodeId)| {
        (grads[w_id.0].clone(), grads[b_id.0].row(0).to_owned())
    };
    let out = ModelGrads {
        euclid: model.euclid_ids.iter().map(|&ids| take_pair(ids)).collect(),
        hyper: model.hyper_ids.iter().map(|&ids| take_pair(ids)).collect(),
        curvatures: model
            .curvature_ids
            .iter()
            .map(|&id| grads[id.0][[0, 0]])
            .collect(),
        w_out: grads[model.w_out_id.0].clone(),
        b_out: grads[model.b_out_id.0].row(0).to_owned(),
    };
    Ok((out, eval_from(&model)))
}

/// Mean gradient over a batch plus per-window evaluations, accumulated in
/// window order.
pub fn batch_gradients(
    params: &ModelParams,
    cfg: &NetworkConfig,
    windows: &[PreparedWindow],
) -> Result<(ModelGrads, Vec<WindowEval>), NetworkError> {
    if windows.is_empty() {
        return Err(NetworkError::EmptyWindow);
    }
    let mut total = ModelGrads::zeros_like(params);
    let mut evals = Vec::with_capacity(windows.len());
    let scale = 1.0 / windows.len() as f64;
    for window in windows {
        let (g, eval) = window_gradients(params, cfg, window)?;
        total.add_scaled(&g, scale);
        evals.push(eval);
    }
    Ok((total, evals))
}
