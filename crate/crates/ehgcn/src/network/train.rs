//! Two-phase full-batch training and held-out evaluation.
//!
//! Phase one moves only the Euclidean stage and the classifier; phase two
//! unfreezes the ball layers and their curvatures. Updates are plain
//! gradient descent, curvatures stepping through the clamped rule so they
//! stay positive. With fixed seeds the whole loop is deterministic: there
//! is no sampling, and gradients accumulate in window order.

use super::model::{batch_gradients, forward_window, ModelParams, PreparedWindow};
use super::{curvature_step, NetworkConfig, NetworkError};

/// One optimization step's pre-update state.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub curvatures: Vec<f64>,
}

/// Aggregate forward-pass results over a window set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub predictions: Vec<usize>,
}

/// Trains a fresh model on the windows and returns it with the per-step
/// loss trace. Requires at least two classes in the data.
pub fn train(
    windows: &[PreparedWindow],
    cfg: &NetworkConfig,
) -> Result<(ModelParams, Vec<TraceRow>), NetworkError> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(NetworkError::EmptyWindow);
    }
    let mut seen = std::collections::BTreeSet::new();
    for w in windows {
        seen.insert(w.label);
    }
    if seen.len() < 2 {
        return Err(NetworkError::InvalidConfig(
            "training data must contain at least two classes".into(),
        ));
    }

    let mut params = ModelParams::init(cfg);
    let mut trace = Vec::new();
    let lr = cfg.learning_rate;
    let total = cfg.phase1_steps + cfg.phase2_steps;
    for step in 0..total {
        let (grads, evals) = batch_gradients(&params, cfg, windows).map_err(|e| match e {
            NetworkError::NonFinite(what) => {
                NetworkError::NonFinite(format!("training diverged at step {step}: {what}"))
            }
            other => other,
        })?;
        let loss = evals.iter().map(|e| e.loss).sum::<f64>() / evals.len() as f64;
        let correct = evals
            .iter()
            .zip(windows)
            .filter(|(e, w)| e.predicted == w.label)
            .count();
        trace.push(TraceRow {
            step,
            loss,
            accuracy: correct as f64 / windows.len() as f64,
            curvatures: params.curvatures.clone(),
        });

        for ((w, b), (gw, gb)) in params.euclid.iter_mut().zip(&grads.euclid) {
            w.scaled_add(-lr, gw);
            b.scaled_add(-lr, gb);
        }
        params.w_out.scaled_add(-lr, &grads.w_out);
        params.b_out.scaled_add(-lr, &grads.b_out);
        if step >= cfg.phase1_steps {
            for ((w, b), (gw, gb)) in params.hyper.iter_mut().zip(&grads.hyper) {
                w.scaled_add(-lr, gw);
                b.scaled_add(-lr, gb);
            }
            for (c, &g) in params.curvatures.iter_mut().zip(&grads.curvatures) {
                *c = curvature_step(*c, g, lr, cfg.c_min);
            }
        }
    }
    Ok((params, trace))
}

/// Forward pass over a window set.
pub fn evaluate(
    params: &ModelParams,
    cfg: &NetworkConfig,
    windows: &[PreparedWindow],
) -> Result<EvalReport, NetworkError> {
    if windows.is_empty() {
        return Err(NetworkError::EmptyWindow);
    }
    let mut predictions = Vec::with_capacity(windows.len());
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for w in windows {
        let eval = forward_window(params, cfg, w)?;
        if eval.predicted == w.label {
            correct += 1;
        }
        loss_sum += eval.loss;
        predictions.push(eval.predicted);
    }
    Ok(EvalReport {
        accuracy: correct as f64 / windows.len() as f64,
        mean_loss: loss_sum / windows.len() as f64,
        predictions,
    })
}
