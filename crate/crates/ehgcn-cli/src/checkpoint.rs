//! Version-tagged JSON checkpoints: trained parameters plus the full
//! run configuration, so evaluation reproduces training-time
//! preprocessing without any external files.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use ehgcn::network::ModelParams;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerParams {
    /// Row-major weight matrix, one inner vector per output row.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointParams {
    pub euclid: Vec<LayerParams>,
    pub hyper: Vec<LayerParams>,
    pub curvatures: Vec<f64>,
    pub w_out: Vec<Vec<f64>>,
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub run: RunConfig,
    pub params: CheckpointParams,
}

fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::data(format!("checkpoint: empty matrix in {what}")));
    }
    let mut flat = Vec::with_capacity(nrows * ncols);
    for row in rows {
        if row.len() != ncols {
            return Err(CliError::data(format!("checkpoint: ragged matrix in {what}")));
        }
        flat.extend_from_slice(row);
    }
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| CliError::data(format!("checkpoint: {what}: {e}")))
}

impl Checkpoint {
    pub fn new(
        params: &ModelParams,
        run: RunConfig,
        num_classes: usize,
        class_names: Vec<String>,
    ) -> Checkpoint {
        let layer = |pairs: &[(Array2<f64>, Array1<f64>)]| {
            pairs
                .iter()
                .map(|(w, b)| LayerParams {
                    weight: matrix_to_rows(w),
                    bias: b.to_vec(),
                })
                .collect()
        };
        Checkpoint {
            version: CHECKPOINT_VERSION,
            num_classes,
            class_names,
            run,
            params: CheckpointParams {
                euclid: layer(&params.euclid),
                hyper: layer(&params.hyper),
                curvatures: params.curvatures.clone(),
                w_out: matrix_to_rows(&params.w_out),
                b_out: params.b_out.to_vec(),
            },
        }
    }

    pub fn to_model(&self) -> CliResult<ModelParams> {
        let layers = |src: &[LayerParams], what: &str| -> CliResult<Vec<(Array2<f64>, Array1<f64>)>> {
            src.iter()
                .enumerate()
                .map(|(i, lp)| {
                    let w = rows_to_matrix(&lp.weight, &format!("{what} layer {i}"))?;
                    if lp.bias.len() != w.nrows() {
                        return Err(CliError::data(format!(
                            "checkpoint: {what} layer {i}: bias length {} for {} rows",
                            lp.bias.len(),
                            w.nrows()
                        )));
                    }
                    Ok((w, Array1::from_vec(lp.bias.clone())))
                })
                .collect()
        };
        let w_out = rows_to_matrix(&self.params.w_out, "classifier")?;
        if self.params.b_out.len() != w_out.nrows() {
            return Err(CliError::data("checkpoint: classifier bias length mismatch"));
        }
        Ok(ModelParams {
            euclid: layers(&self.params.euclid, "euclidean")?,
            hyper: layers(&self.params.hyper, "hyperbolic")?,
            curvatures: self.params.curvatures.clone(),
            w_out,
            b_out: Array1::from_vec(self.params.b_out.clone()),
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::data(format!("checkpoint serialisation: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Checkpoint> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(CliError::data(format!(
                "{}: unsupported checkpoint version {}",
                path.display(),
                ck.version
            )));
        }
        Ok(ck)
    }
}
