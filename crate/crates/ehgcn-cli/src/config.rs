//! Run configuration: one TOML file covers the whole pipeline, every
//! field optional, flags override fields. Also hosts the seed fan-out
//! scheme: the single `seed` value is split into independent per-stage
//! streams with domain-tagged derivation, so no two stages ever share
//! a random sequence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ehgcn::network::{Activation, AggregationSource, NetworkConfig};
use ehgcn::pipeline::{PipelineConfig, NODE_FEATURE_DIM};
use ehgcn::sampling::SamplingConfig;
use ehgcn::{MvfConfig, SensorGeometry};

use crate::error::{CliError, CliResult};

/// Per-stage seed streams derived from the global seed.
pub mod seeds {
    use ehgcn::seed;

    /// Base for per-window sampling draws.
    pub fn sampling(global: u64) -> u64 {
        seed::derive(global, "sample", 0)
    }

    /// Parameter initialisation.
    pub fn training(global: u64) -> u64 {
        seed::derive(global, "train-init", 0)
    }

    /// Scene generation for dataset window `index`.
    pub fn scene(global: u64, index: u64) -> u64 {
        seed::derive(global, "synth-window", index)
    }

    /// Random (non-prefix) event truncation for window `index`.
    pub fn subsample(global: u64, index: u64) -> u64 {
        seed::derive(global, "subsample", index)
    }

    /// Independent replicate `index` of an ablation run.
    pub fn replicate(global: u64, index: u64) -> u64 {
        seed::derive(global, "ablate-seed", index)
    }
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// Tiling length when splitting a raw stream into windows.
    pub window_us: u64,
    pub width: u16,
    pub height: u16,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            window_us: 100_000,
            width: 64,
            height: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub k: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Pixels per microsecond on the time axis; when absent, one window
    /// length spans the sensor diagonal.
    pub spatial_time_scale: Option<f64>,
    /// Fixed retention probability replacing adaptive sampling, used by
    /// `--uniform-rate` style runs and the ablation grid.
    pub uniform_rate: Option<f64>,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            k: 8,
            epsilon: 1e-3,
            alpha: 12.0,
            beta: 0.05,
            spatial_time_scale: None,
            uniform_rate: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvfSection {
    pub sigma_v: f64,
    pub sigma_s: f64,
    pub gamma: f64,
    pub candidate_k: usize,
}

impl Default for MvfSection {
    fn default() -> Self {
        Self {
            sigma_v: 0.35,
            sigma_s: 1.5,
            gamma: 0.3,
            candidate_k: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    /// Neighbours per event in the pairwise graph.
    pub pairwise_k: usize,
    pub aggregation: AggregationSource,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            pairwise_k: 8,
            aggregation: AggregationSource::Both,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub euclidean_widths: Vec<usize>,
    pub hyperbolic_widths: Vec<usize>,
    pub initial_c: f64,
    pub learning_rate: f64,
    pub c_min: f64,
    pub phase1_steps: usize,
    pub phase2_steps: usize,
    pub mobius_fusion: bool,
    pub euclidean_only: bool,
    pub activation: Activation,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            euclidean_widths: vec![32],
            hyperbolic_widths: vec![16],
            initial_c: 1.0,
            learning_rate: 0.5,
            c_min: 1e-4,
            phase1_steps: 200,
            phase2_steps: 1300,
            mobius_fusion: false,
            euclidean_only: false,
            activation: Activation::Relu,
        }
    }
}

/// The whole pipeline configuration. Checkpoints embed the resolved
/// value so evaluation never depends on external files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub window: WindowSection,
    pub sampling: SamplingSection,
    pub mvf: MvfSection,
    pub graph: GraphSection,
    pub network: NetworkSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            window: WindowSection::default(),
            sampling: SamplingSection::default(),
            mvf: MvfSection::default(),
            graph: GraphSection::default(),
            network: NetworkSection::default(),
        }
    }
}

impl RunConfig {
    /// Loads the TOML file, or returns defaults when no path is given.
    pub fn load(path: Option<&Path>) -> CliResult<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Effective time-axis stretch for a given sensor and window length.
    pub fn time_scale(&self, sensor: SensorGeometry, window_us: u64) -> f64 {
        self.sampling
            .spatial_time_scale
            .unwrap_or_else(|| SamplingConfig::default_time_scale(sensor, window_us))
    }

    pub fn sampling_config(&self, sensor: SensorGeometry, window_us: u64) -> SamplingConfig {
        SamplingConfig {
            k: self.sampling.k,
            epsilon: self.sampling.epsilon,
            alpha: self.sampling.alpha,
            beta: self.sampling.beta,
            spatial_time_scale: self.time_scale(sensor, window_us),
            seed: seeds::sampling(self.seed),
        }
    }

    pub fn mvf_config(&self, sensor: SensorGeometry, window_us: u64) -> MvfConfig {
        MvfConfig {
            sigma_v: self.mvf.sigma_v,
            sigma_s: self.mvf.sigma_s,
            gamma: self.mvf.gamma,
            candidate_k: self.mvf.candidate_k,
            spatial_time_scale: self.time_scale(sensor, window_us),
        }
    }

    pub fn pipeline_config(&self, sensor: SensorGeometry, window_us: u64) -> PipelineConfig {
        PipelineConfig {
            sampling: self.sampling_config(sensor, window_us),
            uniform_rate: self.sampling.uniform_rate,
            mvf: self.mvf_config(sensor, window_us),
            pairwise_k: self.graph.pairwise_k,
            aggregation_source: self.graph.aggregation,
        }
    }

    pub fn network_config(&self, num_classes: usize) -> NetworkConfig {
        NetworkConfig {
            input_dim: NODE_FEATURE_DIM,
            euclidean_widths: self.network.euclidean_widths.clone(),
            hyperbolic_widths: self.network.hyperbolic_widths.clone(),
            num_classes,
            initial_c: self.network.initial_c,
            learning_rate: self.network.learning_rate,
            c_min: self.network.c_min,
            phase1_steps: self.network.phase1_steps,
            phase2_steps: self.network.phase2_steps,
            seed: seeds::training(self.seed),
            aggregation_source: self.graph.aggregation,
            mobius_fusion: self.network.mobius_fusion,
            euclidean_only: self.network.euclidean_only,
            activation: self.network.activation,
        }
    }
}
