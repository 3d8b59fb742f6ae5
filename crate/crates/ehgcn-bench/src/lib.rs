//! Shared generators for the pipeline benchmarks: a reproducible moving
//! scene, its pipeline configuration, and a ready-to-train window.

use ehgcn::event::{synthesize_scene, ObjectSpec, SceneSpec};
use ehgcn::network::PreparedWindow;
use ehgcn::pipeline::{prepare_window, PipelineConfig};
use ehgcn::{
    Activation, AggregationSource, EventWindow, MvfConfig, NetworkConfig, SamplingConfig,
};

pub const WINDOW_US: u64 = 100_000;

/// One window of a two-emitter scene over background noise, sized like
/// the training workload (a few thousand raw events).
pub fn scene_window(noise_rate: f64, seed: u64) -> EventWindow {
    let spec = SceneSpec {
        width: 64,
        height: 64,
        duration_s: 0.1,
        noise_rate,
        seed,
        objects: vec![
            ObjectSpec { x0: 10.0, y0: 20.0, vx: 250.0, vy: 40.0, radius: 3.0, rate: 8000.0 },
            ObjectSpec { x0: 50.0, y0: 45.0, vx: -60.0, vy: -220.0, radius: 2.5, rate: 8000.0 },
        ],
    };
    let events = synthesize_scene(&spec).expect("valid spec");
    EventWindow { t_start: 0, t_end: WINDOW_US, sensor: spec.sensor(), events }
}

/// Default-shaped preprocessing configuration for a 64x64 sensor.
pub fn pipeline_config(seed: u64) -> PipelineConfig {
    let sensor = ehgcn::SensorGeometry::new(64, 64);
    let scale = SamplingConfig::default_time_scale(sensor, WINDOW_US);
    PipelineConfig {
        sampling: SamplingConfig {
            k: 8,
            epsilon: 1e-3,
            alpha: 12.0,
            beta: 0.05,
            spatial_time_scale: scale,
            seed,
        },
        uniform_rate: None,
        mvf: MvfConfig {
            sigma_v: 0.35,
            sigma_s: 1.5,
            gamma: 0.3,
            candidate_k: 10,
            spatial_time_scale: scale,
        },
        pairwise_k: 8,
        aggregation_source: AggregationSource::Both,
    }
}

/// Default-shaped network over the standard node features.
pub fn network_config(seed: u64) -> NetworkConfig {
    NetworkConfig {
        input_dim: ehgcn::pipeline::NODE_FEATURE_DIM,
        euclidean_widths: vec![32],
        hyperbolic_widths: vec![16],
        num_classes: 3,
        initial_c: 1.0,
        learning_rate: 0.5,
        c_min: 1e-4,
        phase1_steps: 1,
        phase2_steps: 1,
        seed,
        aggregation_source: AggregationSource::Both,
        mobius_fusion: false,
        euclidean_only: false,
        activation: Activation::Relu,
    }
}

/// Fully preprocessed window ready for forward/backward benchmarks.
pub fn prepared_window(noise_rate: f64, seed: u64) -> PreparedWindow {
    let window = scene_window(noise_rate, seed);
    prepare_window(&window, &pipeline_config(seed), 0, 1)
        .expect("pipeline succeeds")
        .expect("window is non-empty")
        .prepared
}
