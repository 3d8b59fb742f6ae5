//! Event-stream hypergraph learning in dual Euclidean/hyperbolic space.
//!
//! The pipeline: raw event-camera streams are cut into fixed-width time
//! windows, adaptively downsampled by local density and temporal variance,
//! linked into motion-consistent hyperedges, and classified by a graph
//! network whose late layers operate on the Poincaré ball with learnable
//! per-layer curvature.

pub mod event;
pub mod geometry;
pub mod hypergraph;
pub mod network;
pub mod pipeline;
pub mod sampling;
pub mod seed;
pub mod sparse;
pub mod spatial;
mod union_find;

pub use event::{Event, EventWindow, SceneSpec, SensorGeometry};
pub use geometry::{Curvature, ManifoldPoint, TangentVector};
pub use hypergraph::{Hypergraph, MotionFeature, MvfConfig};
pub use network::{
    Activation, AggregationSource, GraphStats, ModelParams, NetworkConfig, PreparedWindow,
};
pub use sampling::{SampledStream, SamplingConfig};
pub use sparse::SparseMatrix;
