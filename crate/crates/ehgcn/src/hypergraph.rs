//! Motion features, the motion-consistency kernel, and hyperedge grouping.
//!
//! Each sampled event gets a displacement vector to its nearest strictly
//! earlier neighbour in the scaled (x, y, t) embedding. Pairs of events
//! whose directions and intensities agree (kernel score above a threshold)
//! are linked, and hyperedges are the connected components of that pairing.
//! The module also builds the pairwise k-NN graph and the initial node and
//! edge features consumed by the network.

use std::collections::BTreeSet;
use std::io::Write;

use ndarray::Array2;
use thiserror::Error;

use crate::sampling::SampledStream;
use crate::sparse::SparseMatrix;
use crate::spatial::SpatialIndex;
use crate::union_find::UnionFind;

#[derive(Debug, Error)]
pub enum HypergraphError {
    #[error("hypergraph config: {0}")]
    InvalidConfig(String),
    #[error("feature list has {features} entries for {events} events")]
    FeatureMismatch { features: usize, events: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Kernel and grouping parameters.
#[derive(Debug, Clone)]
pub struct MvfConfig {
    /// Direction tolerance (bandwidth on unit-direction differences).
    pub sigma_v: f64,
    /// Intensity tolerance (bandwidth on speed differences).
    pub sigma_s: f64,
    /// Linking threshold; scores must strictly exceed it. Values >= 1
    /// are legal and produce no hyperedges since the kernel tops out at 1.
    pub gamma: f64,
    /// Neighbours scored per event.
    pub candidate_k: usize,
    /// Pixels per microsecond applied to the time axis.
    pub spatial_time_scale: f64,
}

impl MvfConfig {
    pub fn validate(&self) -> Result<(), HypergraphError> {
        let fail = |msg: String| Err(HypergraphError::InvalidConfig(msg));
        if !(self.sigma_v.is_finite() && self.sigma_v > 0.0) {
            return fail(format!("sigma_v {} must be positive", self.sigma_v));
        }
        if !(self.sigma_s.is_finite() && self.sigma_s > 0.0) {
            return fail(format!("sigma_s {} must be positive", self.sigma_s));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return fail(format!("gamma {} must be positive", self.gamma));
        }
        if self.candidate_k == 0 {
            return fail("candidate_k must be at least 1".into());
        }
        if !(self.spatial_time_scale.is_finite() && self.spatial_time_scale > 0.0) {
            return fail(format!(
                "spatial_time_scale {} must be positive",
                self.spatial_time_scale
            ));
        }
        Ok(())
    }
}

/// Per-event motion descriptor derived from the nearest earlier neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFeature {
    /// Displacement (Δx, Δy, scaled Δt); the time component is positive.
    pub v: [f64; 3],
    /// Motion intensity `|v|`, strictly positive.
    pub s: f64,
    /// Unit direction `v / s`.
    pub v_hat: [f64; 3],
}

impl MotionFeature {
    fn from_displacement(v: [f64; 3]) -> MotionFeature {
        let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        MotionFeature {
            v,
            s,
            v_hat: [v[0] / s, v[1] / s, v[2] / s],
        }
    }
}

/// Motion-consistent event groups over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    pub num_vertices: usize,
    /// Sorted member lists, each with >= 2 vertices, mutually disjoint,
    /// ordered by first member.
    pub hyperedges: Vec<Vec<usize>>,
    /// Scored pairs that passed the threshold: `(i, j, score)` with i < j,
    /// sorted by `(i, j)`.
    pub links: Vec<(usize, usize, f64)>,
}

impl Hypergraph {
    /// Hyperedge indices incident to each vertex.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.num_vertices];
        for (e, members) in self.hyperedges.iter().enumerate() {
            for &v in members {
                inc[v].push(e);
            }
        }
        inc
    }

    pub fn num_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    /// Number of (vertex, hyperedge) incidences.
    pub fn incidence_count(&self) -> usize {
        self.hyperedges.iter().map(Vec::len).sum()
    }

    /// Mean over hyperedges of the majority-label fraction; `None` when
    /// there are no hyperedges.
    pub fn purity(&self, labels: &[i32]) -> Option<f64> {
        if self.hyperedges.is_empty() {
            return None;
        }
        let mut total = 0.0;
        for edge in &self.hyperedges {
            let mut counts: std::collections::BTreeMap<i32, usize> = Default::default();
            for &v in edge {
                *counts.entry(labels[v]).or_insert(0) += 1;
            }
            let majority = counts.values().copied().max().unwrap_or(0);
            total += majority as f64 / edge.len() as f64;
        }
        Some(total / self.hyperedges.len() as f64)
    }

    /// Writes the JSONL form: a header line with counts and kernel
    /// parameters, then one sorted index array per hyperedge.
    pub fn write_jsonl<W: Write>(&self, cfg: &MvfConfig, w: &mut W) -> Result<(), HypergraphError> {
        let header = serde_json::json!({
            "vertices": self.num_vertices,
            "hyperedges": self.hyperedges.len(),
            "gamma": cfg.gamma,
            "sigma_v": cfg.sigma_v,
            "sigma_s": cfg.sigma_s,
        });
        writeln!(w, "{header}")?;
        for edge in &self.hyperedges {
            writeln!(w, "{}", serde_json::to_string(edge).expect("serializable"))?;
        }
        Ok(())
    }
}

fn embed(sampled: &SampledStream, scale: f64) -> Vec<[f64; 3]> {
    sampled
        .retained
        .iter()
        .map(|ev| {
            [
                f64::from(ev.x),
                f64::from(ev.y),
                (ev.t - sampled.t_start) as f64 * scale,
            ]
        })
        .collect()
}

/// Motion features aligned with the sampled events. An event with no
/// strictly earlier neighbour (stream head, or ties at the earliest
/// timestamp) gets `None` and never joins a hyperedge.
pub fn motion_features(
    sampled: &SampledStream,
    cfg: &MvfConfig,
) -> Result<Vec<Option<MotionFeature>>, HypergraphError> {
    cfg.validate()?;
    let m = sampled.retained.len();
    if m < 2 {
        return Ok(vec![None; m]);
    }
    let points = embed(sampled, cfg.spatial_time_scale);
    let index = SpatialIndex::new(points);
    let events = &sampled.retained;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        // Expand k until the distance-sorted neighbour list contains a
        // strictly earlier event; its first such entry is the nearest one.
        let mut k = 8.min(m - 1);
        let feature = loop {
            let nn = index.k_nearest(i, k);
            let hit = nn.iter().find(|(j, _)| events[*j].t < events[i].t);
            if let Some(&(j, _)) = hit {
                let vi = index.point(i);
                let vj = index.point(j);
                break Some(MotionFeature::from_displacement([
                    vi[0] - vj[0],
                    vi[1] - vj[1],
                    vi[2] - vj[2],
                ]));
            }
            if nn.len() == m - 1 {
                break None;
            }
            k = (k * 2).min(m - 1);
        };
        out.push(feature);
    }
    Ok(out)
}

/// Motion-consistency kernel
/// `exp(-|v̂_j - v̂_i|^2 / (2 sigma_v^2) - |s_j - s_i| / sigma_s)`,
/// symmetric, in (0, 1], equal to 1 exactly when the features coincide.
pub fn transition_prob(a: &MotionFeature, b: &MotionFeature, cfg: &MvfConfig) -> f64 {
    let dir2: f64 = (0..3).map(|k| (a.v_hat[k] - b.v_hat[k]).powi(2)).sum();
    let ds = (a.s - b.s).abs();
    (-dir2 / (2.0 * cfg.sigma_v * cfg.sigma_v) - ds / cfg.sigma_s).exp()
}

/// Scores each event's `candidate_k` nearest neighbours and groups events
/// whose pairs pass the threshold into connected components. Components
/// with fewer than two members are dropped.
pub fn build_hyperedges(
    features: &[Option<MotionFeature>],
    sampled: &SampledStream,
    cfg: &MvfConfig,
) -> Result<Hypergraph, HypergraphError> {
    cfg.validate()?;
    let m = sampled.retained.len();
    if features.len() != m {
        return Err(HypergraphError::FeatureMismatch {
            features: features.len(),
            events: m,
        });
    }
    let mut links = Vec::new();
    let mut uf = UnionFind::new(m);
    if m >= 2 {
        let index = SpatialIndex::new(embed(sampled, cfg.spatial_time_scale));
        let mut scored: BTreeSet<(usize, usize)> = BTreeSet::new();
        for i in 0..m {
            for (j, _) in index.k_nearest(i, cfg.candidate_k) {
                let pair = (i.min(j), i.max(j));
                if !scored.insert(pair) {
                    continue;
                }
                if let (Some(fa), Some(fb)) = (&features[pair.0], &features[pair.1]) {
                    let score = transition_prob(fa, fb, cfg);
                    if score > cfg.gamma {
                        links.push((pair.0, pair.1, score));
                        uf.union(pair.0, pair.1);
                    }
                }
            }
        }
    }
    links.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let hyperedges: Vec<Vec<usize>> = uf
        .groups()
        .into_iter()
        .filter(|g| g.len() >= 2)
        .collect();
    Ok(Hypergraph {
        num_vertices: m,
        hyperedges,
        links,
    })
}

/// Symmetric k-NN adjacency over the scaled embedding, unit weights, with
/// self-loops on every vertex.
pub fn build_pairwise_graph(
    sampled: &SampledStream,
    k: usize,
    spatial_time_scale: f64,
) -> SparseMatrix {
    let m = sampled.retained.len();
    let mut entries: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..m {
        entries.insert((i, i));
    }
    if m >= 2 {
        let index = SpatialIndex::new(embed(sampled, spatial_time_scale));
        for i in 0..m {
            for (j, _) in index.k_nearest(i, k) {
                entries.insert((i, j));
                entries.insert((j, i));
            }
        }
    }
    SparseMatrix::from_triplets(m, entries.into_iter().map(|(i, j)| (i, j, 1.0)))
}

/// Node features `[p, rank(t)/M, x/width, y/height]`; the earliest event
/// has rank 1.
pub fn node_features(sampled: &SampledStream) -> Array2<f64> {
    let m = sampled.retained.len();
    let width = f64::from(sampled.sensor.width);
    let height = f64::from(sampled.sensor.height);
    let mut out = Array2::zeros((m, 4));
    for (i, ev) in sampled.retained.iter().enumerate() {
        out[(i, 0)] = ev.polarity_f64();
        out[(i, 1)] = (i + 1) as f64 / m as f64;
        out[(i, 2)] = f64::from(ev.x) / width;
        out[(i, 3)] = f64::from(ev.y) / height;
    }
    out
}

/// Relative-position edge features for every adjacency entry:
/// `(Δx/width, Δy/height, Δt/window)` from row vertex to column vertex.
pub fn edge_features(
    sampled: &SampledStream,
    adjacency: &SparseMatrix,
) -> Vec<(usize, usize, [f64; 3])> {
    let width = f64::from(sampled.sensor.width);
    let height = f64::from(sampled.sensor.height);
    let window = sampled.duration_us() as f64;
    let ev = &sampled.retained;
    let mut out = Vec::with_capacity(adjacency.nnz());
    for i in 0..adjacency.n() {
        for &(j, _) in adjacency.row(i) {
            let f = [
                (f64::from(ev[j].x) - f64::from(ev[i].x)) / width,
                (f64::from(ev[j].y) - f64::from(ev[i].y)) / height,
                (ev[j].t as f64 - ev[i].t as f64) / window,
            ];
            out.push((i, j, f));
        }
    }
    out
}

/// Node and edge features in one call.
pub fn init_features(
    sampled: &SampledStream,
    adjacency: &SparseMatrix,
) -> (Array2<f64>, Vec<(usize, usize, [f64; 3])>) {
    (node_features(sampled), edge_features(sampled, adjacency))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, SensorGeometry};
    use approx::assert_abs_diff_eq;

    fn stream(coords: &[(u16, u16, u64)]) -> SampledStream {
        let mut retained: Vec<Event> = coords
            .iter()
            .map(|&(x, y, t)| Event { x, y, t, p: 1 })
            .collect();
        retained.sort_unstable();
        let m = retained.len();
        SampledStream {
            t_start: 0,
            t_end: 100,
            sensor: SensorGeometry::new(128, 128),
            retained,
            retained_indices: (0..m).collect(),
            probabilities: vec![1.0; m],
            densities: vec![1.0; m],
            rate: 1.0,
        }
    }

    fn cfg() -> MvfConfig {
        MvfConfig {
            sigma_v: 0.5,
            sigma_s: 2.0,
            gamma: 0.5,
            candidate_k: 8,
            spatial_time_scale: 1.0,
        }
    }

    fn unit_feature(dir: [f64; 3], s: f64) -> MotionFeature {
        MotionFeature {
            v: [dir[0] * s, dir[1] * s, dir[2] * s],
            s,
            v_hat: dir,
        }
    }

    #[test]
    fn displacement_to_nearest_earlier_neighbour() {
        // Events (0,0,t=0) and (3,4,t=1) with scale 2: v = (3, 4, 2).
        let s = stream(&[(0, 0, 0), (3, 4, 1)]);
        let mut c = cfg();
        c.spatial_time_scale = 2.0;
        let f = motion_features(&s, &c).unwrap();
        assert!(f[0].is_none());
        let f1 = f[1].as_ref().unwrap();
        assert_eq!(f1.v, [3.0, 4.0, 2.0]);
        assert_abs_diff_eq!(f1.s, 29.0f64.sqrt(), epsilon = 1e-12);
        let n: f64 = f1.v_hat.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_pixels_point_along_time_axis() {
        let s = stream(&[(5, 5, 0), (5, 5, 10)]);
        let f = motion_features(&s, &cfg()).unwrap();
        let f1 = f[1].as_ref().unwrap();
        assert_eq!(f1.v_hat, [0.0, 0.0, 1.0]);
        assert_eq!(f1.s, 10.0);
    }

    #[test]
    fn singleton_and_tied_heads_are_invalid() {
        let s = stream(&[(5, 5, 0)]);
        assert_eq!(motion_features(&s, &cfg()).unwrap(), vec![None]);
        // Two events at the same timestamp: neither is strictly earlier.
        let s = stream(&[(5, 5, 7), (9, 9, 7)]);
        let f = motion_features(&s, &cfg()).unwrap();
        assert!(f.iter().all(Option::is_none));
        let empty = stream(&[]);
        assert!(motion_features(&empty, &cfg()).unwrap().is_empty());
    }

    #[test]
    fn earlier_neighbour_wins_over_closer_later_one() {
        // Event 1 (t=5) sits between event 0 (earlier, farther) and
        // event 2 (later, nearer): the feature must use event 0.
        let s = stream(&[(0, 0, 0), (10, 0, 5), (11, 0, 6)]);
        let f = motion_features(&s, &cfg()).unwrap();
        let f1 = f[1].as_ref().unwrap();
        assert_eq!(f1.v[0], 10.0);
    }

    #[test]
    fn kernel_reference_values() {
        let mut c = cfg();
        c.sigma_v = 1.0;
        c.sigma_s = 2.0;
        let ex = unit_feature([1.0, 0.0, 0.0], 3.0);
        let ey = unit_feature([0.0, 1.0, 0.0], 3.0);
        let opposite = unit_feature([-1.0, 0.0, 0.0], 3.0);
        assert_abs_diff_eq!(transition_prob(&ex, &ex, &c), 1.0, epsilon = 1e-15);
        // Orthogonal unit directions, equal speed: |diff|^2 = 2 -> e^-1.
        assert_abs_diff_eq!(
            transition_prob(&ex, &ey, &c),
            0.36787944117144233,
            epsilon = 1e-12
        );
        // Opposite directions: |diff|^2 = 4 -> e^-2.
        assert_abs_diff_eq!(
            transition_prob(&ex, &opposite, &c),
            0.1353352832366127,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kernel_is_symmetric_and_monotone() {
        let c = cfg();
        let base = unit_feature([1.0, 0.0, 0.0], 2.0);
        let mut last = 1.0;
        for step in 0..8 {
            let angle = step as f64 * std::f64::consts::PI / 8.0;
            let other = unit_feature([angle.cos(), angle.sin(), 0.0], 2.0);
            let g = transition_prob(&base, &other, &c);
            assert_abs_diff_eq!(g, transition_prob(&other, &base, &c), epsilon = 1e-15);
            assert!(g <= last + 1e-15, "direction distance must not raise the score");
            assert!(g > 0.0 && g <= 1.0);
            last = g;
        }
        for ds in [0.0, 0.5, 1.0, 2.0] {
            let other = unit_feature([1.0, 0.0, 0.0], 2.0 + ds);
            let g = transition_prob(&base, &other, &c);
            assert!(g <= transition_prob(&base, &base, &c));
        }
    }

    fn two_cluster_stream() -> SampledStream {
        stream(&[
            (0, 0, 0),
            (50, 0, 0),
            (2, 0, 1),
            (48, 0, 1),
            (4, 0, 2),
            (46, 0, 2),
            (6, 0, 3),
            (44, 0, 3),
        ])
    }

    #[test]
    fn opposite_clusters_form_two_pure_hyperedges() {
        let s = two_cluster_stream();
        let mut c = cfg();
        c.sigma_v = 0.3;
        let features = motion_features(&s, &c).unwrap();
        let hg = build_hyperedges(&features, &s, &c).unwrap();
        assert_eq!(hg.hyperedges, vec![vec![2, 4, 6], vec![3, 5, 7]]);
        // Heads (t = 0) have no features and stay out of hyperedges.
        assert!(hg.incidence()[0].is_empty() && hg.incidence()[1].is_empty());
        // Every stored link passed the threshold and stays within an edge.
        for &(i, j, score) in &hg.links {
            assert!(score > c.gamma);
            let edge_of = |v: usize| {
                hg.hyperedges
                    .iter()
                    .position(|e| e.contains(&v))
                    .expect("linked vertices are in hyperedges")
            };
            assert_eq!(edge_of(i), edge_of(j));
        }
    }

    #[test]
    fn shared_motion_forms_single_hyperedge() {
        let s = stream(&[(0, 0, 0), (2, 0, 1), (4, 0, 2), (6, 0, 3), (8, 0, 4)]);
        let features = motion_features(&s, &cfg()).unwrap();
        let hg = build_hyperedges(&features, &s, &cfg()).unwrap();
        assert_eq!(hg.hyperedges, vec![vec![1, 2, 3, 4]]);
    }

    #[test]
    fn threshold_at_or_above_one_yields_no_hyperedges() {
        let s = stream(&[(0, 0, 0), (2, 0, 1), (4, 0, 2)]);
        let mut c = cfg();
        c.gamma = 1.0;
        let features = motion_features(&s, &c).unwrap();
        let hg = build_hyperedges(&features, &s, &c).unwrap();
        assert_eq!(hg.num_hyperedges(), 0);
        assert!(hg.links.is_empty());
    }

    fn brute_force_components(
        features: &[Option<MotionFeature>],
        cfg: &MvfConfig,
    ) -> Vec<Vec<usize>> {
        let m = features.len();
        let mut uf = UnionFind::new(m);
        for i in 0..m {
            for j in (i + 1)..m {
                if let (Some(a), Some(b)) = (&features[i], &features[j]) {
                    if transition_prob(a, b, cfg) > cfg.gamma {
                        uf.union(i, j);
                    }
                }
            }
        }
        uf.groups().into_iter().filter(|g| g.len() >= 2).collect()
    }

    #[test]
    fn matches_brute_force_components_with_full_candidates() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..25 {
            let m = rng.random_range(2..20);
            let coords: Vec<(u16, u16, u64)> = (0..m)
                .map(|_| {
                    (
                        rng.random_range(0..64),
                        rng.random_range(0..64),
                        rng.random_range(0..50),
                    )
                })
                .collect();
            let s = stream(&coords);
            let mut c = cfg();
            c.candidate_k = s.retained.len() - 1;
            c.gamma = rng.random_range(0.05..0.9);
            c.sigma_v = rng.random_range(0.2..1.5);
            let features = motion_features(&s, &c).unwrap();
            let got = build_hyperedges(&features, &s, &c).unwrap();
            let want = brute_force_components(&features, &c);
            assert_eq!(got.hyperedges, want, "trial {trial}");
        }
    }

    #[test]
    fn raising_gamma_refines_the_partition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let coords: Vec<(u16, u16, u64)> = (0..15)
                .map(|_| {
                    (
                        rng.random_range(0..32),
                        rng.random_range(0..32),
                        rng.random_range(0..40),
                    )
                })
                .collect();
            let s = stream(&coords);
            let mut lo = cfg();
            lo.gamma = 0.2;
            lo.candidate_k = 14;
            let mut hi = lo.clone();
            hi.gamma = 0.6;
            let features = motion_features(&s, &lo).unwrap();
            let coarse = build_hyperedges(&features, &s, &lo).unwrap();
            let fine = build_hyperedges(&features, &s, &hi).unwrap();
            for edge in &fine.hyperedges {
                let container = coarse
                    .hyperedges
                    .iter()
                    .find(|c| edge.iter().all(|v| c.contains(v)));
                assert!(
                    container.is_some(),
                    "fine edge {edge:?} not inside any coarse edge"
                );
            }
        }
    }

    #[test]
    fn pairwise_graph_examples() {
        let single = stream(&[(3, 3, 0)]);
        let g = build_pairwise_graph(&single, 2, 1.0);
        assert_eq!(g.nnz(), 1);
        assert_eq!(g.get(0, 0), 1.0);

        let line = stream(&[(0, 0, 0), (1, 0, 0), (2, 0, 0)]);
        let g = build_pairwise_graph(&line, 1, 1.0);
        // Middle vertex picks one end; both ends pick the middle; after
        // symmetrization the middle has off-diagonal degree 2.
        let middle_degree = g.row(1).iter().filter(|&&(j, _)| j != 1).count();
        assert_eq!(middle_degree, 2);
        let dense = g.to_dense();
        assert_eq!(dense, dense.t().to_owned());
        for i in 0..3 {
            assert_eq!(g.get(i, i), 1.0);
        }
    }

    #[test]
    fn node_feature_layout() {
        let s = stream(&[(0, 0, 0), (64, 32, 10), (127, 127, 20)]);
        let f = node_features(&s);
        assert_eq!(f.shape(), &[3, 4]);
        // Earliest event, p = +1, at the origin.
        assert_eq!(f[(0, 0)], 1.0);
        assert_abs_diff_eq!(f[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(f[(0, 2)], 0.0);
        assert_eq!(f[(0, 3)], 0.0);
        assert_abs_diff_eq!(f[(1, 2)], 0.5, epsilon = 1e-12);
        assert_eq!(f[(2, 1)], 1.0);
    }

    #[test]
    fn edge_features_are_antisymmetric_with_zero_self_loops() {
        let s = stream(&[(0, 0, 0), (10, 20, 50)]);
        let g = build_pairwise_graph(&s, 1, 1.0);
        let (_, edges) = init_features(&s, &g);
        let lookup = |a: usize, b: usize| {
            edges
                .iter()
                .find(|(i, j, _)| *i == a && *j == b)
                .map(|(_, _, f)| *f)
                .unwrap()
        };
        assert_eq!(lookup(0, 0), [0.0, 0.0, 0.0]);
        let fwd = lookup(0, 1);
        let rev = lookup(1, 0);
        for k in 0..3 {
            assert_abs_diff_eq!(fwd[k], -rev[k], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(fwd[0], 10.0 / 128.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fwd[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn jsonl_layout_is_header_then_sorted_edges() {
        let s = two_cluster_stream();
        let mut c = cfg();
        c.sigma_v = 0.3;
        let features = motion_features(&s, &c).unwrap();
        let hg = build_hyperedges(&features, &s, &c).unwrap();
        let mut buf = Vec::new();
        hg.write_jsonl(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + hg.num_hyperedges());
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["vertices"], 8);
        assert_eq!(header["hyperedges"], 2);
        assert_eq!(header["gamma"], 0.5);
        assert_eq!(lines[1], "[2,4,6]");
        assert_eq!(lines[2], "[3,5,7]");
    }

    #[test]
    fn purity_against_labels() {
        let hg = Hypergraph {
            num_vertices: 6,
            hyperedges: vec![vec![0, 1, 2], vec![3, 4]],
            links: vec![],
        };
        let labels = [0, 0, 1, 2, 2, 9];
        let p = hg.purity(&labels).unwrap();
        assert_abs_diff_eq!(p, (2.0 / 3.0 + 1.0) / 2.0, epsilon = 1e-12);
        let empty = Hypergraph {
            num_vertices: 2,
            hyperedges: vec![],
            links: vec![],
        };
        assert!(empty.purity(&[0, 1]).is_none());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.sigma_v = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.gamma = -0.1;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.candidate_k = 0;
        assert!(c.validate().is_err());
        // gamma >= 1 is allowed: it simply produces no hyperedges.
        let mut c = cfg();
        c.gamma = 1.5;
        assert!(c.validate().is_ok());
    }
}
