//! Density- and variance-driven event downsampling.
//!
//! Each window gets one retention rate from the temporal-variance sigmoid;
//! per-event retention scales that rate by local density so sparse noise is
//! shed first. Distances live in the (x, y, scaled t) embedding where the
//! time axis is stretched so one window maps onto the sensor diagonal by
//! default.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::event::{Event, EventWindow, SensorGeometry};
use crate::spatial::{Point3, SpatialIndex};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("sampling config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone)]
pub struct SamplingConfig {
    /// Neighbours averaged into the local distance d-bar.
    pub k: usize,
    /// Density regulariser: d = 1 / (d-bar + epsilon).
    pub epsilon: f64,
    /// Sigmoid steepness over temporal variance.
    pub alpha: f64,
    /// Sigmoid midpoint in squared normalised-time units.
    pub beta: f64,
    /// Pixels per microsecond applied to the time axis.
    pub spatial_time_scale: f64,
    pub seed: u64,
}

impl SamplingConfig {
    /// Default time-axis stretch: one window length spans the sensor
    /// diagonal.
    pub fn default_time_scale(sensor: SensorGeometry, window_us: u64) -> f64 {
        sensor.diagonal() / window_us as f64
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        let fail = |msg: String| Err(SamplingError::InvalidConfig(msg));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return fail(format!("epsilon {} must be positive", self.epsilon));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return fail("alpha and beta must be finite".into());
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

/// A window after sampling, with per-event diagnostics for every *input*
/// event alongside the retained subsequence.
#[derive(Debug, Clone)]
pub struct SampledStream {
    pub t_start: u64,
    pub t_end: u64,
    pub sensor: SensorGeometry,
    /// Retained events in stream order.
    pub retained: Vec<Event>,
    /// Positions of the retained events in the input window.
    pub retained_indices: Vec<usize>,
    /// Final retention probability for each input event.
    pub probabilities: Vec<f64>,
    /// Local density for each input event.
    pub densities: Vec<f64>,
    /// Window-level rate from the variance sigmoid.
    pub rate: f64,
}

impl SampledStream {
    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn duration_us(&self) -> u64 {
        self.t_end - self.t_start
    }
}

/// Embeds window events as (x, y, (t - t_start) * scale) points.
pub fn embed_events(window: &EventWindow, spatial_time_scale: f64) -> Vec<Point3> {
    window
        .events
        .iter()
        .map(|ev| {
            [
                f64::from(ev.x),
                f64::from(ev.y),
                (ev.t - window.t_start) as f64 * spatial_time_scale,
            ]
        })
        .collect()
}

/// Mean distance to each event's `min(k, M-1)` nearest neighbours in the
/// scaled embedding. Windows with fewer than two events yield infinity,
/// which downstream density maps to zero.
pub fn mean_knn_distance(window: &EventWindow, k: usize, spatial_time_scale: f64) -> Vec<f64> {
    let m = window.len();
    if m < 2 {
        return vec![f64::INFINITY; m];
    }
    let index = SpatialIndex::new(embed_events(window, spatial_time_scale));
    (0..m)
        .map(|i| {
            let nn = index.k_nearest(i, k);
            nn.iter().map(|(_, d)| d).sum::<f64>() / nn.len() as f64
        })
        .collect()
}

/// Local density `1 / (d-bar + epsilon)`; infinite d-bar maps to zero.
pub fn density(mean_distances: &[f64], epsilon: f64) -> Vec<f64> {
    debug_assert!(epsilon > 0.0);
    mean_distances.iter().map(|d| 1.0 / (d + epsilon)).collect()
}

/// Population variance of timestamps normalised to [0, 1] over the
/// window's event span. Empty windows and equal-timestamp windows give 0;
/// the maximum (two events at the span ends) is 0.25.
pub fn temporal_variance(window: &EventWindow) -> f64 {
    let m = window.len();
    if m == 0 {
        return 0.0;
    }
    let t_min = window.events.iter().map(|e| e.t).min().unwrap();
    let t_max = window.events.iter().map(|e| e.t).max().unwrap();
    if t_max == t_min {
        return 0.0;
    }
    let span = (t_max - t_min) as f64;
    let normalised: Vec<f64> = window
        .events
        .iter()
        .map(|e| (e.t - t_min) as f64 / span)
        .collect();
    let mean = normalised.iter().sum::<f64>() / m as f64;
    normalised.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / m as f64
}

/// Window retention rate: a sigmoid in the temporal variance,
/// `1 / (1 + exp(-alpha * (variance - beta)))`.
pub fn sampling_rate(variance: f64, alpha: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-alpha * (variance - beta)).exp())
}

/// Per-event retention probability: the window rate scaled by density
/// relative to the window's densest event. All-zero densities (for
/// example a singleton window) fall back to the bare rate.
pub fn final_probabilities(rate: f64, densities: &[f64]) -> Vec<f64> {
    let max = densities.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![rate; densities.len()];
    }
    densities.iter().map(|d| rate * d / max).collect()
}

/// Runs the full adaptive pass over one window: density, variance rate,
/// per-event probabilities, then an independent Bernoulli draw per event
/// from a generator seeded by `cfg.seed`. Retention preserves stream
/// order and is byte-for-byte deterministic under a fixed seed.
pub fn sample(window: &EventWindow, cfg: &SamplingConfig) -> Result<SampledStream, SamplingError> {
    cfg.validate()?;
    let d_bar = mean_knn_distance(window, cfg.k, cfg.spatial_time_scale);
    let densities = density(&d_bar, cfg.epsilon);
    let rate = sampling_rate(temporal_variance(window), cfg.alpha, cfg.beta);
    let probabilities = final_probabilities(rate, &densities);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut retained = Vec::new();
    let mut retained_indices = Vec::new();
    for (i, ev) in window.events.iter().enumerate() {
        if rng.random::<f64>() < probabilities[i] {
            retained.push(*ev);
            retained_indices.push(i);
        }
    }
    Ok(SampledStream {
        t_start: window.t_start,
        t_end: window.t_end,
        sensor: window.sensor,
        retained,
        retained_indices,
        probabilities,
        densities,
        rate,
    })
}

/// Ablation baseline: every event keeps the same fixed probability.
/// Densities are reported as 1 so diagnostics stay well-formed.
pub fn uniform_sample(
    window: &EventWindow,
    rate: f64,
    seed: u64,
) -> Result<SampledStream, SamplingError> {
    if !(rate.is_finite() && (0.0..=1.0).contains(&rate)) {
        return Err(SamplingError::InvalidConfig(format!(
            "uniform rate {rate} out of [0, 1]"
        )));
    }
    let m = window.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retained = Vec::new();
    let mut retained_indices = Vec::new();
    for (i, ev) in window.events.iter().enumerate() {
        if rng.random::<f64>() < rate {
            retained.push(*ev);
            retained_indices.push(i);
        }
    }
    Ok(SampledStream {
        t_start: window.t_start,
        t_end: window.t_end,
        sensor: window.sensor,
        retained,
        retained_indices,
        probabilities: vec![rate; m],
        densities: vec![1.0; m],
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{synthesize_scene_labeled, window_stream, ObjectSpec, SceneSpec};
    use approx::assert_abs_diff_eq;

    fn window_at(times: &[u64]) -> EventWindow {
        let events: Vec<Event> = times
            .iter()
            .map(|&t| Event {
                x: 10,
                y: 10,
                t,
                p: 1,
            })
            .collect();
        EventWindow {
            t_start: 0,
            t_end: times.iter().copied().max().unwrap_or(0) + 1,
            sensor: SensorGeometry::new(64, 64),
            events,
        }
    }

    fn line_window(xs: &[u16]) -> EventWindow {
        let events: Vec<Event> = xs
            .iter()
            .map(|&x| Event { x, y: 0, t: 0, p: 1 })
            .collect();
        EventWindow {
            t_start: 0,
            t_end: 10,
            sensor: SensorGeometry::new(64, 64),
            events,
        }
    }

    fn cfg(seed: u64) -> SamplingConfig {
        SamplingConfig {
            k: 4,
            epsilon: 0.05,
            alpha: 10.0,
            beta: 0.05,
            spatial_time_scale: 1.0,
            seed,
        }
    }

    #[test]
    fn knn_mean_on_collinear_points() {
        // Events at x = 0, 1, 2: with k=1 the middle sees distance 1; with
        // k=2 the ends average (1 + 2) / 2.
        let w = line_window(&[0, 1, 2]);
        let d1 = mean_knn_distance(&w, 1, 1.0);
        assert_abs_diff_eq!(d1[1], 1.0, epsilon = 1e-12);
        let d2 = mean_knn_distance(&w, 2, 1.0);
        assert_abs_diff_eq!(d2[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d2[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d2[2], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn knn_mean_matches_small_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let m = rng.random_range(2..12);
            let events: Vec<Event> = (0..m)
                .map(|_| Event {
                    x: rng.random_range(0..64),
                    y: rng.random_range(0..64),
                    t: rng.random_range(0..1000),
                    p: 1,
                })
                .collect();
            let w = EventWindow {
                t_start: 0,
                t_end: 1000,
                sensor: SensorGeometry::new(64, 64),
                events,
            };
            let scale = 0.1;
            let k = rng.random_range(1..5usize);
            let got = mean_knn_distance(&w, k, scale);
            let pts = embed_events(&w, scale);
            for i in 0..pts.len() {
                let mut ds: Vec<f64> = (0..pts.len())
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d: f64 = (0..3).map(|a| (pts[i][a] - pts[j][a]).powi(2)).sum();
                        d.sqrt()
                    })
                    .collect();
                ds.sort_by(f64::total_cmp);
                let kk = k.min(ds.len());
                let want = ds[..kk].iter().sum::<f64>() / kk as f64;
                assert_abs_diff_eq!(got[i], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn small_windows_define_infinite_distance() {
        let w = window_at(&[5]);
        assert_eq!(mean_knn_distance(&w, 3, 1.0), vec![f64::INFINITY]);
        let empty = EventWindow {
            t_start: 0,
            t_end: 10,
            sensor: SensorGeometry::new(64, 64),
            events: vec![],
        };
        assert!(mean_knn_distance(&empty, 3, 1.0).is_empty());
    }

    #[test]
    fn duplicate_events_have_zero_mean_distance() {
        let w = line_window(&[7, 7]);
        assert_eq!(mean_knn_distance(&w, 1, 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn density_examples() {
        assert_abs_diff_eq!(density(&[0.99], 0.01)[0], 1.0, epsilon = 1e-12);
        assert_eq!(density(&[f64::INFINITY], 0.01), vec![0.0]);
        let d = density(&[0.0, 1.0], 0.5);
        assert_abs_diff_eq!(d[0], 2.0, epsilon = 1e-12);
        assert!(d.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn temporal_variance_examples() {
        // Normalised times {0, 0.5, 1} -> variance 1/6.
        assert_abs_diff_eq!(
            temporal_variance(&window_at(&[0, 5, 10])),
            1.0 / 6.0,
            epsilon = 1e-12
        );
        // Two events at the span ends -> the maximum 0.25.
        assert_abs_diff_eq!(
            temporal_variance(&window_at(&[100, 300])),
            0.25,
            epsilon = 1e-12
        );
        assert_eq!(temporal_variance(&window_at(&[42, 42, 42])), 0.0);
        let empty = EventWindow {
            t_start: 0,
            t_end: 10,
            sensor: SensorGeometry::new(64, 64),
            events: vec![],
        };
        assert_eq!(temporal_variance(&empty), 0.0);
    }

    #[test]
    fn variance_stays_in_quarter_range() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = rng.random_range(1..40);
            let times: Vec<u64> = (0..m).map(|_| rng.random_range(0..10_000)).collect();
            let v = temporal_variance(&window_at(&times));
            assert!((0.0..=0.25).contains(&v), "variance {v}");
        }
    }

    #[test]
    fn sigmoid_rate_midpoint_and_slope() {
        assert_abs_diff_eq!(sampling_rate(0.3, 5.0, 0.3), 0.5, epsilon = 1e-12);
        // alpha = 1, beta = 0, variance = ln 3 gives exactly 0.75.
        assert_abs_diff_eq!(sampling_rate(3.0f64.ln(), 1.0, 0.0), 0.75, epsilon = 1e-12);
        // Monotone increasing in variance.
        assert!(sampling_rate(0.2, 10.0, 0.1) > sampling_rate(0.1, 10.0, 0.1));
        assert!(sampling_rate(f64::MAX.ln(), 1e3, 0.0) <= 1.0);
    }

    #[test]
    fn final_probability_normalises_by_max_density() {
        let p = final_probabilities(0.8, &[1.0, 2.0, 4.0]);
        assert_abs_diff_eq!(p[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.8, epsilon = 1e-12);
        // All-zero densities fall back to the bare rate.
        assert_eq!(final_probabilities(0.6, &[0.0, 0.0]), vec![0.6, 0.6]);
        assert!(final_probabilities(0.5, &[]).is_empty());
    }

    #[test]
    fn sample_is_deterministic_and_order_preserving() {
        let w = line_window(&[0, 3, 5, 9, 14, 20, 21, 30]);
        let a = sample(&w, &cfg(7)).unwrap();
        let b = sample(&w, &cfg(7)).unwrap();
        assert_eq!(a.retained, b.retained);
        assert_eq!(a.probabilities, b.probabilities);
        assert!(a.retained_indices.windows(2).all(|w| w[0] < w[1]));
        for (&idx, ev) in a.retained_indices.iter().zip(&a.retained) {
            assert_eq!(w.events[idx], *ev);
        }
    }

    #[test]
    fn probability_extremes_keep_all_or_none() {
        // Coincident events share one density, so the max-normalized
        // probability is exactly the sigmoid rate for every event.
        let w = line_window(&[7, 7, 7, 7, 7, 7]);
        let mut keep_all = cfg(1);
        keep_all.beta = -1e9; // sigmoid saturates to 1
        let s = sample(&w, &keep_all).unwrap();
        assert_eq!(s.retained.len(), 6);
        assert!(s.probabilities.iter().all(|&p| p == 1.0));
        let mut keep_none = cfg(1);
        keep_none.beta = 1e9; // sigmoid saturates to 0
        let s = sample(&w, &keep_none).unwrap();
        assert!(s.retained.is_empty());
        assert_eq!(s.probabilities.len(), 6);

        // With uneven density the saturated sigmoid still caps the densest
        // event at probability 1; sparser events scale below it.
        let uneven = line_window(&[0, 1, 2, 3, 4, 5]);
        let s = sample(&uneven, &keep_all).unwrap();
        let max = s.probabilities.iter().cloned().fold(0.0, f64::max);
        assert_abs_diff_eq!(max, 1.0, epsilon = 1e-12);
        assert!(s.probabilities.iter().any(|&p| p < 1.0));
    }

    #[test]
    fn empty_window_samples_to_empty_stream() {
        let empty = EventWindow {
            t_start: 0,
            t_end: 10,
            sensor: SensorGeometry::new(64, 64),
            events: vec![],
        };
        let s = sample(&empty, &cfg(3)).unwrap();
        assert!(s.is_empty() && s.probabilities.is_empty());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let w = line_window(&[0, 1]);
        let mut bad = cfg(1);
        bad.epsilon = 0.0;
        assert!(sample(&w, &bad).is_err());
        let mut bad = cfg(1);
        bad.k = 0;
        assert!(sample(&w, &bad).is_err());
        let mut bad = cfg(1);
        bad.spatial_time_scale = -1.0;
        assert!(sample(&w, &bad).is_err());
    }

    // Retention counts are Binomial(sum P, ...): 5 sigma bounds hold for
    // each frozen seed.
    #[test]
    fn retention_count_concentrates_on_probability_mass() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let events: Vec<Event> = (0..2000)
            .map(|_| Event {
                x: rng.random_range(0..128),
                y: rng.random_range(0..128),
                t: rng.random_range(0..100_000),
                p: 1,
            })
            .collect();
        let w = EventWindow {
            t_start: 0,
            t_end: 100_000,
            sensor: SensorGeometry::new(128, 128),
            events,
        };
        for seed in 0..10 {
            let mut c = cfg(seed);
            c.beta = 0.02;
            c.spatial_time_scale = SamplingConfig::default_time_scale(w.sensor, 100_000);
            let s = sample(&w, &c).unwrap();
            let mean: f64 = s.probabilities.iter().sum();
            let var: f64 = s.probabilities.iter().map(|p| p * (1.0 - p)).sum();
            let got = s.retained.len() as f64;
            assert!(
                (got - mean).abs() <= 5.0 * var.sqrt().max(1.0),
                "seed {seed}: retained {got}, expected {mean}"
            );
        }
    }

    // The adaptive pass should prefer the dense object tube over sparse
    // background noise, averaged across seeds.
    #[test]
    fn object_tube_outlives_noise() {
        let mut tube = 0.0;
        let mut outside = 0.0;
        for seed in 0..20 {
            let spec = SceneSpec {
                width: 128,
                height: 128,
                duration_s: 0.1,
                noise_rate: 1000.0,
                seed,
                objects: vec![ObjectSpec {
                    x0: 30.0,
                    y0: 64.0,
                    vx: 400.0,
                    vy: 0.0,
                    radius: 2.0,
                    rate: 3000.0,
                }],
            };
            let (events, labels) = synthesize_scene_labeled(&spec).unwrap();
            let windows = window_stream(&events, 100_000, spec.sensor()).unwrap();
            assert_eq!(windows.len(), 1);
            let mut c = cfg(seed);
            c.spatial_time_scale = SamplingConfig::default_time_scale(spec.sensor(), 100_000);
            let s = sample(&windows[0], &c).unwrap();
            let retained: std::collections::HashSet<usize> =
                s.retained_indices.iter().copied().collect();
            let (mut tube_kept, mut tube_total) = (0usize, 0usize);
            let (mut out_kept, mut out_total) = (0usize, 0usize);
            for (i, &label) in labels.iter().enumerate() {
                if label == 0 {
                    tube_total += 1;
                    tube_kept += retained.contains(&i) as usize;
                } else {
                    out_total += 1;
                    out_kept += retained.contains(&i) as usize;
                }
            }
            tube += tube_kept as f64 / tube_total as f64;
            outside += out_kept as f64 / out_total as f64;
        }
        tube /= 20.0;
        outside /= 20.0;
        assert!(
            tube > outside,
            "tube retention {tube} should beat noise retention {outside}"
        );
    }
}
