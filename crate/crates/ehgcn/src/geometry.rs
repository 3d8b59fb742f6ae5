//! Poincaré-ball primitives with explicit curvature tracking.
//!
//! Points live in the open ball of radius `1/sqrt(c)` for curvature
//! parameter `c > 0`. Operations follow the gyrovector calculus: Möbius
//! addition, the Möbius matrix-vector product, exponential and logarithmic
//! maps at the origin, the induced distance, and the conformal metric.
//! Every op that produces a point projects it back inside a small safety
//! margin from the boundary.

use ndarray::{Array1, Array2};
use thiserror::Error;

/// Default relative margin kept between points and the ball boundary.
pub const DEFAULT_BOUNDARY_EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("curvature must be positive and finite; got {0}")]
    InvalidCurvature(f64),
    #[error("curvature mismatch: {0} vs {1}")]
    CurvatureMismatch(f64, f64),
    #[error("coordinates must be finite")]
    NonFiniteCoords,
    #[error("norm {norm} is outside the radius-{radius} ball")]
    OutsideBall { norm: f64, radius: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Positive ball curvature parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(c: f64) -> Result<Self, GeometryError> {
        if c.is_finite() && c > 0.0 {
            Ok(Curvature(c))
        } else {
            Err(GeometryError::InvalidCurvature(c))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }

    /// Ball radius `1/sqrt(c)`.
    pub fn radius(self) -> f64 {
        1.0 / self.0.sqrt()
    }

    fn matches(self, other: Curvature) -> Result<(), GeometryError> {
        if self.0 == other.0 {
            Ok(())
        } else {
            Err(GeometryError::CurvatureMismatch(self.0, other.0))
        }
    }
}

/// `tanh(z) / z`, smooth through zero.
pub fn tanhc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 3.0 + 2.0 * z2 * z2 / 15.0
    } else {
        z.tanh() / z
    }
}

/// `artanh(z) / z`, smooth through zero (needs `|z| < 1`).
pub fn artanhc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 + z2 / 3.0 + z2 * z2 / 5.0
    } else {
        z.atanh() / z
    }
}

/// `(sech^2(z) - tanhc(z)) / z^2`: the radial-derivative kernel of the
/// exponential map, smooth through zero.
pub(crate) fn dtanhc_ratio(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        -2.0 / 3.0 + 8.0 * z2 / 15.0
    } else {
        let sech2 = 1.0 - z.tanh().powi(2);
        (sech2 - tanhc(z)) / (z * z)
    }
}

/// `(1/(1-z^2) - artanhc(z)) / z^2`: the radial-derivative kernel of the
/// logarithmic map, smooth through zero.
pub(crate) fn dartanhc_ratio(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        2.0 / 3.0 + 4.0 * z2 / 5.0
    } else {
        (1.0 / (1.0 - z * z) - artanhc(z)) / (z * z)
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// A point inside the Poincaré ball for a specific curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    coords: Array1<f64>,
    c: Curvature,
}

/// A tangent vector based at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    coords: Array1<f64>,
}

impl TangentVector {
    pub fn new(coords: Array1<f64>) -> Self {
        TangentVector { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        TangentVector {
            coords: Array1::zeros(dim),
        }
    }

    pub fn coords(&self) -> &Array1<f64> {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Exponential map at the origin:
    /// `exp_o(v) = tanh(sqrt(c) |v|) * v / (sqrt(c) |v|)`, with
    /// `exp_o(0) = o`. The image always lands strictly inside the ball.
    pub fn exp_origin(&self, c: Curvature) -> ManifoldPoint {
        let z = c.sqrt() * norm(&self.coords);
        let scale = tanhc(z);
        project_to_ball(&self.coords * scale, c, DEFAULT_BOUNDARY_EPS)
            .expect("tanh keeps the image inside the ball")
    }
}

impl ManifoldPoint {
    /// Validates that the coordinates lie strictly inside the ball.
    pub fn new(coords: Array1<f64>, c: Curvature) -> Result<Self, GeometryError> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteCoords);
        }
        let n = norm(&coords);
        if c.get() * n * n >= 1.0 {
            return Err(GeometryError::OutsideBall {
                norm: n,
                radius: c.radius(),
            });
        }
        Ok(ManifoldPoint { coords, c })
    }

    pub fn origin(dim: usize, c: Curvature) -> Self {
        ManifoldPoint {
            coords: Array1::zeros(dim),
            c,
        }
    }

    pub fn coords(&self) -> &Array1<f64> {
        &self.coords
    }

    pub fn curvature(&self) -> Curvature {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn neg(&self) -> ManifoldPoint {
        ManifoldPoint {
            coords: -&self.coords,
            c: self.c,
        }
    }

    /// Conformal factor `lambda_c(x) = 2 / (1 - c |x|^2)`.
    pub fn conformal_factor(&self) -> Result<f64, GeometryError> {
        let n2 = self.coords.dot(&self.coords);
        let denom = 1.0 - self.c.get() * n2;
        if denom <= 0.0 {
            return Err(GeometryError::OutsideBall {
                norm: n2.sqrt(),
                radius: self.c.radius(),
            });
        }
        Ok(2.0 / denom)
    }

    /// Möbius addition `x (+) y`.
    pub fn mobius_add(&self, other: &ManifoldPoint) -> Result<ManifoldPoint, GeometryError> {
        self.c.matches(other.c)?;
        if self.dim() != other.dim() {
            return Err(GeometryError::DimensionMismatch(self.dim(), other.dim()));
        }
        let c = self.c.get();
        let x = &self.coords;
        let y = &other.coords;
        let x2 = x.dot(x);
        let y2 = y.dot(y);
        let xy = x.dot(y);
        let coef_x = 1.0 + 2.0 * c * xy + c * y2;
        let coef_y = 1.0 - c * x2;
        let denom = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
        let result = (x * coef_x + y * coef_y) / denom;
        project_to_ball(result, self.c, DEFAULT_BOUNDARY_EPS)
    }

    /// Möbius matrix-vector product
    /// `W (x) x = tanh((|Wx|/|x|) artanh(sqrt(c) |x|)) * Wx / (sqrt(c) |Wx|)`,
    /// with `x = o` or `Wx = 0` mapping to the origin.
    pub fn mobius_matvec(&self, w: &Array2<f64>) -> Result<ManifoldPoint, GeometryError> {
        if w.ncols() != self.dim() {
            return Err(GeometryError::DimensionMismatch(w.ncols(), self.dim()));
        }
        let c = self.c;
        let x_norm = norm(&self.coords);
        if x_norm == 0.0 {
            return Ok(ManifoldPoint::origin(w.nrows(), c));
        }
        let wx = w.dot(&self.coords);
        let wx_norm = norm(&wx);
        if wx_norm == 0.0 {
            return Ok(ManifoldPoint::origin(w.nrows(), c));
        }
        let arg = (wx_norm / x_norm) * (c.sqrt() * x_norm).atanh();
        let scale = arg.tanh() / (c.sqrt() * wx_norm);
        project_to_ball(wx * scale, c, DEFAULT_BOUNDARY_EPS)
    }

    /// Logarithmic map at the origin:
    /// `log_o(x) = artanh(sqrt(c) |x|) * x / (sqrt(c) |x|)`, the exact
    /// inverse of [`TangentVector::exp_origin`].
    pub fn log_origin(&self) -> TangentVector {
        let z = self.c.sqrt() * norm(&self.coords);
        TangentVector {
            coords: &self.coords * artanhc(z),
        }
    }

    /// Geodesic distance `d(x, y) = (2/sqrt(c)) artanh(sqrt(c) |(-x) (+) y|)`.
    pub fn distance(&self, other: &ManifoldPoint) -> Result<f64, GeometryError> {
        let diff = self.neg().mobius_add(other)?;
        let z = self.c.sqrt() * norm(&diff.coords);
        Ok(2.0 / self.c.sqrt() * z.atanh())
    }

    /// Riemannian inner product of origin-based tangent vectors carried at
    /// `self`: `lambda_c(x)^2 <u, v>`.
    pub fn inner_product(
        &self,
        u: &TangentVector,
        v: &TangentVector,
    ) -> Result<f64, GeometryError> {
        if u.dim() != v.dim() {
            return Err(GeometryError::DimensionMismatch(u.dim(), v.dim()));
        }
        let lambda = self.conformal_factor()?;
        Ok(lambda * lambda * u.coords.dot(&v.coords))
    }
}

/// Clamps raw coordinates into the ball, leaving a relative `eps` margin:
/// points with `|x| > (1 - eps)/sqrt(c)` rescale onto that radius;
/// interior points pass through untouched.
pub fn project_to_ball(
    coords: Array1<f64>,
    c: Curvature,
    eps: f64,
) -> Result<ManifoldPoint, GeometryError> {
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteCoords);
    }
    let max_norm = (1.0 - eps) * c.radius();
    let n = norm(&coords);
    let coords = if n > max_norm {
        coords * (max_norm / n)
    } else {
        coords
    };
    Ok(ManifoldPoint { coords, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    fn c(v: f64) -> Curvature {
        Curvature::new(v).unwrap()
    }

    fn point1(x: f64, cv: f64) -> ManifoldPoint {
        ManifoldPoint::new(array![x], c(cv)).unwrap()
    }

    #[test]
    fn curvature_rejects_nonpositive() {
        assert!(Curvature::new(0.0).is_err());
        assert!(Curvature::new(-1.0).is_err());
        assert!(Curvature::new(f64::NAN).is_err());
        assert_eq!(c(4.0).radius(), 0.5);
    }

    #[test]
    fn conformal_factor_reference_values() {
        // c = 1, |x| = 0.5: 2 / (1 - 0.25) = 8/3.
        let x = point1(0.5, 1.0);
        assert_abs_diff_eq!(
            x.conformal_factor().unwrap(),
            2.6666666666666665,
            epsilon = 1e-12
        );
        // Origin: lambda = 2 for every curvature.
        let o = ManifoldPoint::origin(3, c(0.3));
        assert_abs_diff_eq!(o.conformal_factor().unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mobius_add_is_relativistic_addition_in_1d() {
        // 1-D, c = 1: x (+) y = (x + y) / (1 + xy).
        let x = point1(0.3, 1.0);
        let y = point1(0.4, 1.0);
        let sum = x.mobius_add(&y).unwrap();
        assert_abs_diff_eq!(sum.coords()[0], 0.625, epsilon = 1e-12);
    }

    #[test]
    fn mobius_identity_and_inverse() {
        let x = ManifoldPoint::new(array![0.3, -0.2, 0.1], c(2.0)).unwrap();
        let o = ManifoldPoint::origin(3, c(2.0));
        let left = o.mobius_add(&x).unwrap();
        let right = x.mobius_add(&o).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(left.coords()[i], x.coords()[i], epsilon = 1e-15);
            assert_abs_diff_eq!(right.coords()[i], x.coords()[i], epsilon = 1e-15);
        }
        let zero = x.neg().mobius_add(&x).unwrap();
        assert!(norm(zero.coords()) < 1e-15);
    }

    #[test]
    fn mobius_matvec_scalar_oracle() {
        // 1-D, W = [2], c = 1, x = 0.3: tanh(2 artanh 0.3) = 0.6/1.09 by the
        // double-angle identity.
        let x = point1(0.3, 1.0);
        let w = array![[2.0]];
        let got = x.mobius_matvec(&w).unwrap();
        let oracle = 2.0 * 0.3 / (1.0 + 0.3 * 0.3);
        assert_abs_diff_eq!(got.coords()[0], oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(got.coords()[0], 0.5504587155963304, epsilon = 1e-12);
    }

    #[test]
    fn mobius_matvec_zero_cases() {
        let o = ManifoldPoint::origin(2, c(1.0));
        let w = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let out = o.mobius_matvec(&w).unwrap();
        assert_eq!(out.dim(), 3);
        assert_eq!(norm(out.coords()), 0.0);

        let x = ManifoldPoint::new(array![0.2, 0.0], c(1.0)).unwrap();
        let null_w = array![[0.0, 1.0]]; // W x = 0 for this x
        let out = x.mobius_matvec(&null_w).unwrap();
        assert_eq!(norm(out.coords()), 0.0);
    }

    #[test]
    fn mobius_matvec_composes_exp_and_log() {
        // W (x) x = exp_o(W log_o(x)) on the nose.
        let x = ManifoldPoint::new(array![0.2, -0.35, 0.05], c(0.7)).unwrap();
        let w = array![[0.5, 1.0, 0.0], [-0.3, 0.2, 0.9]];
        let direct = x.mobius_matvec(&w).unwrap();
        let via_maps =
            TangentVector::new(w.dot(x.log_origin().coords())).exp_origin(c(0.7));
        for i in 0..2 {
            assert_abs_diff_eq!(direct.coords()[i], via_maps.coords()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_map_scalar_oracle() {
        // 1-D, c = 1, v = 0.5 -> tanh(0.5).
        let v = TangentVector::new(array![0.5]);
        let x = v.exp_origin(c(1.0));
        assert_abs_diff_eq!(x.coords()[0], 0.46211715726000974, epsilon = 1e-12);
        assert_abs_diff_eq!(x.coords()[0], 0.5f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn log_map_inverts_exp_map() {
        // 1-D, c = 1, x = tanh(0.5) -> v = 0.5.
        let x = point1(0.5f64.tanh(), 1.0);
        assert_abs_diff_eq!(x.log_origin().coords()[0], 0.5, epsilon = 1e-12);
        // Degenerate cases.
        let o = ManifoldPoint::origin(4, c(2.0));
        assert_eq!(norm(o.log_origin().coords()), 0.0);
        let z = TangentVector::zeros(4).exp_origin(c(2.0));
        assert_eq!(norm(z.coords()), 0.0);
    }

    #[test]
    fn distance_reference_values() {
        // c = 1, origin to 0.5: 2 artanh(0.5) = ln 3.
        let o = ManifoldPoint::origin(1, c(1.0));
        let x = point1(0.5, 1.0);
        assert_abs_diff_eq!(o.distance(&x).unwrap(), 1.0986122886681096, epsilon = 1e-12);
        assert_abs_diff_eq!(o.distance(&x).unwrap(), 3.0f64.ln(), epsilon = 1e-12);
        assert_eq!(x.distance(&x).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_reference_value() {
        // u = v = e1 at |x| = 0.5, c = 1: lambda^2 = (8/3)^2 = 64/9.
        let x = point1(0.5, 1.0);
        let e1 = TangentVector::new(array![1.0]);
        assert_abs_diff_eq!(
            x.inner_product(&e1, &e1).unwrap(),
            7.111111111111111,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mismatches_are_structured_errors() {
        let x = point1(0.1, 1.0);
        let y = point1(0.1, 2.0);
        assert!(matches!(
            x.mobius_add(&y),
            Err(GeometryError::CurvatureMismatch(..))
        ));
        let z = ManifoldPoint::new(array![0.1, 0.1], c(1.0)).unwrap();
        assert!(matches!(
            x.mobius_add(&z),
            Err(GeometryError::DimensionMismatch(..))
        ));
        let w = array![[1.0, 0.0]];
        assert!(matches!(
            x.mobius_matvec(&w),
            Err(GeometryError::DimensionMismatch(..))
        ));
        assert!(ManifoldPoint::new(array![1.0], c(1.0)).is_err());
        assert!(ManifoldPoint::new(array![f64::NAN], c(1.0)).is_err());
    }

    #[test]
    fn projection_clamps_only_outside_margin() {
        let cv = c(1.0);
        let inside = project_to_ball(array![0.3, 0.0], cv, 1e-5).unwrap();
        assert_eq!(inside.coords()[0], 0.3);
        let outside = project_to_ball(array![3.0, 4.0], cv, 1e-5).unwrap();
        let n = norm(outside.coords());
        assert_abs_diff_eq!(n, 1.0 - 1e-5, epsilon = 1e-12);
        // Direction is preserved.
        assert_abs_diff_eq!(
            outside.coords()[0] / outside.coords()[1],
            0.75,
            epsilon = 1e-12
        );
    }

    #[test]
    fn euclidean_limit_at_tiny_curvature() {
        let cv = c(1e-8);
        let x = ManifoldPoint::new(array![0.5, -1.0], cv).unwrap();
        let y = ManifoldPoint::new(array![2.0, 0.25], cv).unwrap();
        let sum = x.mobius_add(&y).unwrap();
        assert_abs_diff_eq!(sum.coords()[0], 2.5, epsilon = 1e-6);
        assert_abs_diff_eq!(sum.coords()[1], -0.75, epsilon = 1e-6);

        let v = TangentVector::new(array![1.5, 0.5]);
        let e = v.exp_origin(cv);
        assert_abs_diff_eq!(e.coords()[0], 1.5, epsilon = 1e-6);
        assert_abs_diff_eq!(e.coords()[1], 0.5, epsilon = 1e-6);

        let lg = y.log_origin();
        assert_abs_diff_eq!(lg.coords()[0], 2.0, epsilon = 1e-6);

        // Distance limits to twice the Euclidean distance.
        let d = x.distance(&y).unwrap();
        let euclid = ((1.5f64).powi(2) + (1.25f64).powi(2)).sqrt();
        assert_abs_diff_eq!(d, 2.0 * euclid, epsilon = 1e-5);
    }

    fn sampled_point(cv: f64, dim: usize, radius_frac: f64, dirs: &[f64]) -> ManifoldPoint {
        let raw = Array1::from_vec(dirs[..dim].to_vec());
        let n = norm(&raw);
        let target = radius_frac * 0.9 / cv.sqrt();
        let coords = if n > 0.0 { raw * (target / n) } else { raw };
        ManifoldPoint::new(coords, c(cv)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exp_log_roundtrip(
            cv in prop::sample::select(vec![0.1, 1.0, 2.0]),
            dim in prop::sample::select(vec![1usize, 2, 8, 16]),
            dirs in prop::collection::vec(-1.0f64..1.0, 16),
            frac in 0.0f64..1.0,
        ) {
            let x = sampled_point(cv, dim, frac, &dirs);
            let back = x.log_origin().exp_origin(c(cv));
            for i in 0..dim {
                prop_assert!((back.coords()[i] - x.coords()[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn log_exp_roundtrip(
            cv in prop::sample::select(vec![0.1f64, 1.0, 2.0]),
            dim in prop::sample::select(vec![1usize, 2, 8, 16]),
            dirs in prop::collection::vec(-1.0f64..1.0, 16),
            frac in 0.0f64..1.0,
        ) {
            let raw = Array1::from_vec(dirs[..dim].to_vec());
            let n = norm(&raw);
            let target = frac * 0.9 / cv.sqrt();
            let v = TangentVector::new(if n > 0.0 { raw * (target / n) } else { raw });
            let back = v.exp_origin(c(cv)).log_origin();
            for i in 0..dim {
                prop_assert!((back.coords()[i] - v.coords()[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn left_cancellation_law(
            cv in prop::sample::select(vec![0.1, 1.0, 2.0]),
            dim in prop::sample::select(vec![1usize, 2, 8]),
            xd in prop::collection::vec(-1.0f64..1.0, 8),
            yd in prop::collection::vec(-1.0f64..1.0, 8),
            fx in 0.0f64..1.0,
            fy in 0.0f64..1.0,
        ) {
            // (-x) (+) (x (+) y) = y for any gyrogroup.
            let x = sampled_point(cv, dim, fx, &xd);
            let y = sampled_point(cv, dim, fy, &yd);
            let got = x.neg().mobius_add(&x.mobius_add(&y).unwrap()).unwrap();
            for i in 0..dim {
                prop_assert!((got.coords()[i] - y.coords()[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn results_stay_inside_the_ball(
            cv in prop::sample::select(vec![0.1, 1.0, 2.0]),
            dim in prop::sample::select(vec![1usize, 2, 8]),
            xd in prop::collection::vec(-1.0f64..1.0, 8),
            yd in prop::collection::vec(-1.0f64..1.0, 8),
            fx in 0.0f64..1.0,
            fy in 0.0f64..1.0,
        ) {
            let x = sampled_point(cv, dim, fx, &xd);
            let y = sampled_point(cv, dim, fy, &yd);
            let sum = x.mobius_add(&y).unwrap();
            prop_assert!(cv * norm(sum.coords()).powi(2) < 1.0);
        }

        #[test]
        fn distance_metric_axioms(
            cv in prop::sample::select(vec![0.1, 1.0, 2.0]),
            dim in prop::sample::select(vec![1usize, 2, 8]),
            xd in prop::collection::vec(-1.0f64..1.0, 8),
            yd in prop::collection::vec(-1.0f64..1.0, 8),
            zd in prop::collection::vec(-1.0f64..1.0, 8),
            fx in 0.0f64..1.0,
            fy in 0.0f64..1.0,
            fz in 0.0f64..1.0,
        ) {
            let x = sampled_point(cv, dim, fx, &xd);
            let y = sampled_point(cv, dim, fy, &yd);
            let z = sampled_point(cv, dim, fz, &zd);
            let dxy = x.distance(&y).unwrap();
            let dyx = y.distance(&x).unwrap();
            prop_assert!(dxy >= 0.0);
            prop_assert!((dxy - dyx).abs() < 1e-9);
            prop_assert!(x.distance(&x).unwrap() < 1e-9);
            let dxz = x.distance(&z).unwrap();
            let dyz = y.distance(&z).unwrap();
            prop_assert!(dxz <= dxy + dyz + 1e-9);
        }
    }
}
