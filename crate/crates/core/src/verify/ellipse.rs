use serde::{Deserialize, Serialize};

use super::streaming::streaming_kernel_expectations;
use super::SweepResult;
use crate::error::{Error, Result};
use crate::kernels::{boundary_moments, Bandwidth};
use crate::pointcloud::{EllipseSampler, PointCloud};

/// The filled ellipse `x^2/a^2 + y^2/b^2 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseGeometry {
    pub a: f64,
    pub b: f64,
}

impl EllipseGeometry {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::config(format!("ellipse semi-axes must be positive, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.a * self.b
    }

    /// `sqrt(x^2/a^2 + y^2/b^2)`; at most 1 inside.
    pub fn level(&self, p: &[f64]) -> f64 {
        ((p[0] / self.a).powi(2) + (p[1] / self.b).powi(2)).sqrt()
    }

    /// Closest point on the boundary curve to `p`.
    pub fn closest_point(&self, p: &[f64]) -> [f64; 2] {
        // reduce to the first quadrant with the long axis first
        let swap = self.b > self.a;
        let (e0, e1) = if swap { (self.b, self.a) } else { (self.a, self.b) };
        let (x, y) = if swap { (p[1], p[0]) } else { (p[0], p[1]) };
        let (sx, sy) = (x.signum(), y.signum());
        let (cx, cy) = closest_first_quadrant(e0, e1, x.abs(), y.abs());
        let (cx, cy) = (cx * sx, cy * sy);
        if swap {
            [cy, cx]
        } else {
            [cx, cy]
        }
    }

    /// Euclidean distance from `p` to the boundary curve.
    pub fn distance(&self, p: &[f64]) -> f64 {
        let c = self.closest_point(p);
        (c[0] - p[0]).hypot(c[1] - p[1])
    }

    /// Parameter `theta` of a boundary point `(a cos theta, b sin theta)`.
    pub fn parameter(&self, boundary_point: &[f64]) -> f64 {
        (boundary_point[1] / self.b).atan2(boundary_point[0] / self.a)
    }

    /// Curvature of the boundary at parameter `theta`.
    pub fn curvature(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let (a, b) = (self.a, self.b);
        a * b / (b * b * c * c + a * a * s * s).powf(1.5)
    }

    /// Outward unit normal at parameter `theta`.
    pub fn outward_normal(&self, theta: f64) -> [f64; 2] {
        let (s, c) = theta.sin_cos();
        let (nx, ny) = (self.b * c, self.a * s);
        let r = nx.hypot(ny);
        [nx / r, ny / r]
    }
}

fn closest_first_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1).powi(2);
                let s = bisect_root(r0, z0, z1, g);
                return (r0 * y0 / (s + r0), y1 / (s + 1.0));
            }
            return (y0, y1);
        }
        return (0.0, e1);
    }
    let numer = e0 * y0;
    let denom = e0 * e0 - e1 * e1;
    if numer < denom {
        let xde = numer / denom;
        (e0 * xde, e1 * (1.0 - xde * xde).max(0.0).sqrt())
    } else {
        (e0, 0.0)
    }
}

// root of (r0 z0/(s+r0))^2 + (z1/(s+1))^2 = 1 bracketed as in Eberly's
// distance-to-ellipse construction
fn bisect_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..200 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let g = (n0 / (s + r0)).powi(2) + (z1 / (s + 1.0)).powi(2) - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Tensor grid with the given spacing, restricted to the filled ellipse.
pub fn ellipse_targets(geometry: &EllipseGeometry, spacing: f64) -> Result<PointCloud> {
    if !(spacing > 0.0) {
        return Err(Error::config(format!("target spacing must be positive, got {spacing}")));
    }
    let nx = (geometry.a / spacing).floor() as i64;
    let ny = (geometry.b / spacing).floor() as i64;
    let mut coords = Vec::new();
    for i in -nx..=nx {
        for j in -ny..=ny {
            let p = [i as f64 * spacing, j as f64 * spacing];
            if geometry.level(&p) <= 1.0 {
                coords.extend_from_slice(&p);
            }
        }
    }
    PointCloud::new(coords, 2, 2)
}

/// Recovers `(m - 1) H` from kernel integrals at targets near the boundary:
/// `(vol E / eps^m - m0(b)) / (eps m1(b) / 2)`, where `E` is the sample
/// mean of the kernel and `vol` the volume of the domain.
pub fn extract_mean_curvature(expectation: &[f64], b: &[f64], eps: Bandwidth, m: usize, volume: f64) -> Vec<f64> {
    let scale = volume / eps.get().powi(m as i32);
    expectation
        .iter()
        .zip(b)
        .map(|(&e, &bi)| {
            let (m0, m1, _) = boundary_moments(bi, eps, m);
            (scale * e - m0) / (eps.get() * m1 / 2.0)
        })
        .collect()
}

/// Sampled kernel difference and the expansion it should match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeTerms {
    /// `(K f)(x) - f(x) (K 1)(x)`, scaled by `vol / eps^m`.
    pub lhs: Vec<f64>,
    /// `eps m1(b) df/deta + eps^2 m2(b) / 2 * lap f`.
    pub rhs: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub median_relative_error: f64,
}

/// Compares `E[k f] - f(x) E[k]` against the first- and second-order
/// derivative terms of the kernel expansion.
#[allow(clippy::too_many_arguments)]
pub fn verify_derivative_terms(
    kernel_f: &[f64],
    kernel_one: &[f64],
    f_at_targets: &[f64],
    normal_derivative: &[f64],
    laplacian: &[f64],
    b: &[f64],
    eps: Bandwidth,
    m: usize,
    volume: f64,
) -> DerivativeTerms {
    let e = eps.get();
    let scale = volume / e.powi(m as i32);
    let mut lhs = Vec::with_capacity(b.len());
    let mut rhs = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let (_, m1, m2) = boundary_moments(b[i], eps, m);
        lhs.push(scale * (kernel_f[i] - f_at_targets[i] * kernel_one[i]));
        rhs.push(e * m1 * normal_derivative[i] + e * e * m2 / 2.0 * laplacian[i]);
    }
    let relative_errors: Vec<f64> = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| if *r == 0.0 { l.abs() } else { ((l - r) / r).abs() })
        .collect();
    DerivativeTerms {
        median_relative_error: median(&relative_errors),
        lhs,
        rhs,
        relative_errors,
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean-curvature extraction on the ellipse at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub eps: f64,
    pub samples: u64,
    pub theta: Vec<f64>,
    pub distance: Vec<f64>,
    pub extracted: Vec<f64>,
    pub exact: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub median_relative_error: f64,
}

const BATCH_SIZE: usize = 100_000;

fn batches_for(samples: u64) -> (usize, usize) {
    let size = BATCH_SIZE.min(samples.max(1) as usize);
    ((samples as usize).div_ceil(size), size)
}

struct NearBoundary {
    cloud: PointCloud,
    distance: Vec<f64>,
    theta: Vec<f64>,
}

impl NearBoundary {
    fn concat(self, other: Self) -> Result<Self> {
        let mut coords = self.cloud.coords().to_vec();
        coords.extend_from_slice(other.cloud.coords());
        let mut distance = self.distance;
        distance.extend(other.distance);
        let mut theta = self.theta;
        theta.extend(other.theta);
        Ok(Self {
            cloud: PointCloud::new(coords, 2, 2)?,
            distance,
            theta,
        })
    }
}

const INTERIOR_SPACING: f64 = 0.05;

fn select_targets(geometry: &EllipseGeometry, spacing: f64, keep: impl Fn(f64) -> bool) -> Result<NearBoundary> {
    let grid = ellipse_targets(geometry, spacing)?;
    let mut coords = Vec::new();
    let (mut distance, mut theta) = (Vec::new(), Vec::new());
    for p in grid.points() {
        let c = geometry.closest_point(p);
        let d = (c[0] - p[0]).hypot(c[1] - p[1]);
        if keep(d) {
            coords.extend_from_slice(p);
            distance.push(d);
            theta.push(geometry.parameter(&c));
        }
    }
    if distance.is_empty() {
        return Err(Error::config("no targets in the requested distance band"));
    }
    Ok(NearBoundary {
        cloud: PointCloud::new(coords, 2, 2)?,
        distance,
        theta,
    })
}

/// Estimates `(m - 1) H` at grid targets within `eps / 4` of the boundary
/// from `samples` uniform draws, and compares with the exact curvature.
pub fn ellipse_curvature_experiment(
    geometry: &EllipseGeometry,
    eps: Bandwidth,
    spacing: f64,
    samples: u64,
    seed: u64,
) -> Result<CurvatureReport> {
    let e = eps.get();
    let targets = select_targets(geometry, spacing, |d| d < e / 4.0)?;
    let sampler = EllipseSampler::new(geometry.a, geometry.b)?;
    let (batches, size) = batches_for(samples);
    let one = |_: &[f64]| 1.0;
    let mut expectations = streaming_kernel_expectations(&targets.cloud, &sampler, &[&one], eps, batches, size, seed);
    let expectation = expectations.pop().unwrap_or_default();
    let extracted = extract_mean_curvature(&expectation, &targets.distance, eps, 2, geometry.area());
    let exact: Vec<f64> = targets.theta.iter().map(|&t| geometry.curvature(t)).collect();
    let relative_errors: Vec<f64> = extracted
        .iter()
        .zip(&exact)
        .map(|(x, h)| ((x - h) / h).abs())
        .collect();
    Ok(CurvatureReport {
        eps: e,
        samples: (batches * size) as u64,
        median_relative_error: median(&relative_errors),
        theta: targets.theta,
        distance: targets.distance,
        extracted,
        exact,
        relative_errors,
    })
}

/// Derivative-term check on the ellipse for `f = R^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    /// Median relative error at targets within `eps / 4` of the boundary.
    pub boundary: SweepResult,
    /// Median relative error at targets farther than `3 eps` from it.
    pub interior: SweepResult,
    /// Largest scaled `|K f - f K 1|` for `f = 1`.
    pub constant_residual: Vec<f64>,
    pub samples: u64,
}

/// Runs the `f = R^3` derivative check at each bandwidth in `eps_list`.
pub fn ellipse_derivative_experiment(
    geometry: &EllipseGeometry,
    eps_list: &[f64],
    spacing: f64,
    samples: u64,
    seed: u64,
) -> Result<DerivativeReport> {
    let g = *geometry;
    let cube = move |p: &[f64]| g.level(p).powi(3);
    let one = |_: &[f64]| 1.0;
    let sampler = EllipseSampler::new(g.a, g.b)?;
    let (batches, size) = batches_for(samples);
    let (mut boundary, mut interior, mut constant) = (Vec::new(), Vec::new(), Vec::new());
    for &e in eps_list {
        let eps = Bandwidth::new(e)?;
        let near = select_targets(geometry, spacing, |d| d < e / 4.0)?;
        // interior targets only need a sparse grid
        let near = match select_targets(geometry, INTERIOR_SPACING.max(spacing), |d| d > 3.0 * e) {
            Ok(inner) => near.concat(inner)?,
            Err(_) => near,
        };
        let ex = streaming_kernel_expectations(&near.cloud, &sampler, &[&cube, &one], eps, batches, size, seed);
        let (kf, k1) = (&ex[0], &ex[1]);
        let mut f_t = Vec::new();
        let mut dn = Vec::new();
        let mut lap = Vec::new();
        for (i, p) in near.cloud.points().enumerate() {
            let r = g.level(p);
            let grad = [3.0 * r * p[0] / (g.a * g.a), 3.0 * r * p[1] / (g.b * g.b)];
            let n = g.outward_normal(near.theta[i]);
            f_t.push(r.powi(3));
            dn.push(grad[0] * n[0] + grad[1] * n[1]);
            // 3R((cos^2 + 1)/a^2 + (sin^2 + 1)/b^2) with (x, y) = (aR cos, bR sin)
            let lap_i = if r > 0.0 {
                3.0 * r * ((p[0] / (g.a * r)).powi(2) + 1.0) / (g.a * g.a)
                    + 3.0 * r * ((p[1] / (g.b * r)).powi(2) + 1.0) / (g.b * g.b)
            } else {
                0.0
            };
            lap.push(lap_i);
        }
        let terms = verify_derivative_terms(kf, k1, &f_t, &dn, &lap, &near.distance, eps, 2, g.area());
        let pick = |pred: &dyn Fn(f64) -> bool| {
            let errs: Vec<f64> = near
                .distance
                .iter()
                .zip(&terms.relative_errors)
                .filter(|(d, _)| pred(**d))
                .map(|(_, r)| *r)
                .collect();
            median(&errs)
        };
        boundary.push(pick(&|d| d < e / 4.0));
        interior.push(pick(&|d| d > 3.0 * e));
        let flat = verify_derivative_terms(k1, k1, &vec![1.0; k1.len()], &dn, &lap, &near.distance, eps, 2, g.area());
        constant.push(flat.lhs.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    Ok(DerivativeReport {
        boundary: SweepResult::new(eps_list.to_vec(), boundary),
        interior: SweepResult::new(eps_list.to_vec(), interior),
        constant_residual: constant,
        samples: (batches * size) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_closed_form() {
        let g = EllipseGeometry::new(1.0, 2.0 / 3.0).unwrap();
        assert!((g.curvature(0.0) - 2.25).abs() < 1e-12);
        let c = EllipseGeometry::new(1.0, 1.0).unwrap();
        for t in [0.0, 0.3, 1.0, 2.5] {
            assert!((c.curvature(t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closest_point_on_circle_is_radial() {
        let c = EllipseGeometry::new(1.0, 1.0).unwrap();
        let p = [0.3, -0.4];
        let q = c.closest_point(&p);
        assert!((q[0] - 0.6).abs() < 1e-9 && (q[1] + 0.8).abs() < 1e-9);
        assert!((c.distance(&p) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn closest_point_is_orthogonal_projection() {
        let g = EllipseGeometry::new(1.0, 2.0 / 3.0).unwrap();
        for p in [[0.9, 0.1], [-0.2, 0.5], [0.0, -0.6], [0.7, 0.0], [0.05, 0.01]] {
            let q = g.closest_point(&p);
            assert!((g.level(&q) - 1.0).abs() < 1e-9);
            let n = g.outward_normal(g.parameter(&q));
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            // displacement is parallel to the normal
            assert!((dx * n[1] - dy * n[0]).abs() < 1e-9, "{p:?}");
            // and no grid point on the curve is closer
            let d = g.distance(&p);
            for k in 0..2000 {
                let t = k as f64 * std::f64::consts::TAU / 2000.0;
                let c = [g.a * t.cos(), g.b * t.sin()];
                assert!((c[0] - p[0]).hypot(c[1] - p[1]) >= d - 1e-9);
            }
        }
    }

    #[test]
    fn exact_integral_has_zero_curvature_term() {
        // feeding m0 exactly yields zero
        let eps = Bandwidth::new(0.1).unwrap();
        let b = [0.0, 0.01];
        let e: Vec<f64> = b.iter().map(|&bi| boundary_moments(bi, eps, 2).0 * 0.01 / 3.0).collect();
        let h = extract_mean_curvature(&e, &b, eps, 2, 3.0);
        assert!(h.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
