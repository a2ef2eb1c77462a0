//! Distance-to-boundary, boundary direction and boundary-corrected density
//! estimated from the samples alone.
//!
//! The kernel density estimate `q_raw` and the kernel-weighted mean
//! displacement `mu` (the boundary direction estimator) are computed in one
//! pass over the neighbor lists. Their ratio `sqrt(pi) |mu| / q_raw` depends,
//! to leading order, only on `t = b / eps` through
//! `exp(-t^2) / (1 + erf t)`, which is inverted per point to recover `b`.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernels::{boundary_moments, erf, Bandwidth};
use crate::pointcloud::{NeighborList, PointCloud};

/// Estimated distances are clamped to `B_MAX_FACTOR * eps`.
pub const B_MAX_FACTOR: f64 = 5.0;
/// Sampling slack tolerated above the theoretical maximum ratio of 1.
pub const RATIO_SLACK: f64 = 0.1;

const QUAD_LINEAR: f64 = 1.15;
const QUAD_SQUARE: f64 = 0.35;
const BRANCH_POINT: f64 = 1.4;

/// Per-point boundary geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEstimate {
    /// Estimated distance to the boundary.
    pub b: Vec<f64>,
    /// Estimated outward unit direction, row-major with the ambient dimension.
    /// Zero where the direction is undefined.
    pub eta: Vec<f64>,
    /// `sqrt(pi) |mu| / q_raw`.
    pub ratio: Vec<f64>,
    /// `false` where `|mu|` was too small to define a direction.
    pub eta_defined: Vec<bool>,
    pub ambient_dim: usize,
}

impl BoundaryEstimate {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn eta(&self, i: usize) -> &[f64] {
        &self.eta[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Uncorrected kernel density estimate, biased low near the boundary.
    pub q_raw: Vec<f64>,
    /// `q_raw / m0_boundary(b)`.
    pub q_hat: Vec<f64>,
}

/// Interior / boundary split of the point indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DofPartition {
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
}

impl DofPartition {
    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `true` at boundary indices, for a cloud of `self.len()` points.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for &k in &self.boundary {
            mask[k] = true;
        }
        mask
    }
}

fn scale(n_points: usize, eps: Bandwidth, m: usize) -> f64 {
    1.0 / (n_points as f64 * eps.get().powi(m as i32))
}

/// Controls for the boundary estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptions {
    /// Project the BDE onto a local PCA tangent space when the intrinsic
    /// dimension is below the ambient one. Without it, curvature of the
    /// manifold leaks into `mu` and biases the distance estimate low
    /// everywhere.
    pub tangent_projection: bool,
    /// Subtract the estimated sampling variance from `|mu|^2` before taking
    /// the ratio. Meant for randomly sampled clouds, where the variance
    /// otherwise dominates `|mu|` away from the boundary; on grids it only
    /// adds bias.
    pub noise_correction: bool,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        Self {
            tangent_projection: true,
            noise_correction: false,
        }
    }
}

/// Per-point kernel sums behind every boundary estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSums {
    pub q_raw: Vec<f64>,
    /// BDE, row-major with the ambient dimension.
    pub mu: Vec<f64>,
    /// Estimated variance of `|mu|^2` under random sampling.
    pub mu_variance: Vec<f64>,
    pub ambient_dim: usize,
}

/// Orthogonal projector onto the span of the top `m` eigenvectors of the
/// symmetric `n x n` matrix `cov`.
fn tangent_projector(cov: &[f64], n: usize, m: usize) -> Vec<f64> {
    let eig = nalgebra::DMatrix::from_row_slice(n, n, cov).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut p = vec![0.0; n * n];
    for &k in &order[..m] {
        let v = eig.eigenvectors.column(k);
        for r in 0..n {
            for c in 0..n {
                p[r * n + c] += v[r] * v[c];
            }
        }
    }
    p
}

/// KDE, BDE and BDE variance in one sweep over the neighbor lists.
pub fn kernel_sums(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    eps: Bandwidth,
    m: usize,
    options: BoundaryOptions,
) -> Result<KernelSums> {
    check_len("neighbor rows", cloud.len(), neighbors.len())?;
    let n = cloud.ambient_dim();
    let c = scale(cloud.len(), eps, m);
    let inv_e2 = 1.0 / (eps.get() * eps.get());
    let inv_e = 1.0 / eps.get();
    let project = options.tangent_projection && m < n;
    let rows: Vec<(f64, Vec<f64>, f64)> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let xi = cloud.point(i);
            let projector = project.then(|| {
                let mut cov = vec![0.0; n * n];
                for (j, d2) in neighbors.row(i) {
                    let k = (-d2 * inv_e2).exp();
                    let xj = cloud.point(j);
                    for r in 0..n {
                        for s in 0..n {
                            cov[r * n + s] += k * (xj[r] - xi[r]) * (xj[s] - xi[s]);
                        }
                    }
                }
                tangent_projector(&cov, n, m)
            });
            let mut q = 0.0;
            let mut mu = vec![0.0; n];
            let mut variance = 0.0;
            let mut step = vec![0.0; n];
            for (j, d2) in neighbors.row(i) {
                let k = (-d2 * inv_e2).exp();
                q += k;
                if j == i {
                    continue;
                }
                let xj = cloud.point(j);
                match &projector {
                    Some(p) => {
                        for r in 0..n {
                            step[r] = (0..n).map(|s| p[r * n + s] * (xj[s] - xi[s])).sum::<f64>() * inv_e;
                        }
                    }
                    None => {
                        for r in 0..n {
                            step[r] = (xj[r] - xi[r]) * inv_e;
                        }
                    }
                }
                let mut len2 = 0.0;
                for r in 0..n {
                    mu[r] += k * step[r];
                    len2 += step[r] * step[r];
                }
                variance += k * k * len2;
            }
            mu.iter_mut().for_each(|v| *v *= c);
            (q * c, mu, variance * c * c)
        })
        .collect();
    let isolated = (0..cloud.len()).filter(|&i| neighbors.neighbors(i).len() <= 1).count();
    if isolated > 0 {
        warn!("{isolated} points have no neighbors other than themselves within the cutoff");
    }
    let mut sums = KernelSums {
        q_raw: Vec::with_capacity(rows.len()),
        mu: Vec::with_capacity(rows.len() * n),
        mu_variance: Vec::with_capacity(rows.len()),
        ambient_dim: n,
    };
    for (q, v, var) in rows {
        sums.q_raw.push(q);
        sums.mu.extend(v);
        sums.mu_variance.push(var);
    }
    Ok(sums)
}

/// `(q_raw, mu)` with the default options.
pub fn kde_and_bde(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    eps: Bandwidth,
    m: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sums = kernel_sums(cloud, neighbors, eps, m, BoundaryOptions::default())?;
    Ok((sums.q_raw, sums.mu))
}

/// Standard kernel density estimate `(1 / (N eps^m)) sum_j K_ij`.
pub fn kde(cloud: &PointCloud, neighbors: &NeighborList, eps: Bandwidth, m: usize) -> Result<Vec<f64>> {
    Ok(kde_and_bde(cloud, neighbors, eps, m)?.0)
}

/// Boundary direction estimator `(1 / (N eps^m)) sum_j K_ij (x_j - x_i) / eps`,
/// row-major with the ambient dimension.
pub fn bde(cloud: &PointCloud, neighbors: &NeighborList, eps: Bandwidth, m: usize) -> Result<Vec<f64>> {
    Ok(kde_and_bde(cloud, neighbors, eps, m)?.1)
}

/// `sqrt(pi) |mu_i| / q_raw_i`.
pub fn boundary_ratio(mu: &[f64], q_raw: &[f64], ambient_dim: usize) -> Result<Vec<f64>> {
    check_len("mu entries", q_raw.len() * ambient_dim, mu.len())?;
    mu.chunks_exact(ambient_dim)
        .zip(q_raw)
        .enumerate()
        .map(|(i, (v, &q))| {
            if q > 0.0 {
                Ok(PI.sqrt() * norm(v) / q)
            } else {
                Err(Error::Estimation(format!("density estimate at point {i} is not positive")))
            }
        })
        .collect()
}

/// Leading-order value of the ratio at distance `b`: `exp(-t^2) / (1 + erf t)`.
pub fn expected_ratio(b: f64, eps: Bandwidth) -> f64 {
    let t = b / eps.get();
    (-t * t).exp() / (1.0 + erf(t))
}

fn quadratic_model(t: f64) -> f64 {
    1.0 - QUAD_LINEAR * t + QUAD_SQUARE * t * t
}

/// Closed-form inverse of the piecewise approximation to the ratio function,
/// in units of `eps` and clamped to `[0, B_MAX_FACTOR]`.
fn piecewise_inverse(ratio: f64) -> f64 {
    let t = if ratio >= quadratic_model(BRANCH_POINT) {
        // smaller root of 0.35 t^2 - 1.15 t + (1 - ratio); the larger one lies
        // outside the quadratic branch
        let disc = QUAD_LINEAR * QUAD_LINEAR - 4.0 * QUAD_SQUARE * (1.0 - ratio);
        (QUAD_LINEAR - disc.max(0.0).sqrt()) / (2.0 * QUAD_SQUARE)
    } else if ratio > 0.0 {
        (1.0 / (2.0 * ratio)).ln().max(0.0).sqrt()
    } else {
        B_MAX_FACTOR
    };
    t.clamp(0.0, B_MAX_FACTOR)
}

fn check_ratio(ratio: f64) -> Option<f64> {
    if ratio > 1.0 + RATIO_SLACK {
        warn!("boundary ratio {ratio:.4} exceeds 1 + {RATIO_SLACK}; clamping distance to 0");
        return None;
    }
    Some(ratio.max(0.0))
}

/// Distance from the ratio using only the piecewise quadratic/exponential
/// approximation.
pub fn invert_distance_piecewise(ratio: f64, eps: Bandwidth) -> f64 {
    match check_ratio(ratio) {
        Some(r) => piecewise_inverse(r) * eps.get(),
        None => 0.0,
    }
}

/// Distance from the ratio: piecewise seed refined by Newton's method on the
/// exact ratio function, clamped to `[0, 5 eps]`.
pub fn invert_distance(ratio: f64, eps: Bandwidth) -> f64 {
    let Some(r) = check_ratio(ratio) else {
        return 0.0;
    };
    let mut t = piecewise_inverse(r);
    if r >= 1.0 || r <= 0.0 || t >= B_MAX_FACTOR {
        return t * eps.get();
    }
    // g(t) = ln F(t) - ln r is concave and decreasing, so Newton converges
    // monotonically after its first step.
    let target = r.ln();
    for _ in 0..30 {
        let e = (-t * t).exp();
        let half = 1.0 + erf(t);
        let g = -t * t - half.ln() - target;
        let dg = -2.0 * t - 2.0 / PI.sqrt() * e / half;
        let next = (t - g / dg).clamp(0.0, B_MAX_FACTOR);
        let done = (next - t).abs() < 1e-14;
        t = next;
        if done {
            break;
        }
    }
    t * eps.get()
}

/// Distance and outward direction at every point from precomputed KDE and
/// BDE values.
pub fn estimate_boundary_from(
    mu: &[f64],
    q_raw: &[f64],
    eps: Bandwidth,
    ambient_dim: usize,
) -> Result<BoundaryEstimate> {
    let ratio = boundary_ratio(mu, q_raw, ambient_dim)?;
    finish_estimate(mu, q_raw, ratio, eps, ambient_dim)
}

/// Like [`boundary_ratio`] with the sampling variance removed from `|mu|^2`.
pub fn debiased_boundary_ratio(sums: &KernelSums) -> Result<Vec<f64>> {
    let raw = boundary_ratio(&sums.mu, &sums.q_raw, sums.ambient_dim)?;
    Ok(raw
        .iter()
        .zip(&sums.q_raw)
        .zip(&sums.mu_variance)
        .map(|((&r, &q), &var)| {
            let len2 = (r * q).powi(2) / PI - var;
            PI.sqrt() * len2.max(0.0).sqrt() / q
        })
        .collect())
}

pub fn estimate_boundary_from_sums(
    sums: &KernelSums,
    eps: Bandwidth,
    options: BoundaryOptions,
) -> Result<BoundaryEstimate> {
    let ratio = if options.noise_correction {
        debiased_boundary_ratio(sums)?
    } else {
        boundary_ratio(&sums.mu, &sums.q_raw, sums.ambient_dim)?
    };
    finish_estimate(&sums.mu, &sums.q_raw, ratio, eps, sums.ambient_dim)
}

fn finish_estimate(
    mu: &[f64],
    q_raw: &[f64],
    ratio: Vec<f64>,
    eps: Bandwidth,
    ambient_dim: usize,
) -> Result<BoundaryEstimate> {
    let b = ratio.iter().map(|&r| invert_distance(r, eps)).collect();
    let mut eta = vec![0.0; mu.len()];
    let mut eta_defined = vec![false; q_raw.len()];
    for (i, (v, &q)) in mu.chunks_exact(ambient_dim).zip(q_raw).enumerate() {
        let len = norm(v);
        if len >= 1e-14 * q {
            for (e, &c) in eta[i * ambient_dim..(i + 1) * ambient_dim].iter_mut().zip(v) {
                *e = -c / len;
            }
            eta_defined[i] = true;
        }
    }
    Ok(BoundaryEstimate {
        b,
        eta,
        ratio,
        eta_defined,
        ambient_dim,
    })
}

pub fn estimate_boundary(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    eps: Bandwidth,
    m: usize,
) -> Result<BoundaryEstimate> {
    let (q_raw, mu) = kde_and_bde(cloud, neighbors, eps, m)?;
    estimate_boundary_from(&mu, &q_raw, eps, cloud.ambient_dim())
}

/// `q_raw / m0_boundary(b)`: consistent all the way to the boundary.
pub fn corrected_density(q_raw: &[f64], b: &[f64], eps: Bandwidth, m: usize) -> Result<Vec<f64>> {
    check_len("distance estimates", q_raw.len(), b.len())?;
    Ok(q_raw
        .iter()
        .zip(b)
        .map(|(&q, &bi)| q / boundary_moments(bi, eps, m).0)
        .collect())
}

/// Interior dofs have `b > eps / 2`; everything else is boundary.
///
/// The split may leave either side empty; consumers that need both sides
/// check for that themselves.
pub fn classify_dofs(b: &[f64], eps: Bandwidth) -> DofPartition {
    let half = 0.5 * eps.get();
    let (interior, boundary): (Vec<usize>, Vec<usize>) = (0..b.len()).partition(|&i| b[i] > half);
    DofPartition { interior, boundary }
}

/// KDE, BDE, boundary geometry and corrected density in one call.
pub fn analyze(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    eps: Bandwidth,
    m: usize,
) -> Result<(BoundaryEstimate, DensityEstimate)> {
    analyze_with(cloud, neighbors, eps, m, BoundaryOptions::default())
}

pub fn analyze_with(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    eps: Bandwidth,
    m: usize,
    options: BoundaryOptions,
) -> Result<(BoundaryEstimate, DensityEstimate)> {
    let sums = kernel_sums(cloud, neighbors, eps, m, options)?;
    let est = estimate_boundary_from_sums(&sums, eps, options)?;
    let q_hat = corrected_density(&sums.q_raw, &est.b, eps, m)?;
    Ok((est, DensityEstimate { q_raw: sums.q_raw, q_hat }))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
