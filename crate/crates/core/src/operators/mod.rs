//! Discrete mass, stiffness and boundary-integral operators.
//!
//! For functions sampled at the points, `v^T M u` approximates `∫ u v`,
//! `v^T S u` approximates the Dirichlet form `∫ ∇u·∇v`, and `Σ j_i f_i`
//! approximates the boundary integral `∫_∂ f`, all with respect to the
//! Riemannian volume rather than the sampling density.

mod export;
mod sparse;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{load_operator_dir, write_operator_dir};
pub use sparse::{read_coo, CsrMatrix};

use crate::boundary::{analyze_with, classify_dofs, BoundaryOptions, BoundaryEstimate, DensityEstimate, DofPartition, B_MAX_FACTOR};
use crate::error::{check_len, Error, Result};
use crate::kernels::{boundary_moments, half_moments, interior_moments, Bandwidth};
use crate::pointcloud::{build_neighbors, default_cutoff, CellGrid, NeighborList, PointCloud};

/// Kernel weights on the neighbor graph. Pairs beyond the neighbor cutoff
/// are dropped.
pub fn kernel_matrix(neighbors: &NeighborList, eps: Bandwidth) -> CsrMatrix {
    let inv = 1.0 / (eps.get() * eps.get());
    CsrMatrix::from_neighbors(neighbors, |_, _, d2| (-d2 * inv).exp())
}

/// `K_ij / (q_i q_j)`.
pub fn normalized_kernel(kernel: &CsrMatrix, q_hat: &[f64]) -> Result<CsrMatrix> {
    check_len("density values", kernel.nrows(), q_hat.len())?;
    if let Some(i) = q_hat.iter().position(|&q| !(q > 0.0)) {
        return Err(Error::Estimation(format!("corrected density at point {i} is not positive")));
    }
    Ok(kernel.map_entries(|i, j, k| k / (q_hat[i] * q_hat[j])))
}

/// `c (D - A)` with `D` the off-diagonal row sums of `A`, so that every row
/// of the result sums to zero up to rounding.
fn graph_laplacian(a: &CsrMatrix, c: f64) -> CsrMatrix {
    let degree: Vec<f64> = (0..a.nrows())
        .into_par_iter()
        .map(|i| a.row(i).filter(|&(j, _)| j != i).map(|(_, v)| v).sum())
        .collect();
    a.map_entries(|i, j, v| if i == j { c * degree[i] } else { -c * v })
}

fn laplacian_scale(eps: Bandwidth, m: usize, n_points: usize) -> f64 {
    let (_, m2) = interior_moments(m);
    let n = n_points as f64;
    2.0 / (m2 * eps.get().powi(m as i32 + 2) * n * n)
}

/// Stiffness matrix from the density-normalized kernel.
pub fn stiffness(normalized: &CsrMatrix, eps: Bandwidth, m: usize) -> CsrMatrix {
    graph_laplacian(normalized, laplacian_scale(eps, m, normalized.nrows()))
}

/// Same scaling applied to the raw kernel; its quadratic form estimates the
/// Dirichlet form weighted by the squared sampling density.
pub fn unnormalized_weak_laplacian(kernel: &CsrMatrix, eps: Bandwidth, m: usize) -> CsrMatrix {
    graph_laplacian(kernel, laplacian_scale(eps, m, kernel.nrows()))
}

/// Diagonal of the mass matrix, `1 / (N q_i)`.
pub fn mass_matrix(q_hat: &[f64]) -> Vec<f64> {
    let n = q_hat.len() as f64;
    q_hat.iter().map(|&q| 1.0 / (n * q)).collect()
}

/// Boundary quadrature weights `exp(-b_i^2/eps^2) / (m̄0 eps N q_i)`.
///
/// Points whose distance estimate saturated at the clamp get weight zero.
pub fn boundary_weights(b: &[f64], q_hat: &[f64], eps: Bandwidth) -> Result<Vec<f64>> {
    check_len("density values", b.len(), q_hat.len())?;
    let (m0_bar, _) = half_moments();
    let e = eps.get();
    let n = b.len() as f64;
    Ok(b.iter()
        .zip(q_hat)
        .map(|(&bi, &q)| {
            if bi >= B_MAX_FACTOR * e {
                0.0
            } else {
                let t = bi / e;
                (-t * t).exp() / (m0_bar * e * n * q)
            }
        })
        .collect())
}

/// Boundary-integral operator acting on values at boundary dofs.
///
/// Each point `i` with a nonzero weight `j_i` reads the value at its nearest
/// boundary dof, so `(B g)_i = j_i g(nearest(i))` and `v^T B g` approximates
/// `∫_∂ v g`. Rows cover every point; restricting to interior rows gives the
/// interior-by-boundary block.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrix {
    /// Column (position within the boundary dof list) read by each row.
    pub column: Vec<usize>,
    pub weight: Vec<f64>,
    pub n_boundary: usize,
}

impl BoundaryMatrix {
    pub fn nrows(&self) -> usize {
        self.weight.len()
    }

    pub fn apply(&self, g_boundary: &[f64]) -> Result<Vec<f64>> {
        check_len("boundary values", self.n_boundary, g_boundary.len())?;
        Ok(self
            .column
            .iter()
            .zip(&self.weight)
            .map(|(&k, &w)| if w > 0.0 { w * g_boundary[k] } else { 0.0 })
            .collect())
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_boundary];
        for (&k, &w) in self.column.iter().zip(&self.weight) {
            sums[k] += w;
        }
        sums
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let rows = self
            .column
            .iter()
            .zip(&self.weight)
            .map(|(&k, &w)| if w > 0.0 { vec![(k, w)] } else { Vec::new() })
            .collect();
        CsrMatrix::from_rows(self.n_boundary, rows)
    }
}

/// Nearest boundary dof for every point (itself, for boundary dofs).
pub fn nearest_boundary_dof(cloud: &PointCloud, dofs: &DofPartition) -> Result<Vec<usize>> {
    if dofs.boundary.is_empty() {
        return Err(Error::config("no boundary dofs; decrease the bandwidth or check the input"));
    }
    let spacing = cloud.extent() / (cloud.len() as f64).powf(1.0 / cloud.intrinsic_dim() as f64);
    let grid = CellGrid::over_subset(cloud, &dofs.boundary, spacing.max(f64::MIN_POSITIVE));
    let mut position = vec![usize::MAX; cloud.len()];
    for (k, &i) in dofs.boundary.iter().enumerate() {
        position[i] = k;
    }
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| {
            if position[i] != usize::MAX {
                position[i]
            } else {
                let (j, _) = grid.nearest(cloud.point(i)).expect("boundary grid is nonempty");
                position[j]
            }
        })
        .collect())
}

pub fn boundary_matrix(weights: &[f64], dofs: &DofPartition, cloud: &PointCloud) -> Result<BoundaryMatrix> {
    check_len("boundary weights", cloud.len(), weights.len())?;
    let column = nearest_boundary_dof(cloud, dofs)?;
    Ok(BoundaryMatrix {
        column,
        weight: weights.to_vec(),
        n_boundary: dofs.boundary.len(),
    })
}

/// Pointwise Laplacian estimate from the kernel expansion with the
/// boundary-corrected moments.
///
/// With `grad_f` (row-major, ambient dimension) the first-order normal
/// derivative term is subtracted; without it, estimates near the boundary
/// blow up like `1/eps`.
#[allow(clippy::too_many_arguments)]
pub fn pointwise_laplacian_extract(
    kernel: &CsrMatrix,
    f: &[f64],
    boundary: &BoundaryEstimate,
    q_hat: &[f64],
    eps: Bandwidth,
    m: usize,
    grad_f: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = kernel.nrows();
    check_len("function samples", n, f.len())?;
    check_len("density values", n, q_hat.len())?;
    check_len("boundary estimates", n, boundary.len())?;
    let dim = boundary.ambient_dim;
    if let Some(g) = grad_f {
        check_len("gradient entries", n * dim, g.len())?;
    }
    let e = eps.get();
    let kf = kernel.mul_vec(f);
    let scale = 1.0 / (n as f64 * e.powi(m as i32));
    Ok((0..n)
        .map(|i| {
            let (m0b, m1b, m2b) = boundary_moments(boundary.b[i], eps, m);
            let mut residual = scale * kf[i] / q_hat[i] - m0b * f[i];
            if let Some(g) = grad_f {
                let normal_derivative: f64 =
                    boundary.eta(i).iter().zip(&g[i * dim..(i + 1) * dim]).map(|(a, b)| a * b).sum();
                residual -= e * m1b * normal_derivative;
            }
            2.0 * residual / (e * e * m2b)
        })
        .collect())
}

/// Everything needed to pose PDEs on one point cloud at one bandwidth.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub eps: Bandwidth,
    pub intrinsic_dim: usize,
    pub cutoff: f64,
    pub boundary: BoundaryEstimate,
    pub density: DensityEstimate,
    pub kernel: CsrMatrix,
    pub normalized_kernel: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// Diagonal of the mass matrix.
    pub mass: Vec<f64>,
    pub boundary_weights: Vec<f64>,
    pub boundary_matrix: BoundaryMatrix,
    pub dofs: DofPartition,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// Neighbor cutoff; defaults to the kernel truncation radius.
    pub cutoff: Option<f64>,
    pub boundary: BoundaryOptions,
}

impl OperatorSet {
    pub fn assemble(cloud: &PointCloud, eps: Bandwidth) -> Result<Self> {
        Self::assemble_with(cloud, eps, AssemblyOptions::default())
    }

    pub fn assemble_with(cloud: &PointCloud, eps: Bandwidth, options: AssemblyOptions) -> Result<Self> {
        let m = cloud.intrinsic_dim();
        let cutoff = options.cutoff.unwrap_or_else(|| default_cutoff(eps.get()));
        let neighbors = build_neighbors(cloud, cutoff)?;
        debug!("neighbor graph: {} points, {} pairs", neighbors.len(), neighbors.nnz());
        let (boundary, density) = analyze_with(cloud, &neighbors, eps, m, options.boundary)?;
        let kernel = kernel_matrix(&neighbors, eps);
        drop(neighbors);
        let normalized = normalized_kernel(&kernel, &density.q_hat)?;
        let stiffness = stiffness(&normalized, eps, m);
        let mass = mass_matrix(&density.q_hat);
        let weights = boundary_weights(&boundary.b, &density.q_hat, eps)?;
        let dofs = classify_dofs(&boundary.b, eps);
        if dofs.interior.is_empty() {
            return Err(Error::config(format!(
                "no interior dofs at eps = {}; the bandwidth is too large for this cloud",
                eps.get()
            )));
        }
        let boundary_matrix = boundary_matrix(&weights, &dofs, cloud)?;
        Ok(Self {
            eps,
            intrinsic_dim: m,
            cutoff,
            boundary,
            density,
            kernel,
            normalized_kernel: normalized,
            stiffness,
            mass,
            boundary_weights: weights,
            boundary_matrix,
            dofs,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}
