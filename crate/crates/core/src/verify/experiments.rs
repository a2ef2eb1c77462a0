use log::info;
use serde::{Deserialize, Serialize};

use super::SweepResult;
use crate::boundary::{analyze, BoundaryEstimate};
use crate::error::{Error, Result};
use crate::kernels::{half_moments, Bandwidth};
use crate::operators::{
    boundary_weights, kernel_matrix, pointwise_laplacian_extract, stiffness, unnormalized_weak_laplacian,
    normalized_kernel, AssemblyOptions, OperatorSet,
};
use crate::pde::{l2_error, solve, space_time_l2_error, SolverOptions};
use crate::pointcloud::{build_neighbors, default_cutoff, generate_interval_grid, warp_interval_grid, PointCloud};
use crate::problems::Builtin;

/// Default number of grid points in the interval experiments.
pub const INTERVAL_POINTS: usize = 5000;

/// Warp applied to the interval grid for the nonuniform experiments.
pub const WARP_SHIFT: f64 = 0.05;
pub const WARP_POWER: f64 = 1.2;

/// Sampling of `[-1, 1]` for the energy experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    Warped,
}

impl GridKind {
    pub fn cloud(self, n: usize) -> Result<PointCloud> {
        let grid = generate_interval_grid(n, -1.0, 1.0)?;
        match self {
            GridKind::Uniform => Ok(grid),
            GridKind::Warped => warp_interval_grid(&grid, WARP_SHIFT, WARP_POWER),
        }
    }
}

impl std::str::FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "warped" => Ok(Self::Warped),
            other => Err(Error::config(format!("unknown grid {other:?}; expected uniform or warped"))),
        }
    }
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::config("bandwidth list is empty"));
    }
    if eps_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config("bandwidth list must be strictly increasing"));
    }
    eps_list.iter().try_for_each(|&e| Bandwidth::new(e).map(|_| ()))
}

/// Pointwise Laplacian of a polynomial on a uniform grid of `[-1, 1]`, with
/// exact boundary distance, normal and density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// `x^power`.
    pub power: u32,
    /// Largest error of the corrected estimate at points at least `2 eps`
    /// from the boundary, relative to the largest `|lap f|` there.
    pub corrected_interior: SweepResult,
    /// Largest error of the corrected estimate over all points, same scale.
    pub corrected_all: SweepResult,
    /// Largest absolute error of the estimate without the normal
    /// derivative term, over all points.
    pub uncorrected_max: SweepResult,
}

/// Runs the pointwise expansion check for `f = x^power` (`power >= 2`).
pub fn fig1_interval_experiment(eps_list: &[f64], power: u32, n_points: usize) -> Result<PointwiseReport> {
    check_eps_list(eps_list)?;
    if power < 2 {
        return Err(Error::config("the pointwise experiment needs power >= 2"));
    }
    let cloud = generate_interval_grid(n_points, -1.0, 1.0)?;
    let n = cloud.len();
    let p = power as i32;
    let xs: Vec<f64> = cloud.points().map(|x| x[0]).collect();
    let f: Vec<f64> = xs.iter().map(|x| x.powi(p)).collect();
    let grad: Vec<f64> = xs.iter().map(|x| p as f64 * x.powi(p - 1)).collect();
    let lap: Vec<f64> = xs.iter().map(|x| (p * (p - 1)) as f64 * x.powi(p - 2)).collect();
    let exact = BoundaryEstimate {
        b: xs.iter().map(|x| 1.0 - x.abs()).collect(),
        eta: xs.iter().map(|x| if *x < 0.0 { -1.0 } else { 1.0 }).collect(),
        ratio: vec![0.0; n],
        eta_defined: vec![true; n],
        ambient_dim: 1,
    };
    let q = vec![0.5; n];

    let (mut interior, mut all, mut uncorrected) = (Vec::new(), Vec::new(), Vec::new());
    for &e in eps_list {
        let eps = Bandwidth::new(e)?;
        let nl = build_neighbors(&cloud, default_cutoff(e))?;
        let k = kernel_matrix(&nl, eps);
        let corrected = pointwise_laplacian_extract(&k, &f, &exact, &q, eps, 1, Some(&grad))?;
        let plain = pointwise_laplacian_extract(&k, &f, &exact, &q, eps, 1, None)?;
        let inner: Vec<usize> = (0..n).filter(|&i| exact.b[i] >= 2.0 * e).collect();
        let scale = inner.iter().map(|&i| lap[i].abs()).fold(0.0, f64::max);
        let scale_all = lap.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let err = |est: &[f64], idx: &mut dyn Iterator<Item = usize>| {
            idx.map(|i| (est[i] - lap[i]).abs()).fold(0.0, f64::max)
        };
        interior.push(if inner.is_empty() {
            f64::NAN
        } else {
            err(&corrected, &mut inner.iter().copied()) / scale
        });
        all.push(err(&corrected, &mut (0..n)) / scale_all);
        uncorrected.push(err(&plain, &mut (0..n)));
        info!("pointwise eps {e}: interior {:.3e}", interior.last().unwrap());
    }
    Ok(PointwiseReport {
        power,
        corrected_interior: SweepResult::new(eps_list.to_vec(), interior),
        corrected_all: SweepResult::new(eps_list.to_vec(), all),
        uncorrected_max: SweepResult::new(eps_list.to_vec(), uncorrected),
    })
}

/// Boundary integral of `x^4` over the endpoints of `[-1, 1]` (true value 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryIntegralReport {
    /// Signed error `J - 2` of the raw estimator.
    pub signed_raw: Vec<f64>,
    pub raw: SweepResult,
    /// Error of `J + 4 eps`.
    pub corrected: SweepResult,
    /// Error of `J + (2 m1_bar / m0_bar) |f'(1)| eps`, the first-order term of
    /// the estimator itself.
    pub corrected_analytic: SweepResult,
    /// Coefficient `c1` of a least-squares fit `J - 2 = c1 eps + c2 eps^2`
    /// over bandwidths up to `fit_max_eps`.
    pub linear_coefficient: f64,
    pub fit_max_eps: f64,
    /// Estimate for `f = 1` at each bandwidth.
    pub constant_estimate: Vec<f64>,
}

/// Runs the boundary-integral experiment with estimated distances and
/// densities.
pub fn fig2_boundary_integral_experiment(
    eps_list: &[f64],
    fit_max_eps: f64,
    n_points: usize,
) -> Result<BoundaryIntegralReport> {
    check_eps_list(eps_list)?;
    let cloud = generate_interval_grid(n_points, -1.0, 1.0)?;
    let f: Vec<f64> = cloud.points().map(|x| x[0].powi(4)).collect();
    let (m0_bar, m1_bar) = half_moments();
    // |f'(1)| = 4 at both endpoints
    let analytic_coefficient = 2.0 * 4.0 * m1_bar / m0_bar;
    let (mut signed, mut constant) = (Vec::new(), Vec::new());
    for &e in eps_list {
        let eps = Bandwidth::new(e)?;
        let nl = build_neighbors(&cloud, default_cutoff(e))?;
        let (est, dens) = analyze(&cloud, &nl, eps, 1)?;
        let j = boundary_weights(&est.b, &dens.q_hat, eps)?;
        let total: f64 = j.iter().zip(&f).map(|(w, v)| w * v).sum();
        signed.push(total - 2.0);
        constant.push(j.iter().sum());
        info!("boundary integral eps {e}: {total:.6}");
    }
    let abs = |shift: f64| -> Vec<f64> {
        signed.iter().zip(eps_list).map(|(s, e)| (s + shift * e).abs()).collect()
    };
    let linear_coefficient = fit_linear_quadratic(eps_list, &signed, fit_max_eps)?;
    Ok(BoundaryIntegralReport {
        raw: SweepResult::new(eps_list.to_vec(), abs(0.0)),
        corrected: SweepResult::new(eps_list.to_vec(), abs(4.0)),
        corrected_analytic: SweepResult::new(eps_list.to_vec(), abs(analytic_coefficient)),
        signed_raw: signed,
        linear_coefficient,
        fit_max_eps,
        constant_estimate: constant,
    })
}

// least squares for y = c1 x + c2 x^2, returns c1
fn fit_linear_quadratic(x: &[f64], y: &[f64], x_max: f64) -> Result<f64> {
    let (mut a11, mut a12, mut a22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (&xi, &yi) in x.iter().zip(y) {
        if xi <= x_max {
            a11 += xi * xi;
            a12 += xi.powi(3);
            a22 += xi.powi(4);
            r1 += xi * yi;
            r2 += xi * xi * yi;
            used += 1;
        }
    }
    let det = a11 * a22 - a12 * a12;
    if used < 2 || det.abs() < 1e-300 {
        return Err(Error::config(format!(
            "need at least two bandwidths up to {x_max} for the linear fit"
        )));
    }
    Ok((r1 * a22 - r2 * a12) / det)
}

/// Dirichlet energy of `x^4` on `[-1, 1]` (true value 32/7).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub grid: GridKind,
    /// Relative error of `f^T S f`.
    pub normalized: SweepResult,
    /// Relative error of `f^T L f / q^2` with the raw kernel and the exact
    /// density `1/2`; uniform grid only.
    pub unnormalized: Option<SweepResult>,
}

pub const ENERGY_X4: f64 = 32.0 / 7.0;

/// Runs the weak-energy experiment on the given grid.
pub fn fig34_energy_experiment(grid: GridKind, eps_list: &[f64], n_points: usize) -> Result<EnergyReport> {
    check_eps_list(eps_list)?;
    let cloud = grid.cloud(n_points)?;
    let f: Vec<f64> = cloud.points().map(|x| x[0].powi(4)).collect();
    let (mut normalized, mut raw) = (Vec::new(), Vec::new());
    for &e in eps_list {
        let eps = Bandwidth::new(e)?;
        let nl = build_neighbors(&cloud, default_cutoff(e))?;
        let (_, dens) = analyze(&cloud, &nl, eps, 1)?;
        let k = kernel_matrix(&nl, eps);
        let s = stiffness(&normalized_kernel(&k, &dens.q_hat)?, eps, 1);
        normalized.push((s.bilinear(&f, &f)? - ENERGY_X4).abs() / ENERGY_X4);
        if grid == GridKind::Uniform {
            let l = unnormalized_weak_laplacian(&k, eps, 1);
            raw.push((l.bilinear(&f, &f)? / 0.25 - ENERGY_X4).abs() / ENERGY_X4);
        }
        info!("energy {grid:?} eps {e}: {:.3e}", normalized.last().unwrap());
    }
    Ok(EnergyReport {
        grid,
        normalized: SweepResult::new(eps_list.to_vec(), normalized),
        unnormalized: (grid == GridKind::Uniform).then(|| SweepResult::new(eps_list.to_vec(), raw)),
    })
}

/// L2 error of a built-in PDE problem over a bandwidth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSweepReport {
    pub problem: String,
    pub n_points: usize,
    pub errors: SweepResult,
    pub best_eps: f64,
    pub best_error: f64,
    pub reference_error: Option<f64>,
    /// Solver iterations per bandwidth (last step for parabolic problems).
    pub iterations: Vec<usize>,
}

/// Solves `problem` on `cloud` at every bandwidth in `eps_list` and records
/// the mass-weighted L2 error (space-time for the heat equation).
pub fn pde_sweep(
    problem: Builtin,
    cloud: &PointCloud,
    eps_list: &[f64],
    assembly: AssemblyOptions,
    solver: SolverOptions,
) -> Result<PdeSweepReport> {
    check_eps_list(eps_list)?;
    let (mut errors, mut iterations) = (Vec::new(), Vec::new());
    for &e in eps_list {
        let ops = OperatorSet::assemble_with(cloud, Bandwidth::new(e)?, assembly)?;
        let posed = problem.pose(cloud, &ops)?;
        let sol = solve(&ops, &posed, solver)?;
        let err = match &sol.trajectory {
            Some(traj) => {
                let (final_time, _) = problem.time_grid().unwrap_or((1.0, 50));
                space_time_l2_error(traj, |t| problem.exact_on(cloud, t), final_time, &ops.mass)?
            }
            None => l2_error(&sol.u, &problem.exact_on(cloud, 0.0), &ops.mass)?,
        };
        info!("{problem} eps {e}: L2 error {err:.4e}");
        errors.push(err);
        iterations.push(sol.report.iterations);
    }
    let errors = SweepResult::new(eps_list.to_vec(), errors);
    let (best_eps, best_error) = errors.best().unwrap_or((f64::NAN, f64::NAN));
    Ok(PdeSweepReport {
        problem: problem.name().to_string(),
        n_points: cloud.len(),
        errors,
        best_eps,
        best_error,
        reference_error: problem.reference_error(),
        iterations,
    })
}
