//! Dirichlet, Neumann and heat-equation solves on an [`OperatorSet`].
//!
//! Dirichlet problems solve `S_II u_I = (M f)_I - S_IB g_B` for the interior
//! unknowns, written as a correction `w` to a lifting `g̃` of the boundary
//! data. Neumann problems for `-Δu + u = f` solve `(S + M) u = M f + B g` over
//! all points. The heat equation `u_t = Δu + f` with zero boundary values is
//! stepped with backward Euler.

mod cg;

pub use cg::{cg_solve, LinearOperator, SolverOptions, SolverReport};

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::OperatorSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    DirichletElliptic,
    NeumannElliptic,
    DirichletParabolic,
}

/// Source term of a time-dependent problem, sampled at every point.
pub type TimeSource<'a> = dyn Fn(f64) -> Vec<f64> + Sync + 'a;

/// Discretized data for one solve. Arrays over points have one entry per
/// point; boundary arrays follow the order of `ops.dofs.boundary`.
pub enum PdeProblem<'a> {
    Dirichlet {
        f: Vec<f64>,
        g_boundary: Vec<f64>,
    },
    Neumann {
        f: Vec<f64>,
        g_boundary: Vec<f64>,
    },
    Parabolic {
        source: Box<TimeSource<'a>>,
        u0: Vec<f64>,
        final_time: f64,
        steps: usize,
    },
}

impl PdeProblem<'_> {
    pub fn kind(&self) -> ProblemKind {
        match self {
            PdeProblem::Dirichlet { .. } => ProblemKind::DirichletElliptic,
            PdeProblem::Neumann { .. } => ProblemKind::NeumannElliptic,
            PdeProblem::Parabolic { .. } => ProblemKind::DirichletParabolic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: Vec<f64>,
    /// `u^0, ..., u^K` for time-dependent problems.
    pub trajectory: Option<Vec<Vec<f64>>>,
    /// Total iterations over all solves and the worst final residual.
    pub report: SolverReport,
}

pub fn solve(ops: &OperatorSet, problem: &PdeProblem<'_>, options: SolverOptions) -> Result<Solution> {
    match problem {
        PdeProblem::Dirichlet { f, g_boundary } => {
            let lift = lift_boundary_data(ops, g_boundary)?;
            solve_dirichlet(ops, f, &lift, options)
        }
        PdeProblem::Neumann { f, g_boundary } => solve_neumann(ops, f, g_boundary, options),
        PdeProblem::Parabolic {
            source,
            u0,
            final_time,
            steps,
        } => solve_parabolic(ops, source.as_ref(), u0, *final_time, *steps, options),
    }
}

/// Extends boundary values to every point: boundary dofs carry their value,
/// other points take the value of their nearest boundary dof averaged once
/// with its kernel-weighted neighborhood.
pub fn lift_boundary_data(ops: &OperatorSet, g_boundary: &[f64]) -> Result<Vec<f64>> {
    check_len("boundary values", ops.dofs.boundary.len(), g_boundary.len())?;
    let nearest: Vec<f64> = ops.boundary_matrix.column.iter().map(|&k| g_boundary[k]).collect();
    let kg = ops.normalized_kernel.mul_vec(&nearest);
    let degree = ops.normalized_kernel.row_sums();
    let mut lift: Vec<f64> = (0..ops.len())
        .map(|i| 0.5 * (nearest[i] + kg[i] / degree[i]))
        .collect();
    for (&i, &g) in ops.dofs.boundary.iter().zip(g_boundary) {
        lift[i] = g;
    }
    Ok(lift)
}

fn interior_rhs(ops: &OperatorSet, f: &[f64]) -> Vec<f64> {
    ops.dofs.interior.iter().map(|&i| ops.mass[i] * f[i]).collect()
}

/// Solves for `u = g̃ + w` with `w` zero on boundary dofs. The interior
/// result does not depend on the values of `g_lift` away from the boundary.
pub fn solve_dirichlet(ops: &OperatorSet, f: &[f64], g_lift: &[f64], options: SolverOptions) -> Result<Solution> {
    let n = ops.len();
    check_len("source samples", n, f.len())?;
    check_len("lifted boundary data", n, g_lift.len())?;
    let interior = &ops.dofs.interior;
    let s_ii = ops.stiffness.submatrix(interior, interior);
    let s_g = ops.stiffness.mul_vec(g_lift);
    let rhs: Vec<f64> = interior_rhs(ops, f)
        .into_iter()
        .zip(interior)
        .map(|(mf, &i)| mf - s_g[i])
        .collect();
    let (w, report) = cg_solve(&s_ii, &rhs, None, options).map_err(|e| with_context(e, "Dirichlet interior block"))?;
    let mut u = g_lift.to_vec();
    for (&i, wi) in interior.iter().zip(w) {
        u[i] += wi;
    }
    info!("Dirichlet solve: {} iterations, residual {:.2e}", report.iterations, report.residual);
    Ok(Solution {
        u,
        trajectory: None,
        report,
    })
}

/// `-Δu + u = f` with normal derivative `g` on the boundary.
pub fn solve_neumann(ops: &OperatorSet, f: &[f64], g_boundary: &[f64], options: SolverOptions) -> Result<Solution> {
    check_len("source samples", ops.len(), f.len())?;
    let flux = ops.boundary_matrix.apply(g_boundary)?;
    let system = ops.stiffness.add_diagonal(&ops.mass);
    let rhs: Vec<f64> = (0..ops.len()).map(|i| ops.mass[i] * f[i] + flux[i]).collect();
    let (u, report) = cg_solve(&system, &rhs, None, options).map_err(|e| with_context(e, "Neumann system"))?;
    info!("Neumann solve: {} iterations, residual {:.2e}", report.iterations, report.residual);
    Ok(Solution {
        u,
        trajectory: None,
        report,
    })
}

/// Backward Euler for `u_t = Δu + f` with zero boundary values, `steps`
/// uniform steps up to `final_time`.
pub fn solve_parabolic(
    ops: &OperatorSet,
    source: &TimeSource<'_>,
    u0: &[f64],
    final_time: f64,
    steps: usize,
    options: SolverOptions,
) -> Result<Solution> {
    let n = ops.len();
    check_len("initial condition", n, u0.len())?;
    if !(final_time > 0.0 && final_time.is_finite()) || steps == 0 {
        return Err(Error::config(format!(
            "time stepping needs a positive final time and at least one step, got T = {final_time}, K = {steps}"
        )));
    }
    let tau = final_time / steps as f64;
    let interior = &ops.dofs.interior;
    let mass_i: Vec<f64> = interior.iter().map(|&i| ops.mass[i]).collect();
    let system = ops
        .stiffness
        .submatrix(interior, interior)
        .map_entries(|_, _, v| tau * v)
        .add_diagonal(&mass_i);

    let mut u_i: Vec<f64> = interior.iter().map(|&i| u0[i]).collect();
    let mut trajectory = vec![u0.to_vec()];
    let mut report = SolverReport::default();
    for k in 1..=steps {
        let f = source(k as f64 * tau);
        check_len("source samples", n, f.len())?;
        let rhs: Vec<f64> = interior
            .iter()
            .zip(&u_i)
            .zip(&mass_i)
            .map(|((&i, &prev), &m)| tau * ops.mass[i] * f[i] + m * prev)
            .collect();
        let (next, step) = cg_solve(&system, &rhs, Some(&u_i), options)
            .map_err(|e| with_context(e, &format!("backward Euler step {k}")))?;
        report.iterations += step.iterations;
        report.residual = report.residual.max(step.residual);
        u_i = next;
        let mut u = vec![0.0; n];
        for (&i, &v) in interior.iter().zip(&u_i) {
            u[i] = v;
        }
        trajectory.push(u);
    }
    let u = trajectory.last().cloned().unwrap_or_default();
    Ok(Solution {
        u,
        trajectory: Some(trajectory),
        report,
    })
}

fn with_context(err: Error, what: &str) -> Error {
    match err {
        Error::Solver {
            iterations,
            residual,
            context,
        } => Error::Solver {
            iterations,
            residual,
            context: format!("{what}: {context}"),
        },
        other => other,
    }
}

/// `sqrt((u - u_exact)^T M (u - u_exact))` with the diagonal mass matrix.
pub fn l2_error(u: &[f64], u_exact: &[f64], mass: &[f64]) -> Result<f64> {
    check_len("exact solution samples", u.len(), u_exact.len())?;
    check_len("mass diagonal", u.len(), mass.len())?;
    Ok(u.iter()
        .zip(u_exact)
        .zip(mass)
        .map(|((a, b), m)| m * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `sqrt(Σ_k τ |u^k - u_exact(t_k)|_M^2)` over steps `k = 1..K`; the initial
/// state is not counted.
pub fn space_time_l2_error(
    trajectory: &[Vec<f64>],
    exact: impl Fn(f64) -> Vec<f64>,
    final_time: f64,
    mass: &[f64],
) -> Result<f64> {
    let steps = trajectory.len().saturating_sub(1);
    if steps == 0 {
        return Err(Error::config("trajectory has no time steps"));
    }
    let tau = final_time / steps as f64;
    let mut total = 0.0;
    for (k, u) in trajectory.iter().enumerate().skip(1) {
        let e = l2_error(u, &exact(k as f64 * tau), mass)?;
        total += tau * e * e;
    }
    Ok(total.sqrt())
}
