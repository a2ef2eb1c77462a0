use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::CsrMatrix;

/// A symmetric operator that can be applied to vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal for Jacobi preconditioning, if cheaply available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(CsrMatrix::diagonal(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target `|A x - b| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Achieved relative residual.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients, starting from `x0` if given.
///
/// The residual is recomputed from scratch before declaring convergence so
/// the reported value is the true relative residual.
pub fn cg_solve<A: LinearOperator + ?Sized>(
    a: &A,
    rhs: &[f64],
    x0: Option<&[f64]>,
    options: SolverOptions,
) -> Result<(Vec<f64>, SolverReport)> {
    let n = a.dim();
    check_len("right-hand side", n, rhs.len())?;
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], SolverReport::default()));
    }
    let inv_diag: Vec<f64> = match a.diagonal() {
        Some(d) => d.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect(),
        None => vec![1.0; n],
    };

    let mut x = match x0 {
        Some(x0) => {
            check_len("initial guess", n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut ax = vec![0.0; n];
    let residual_of = |x: &[f64], ax: &mut [f64]| -> Vec<f64> {
        a.apply(x, ax);
        rhs.iter().zip(ax.iter()).map(|(b, v)| b - v).collect()
    };
    let mut r = residual_of(&x, &mut ax);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut iterations = 0;
    loop {
        let rel = dot(&r, &r).sqrt() / rhs_norm;
        if rel <= options.tol {
            // confirm against the true residual; drift in the recurrence can
            // make the updated one optimistic
            let true_r = residual_of(&x, &mut ax);
            let true_rel = dot(&true_r, &true_r).sqrt() / rhs_norm;
            if true_rel <= options.tol {
                return Ok((x, SolverReport { iterations, residual: true_rel }));
            }
            r = true_r;
            z = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
            p.clone_from(&z);
            rz = dot(&r, &z);
        }
        if iterations >= options.max_iter {
            return Err(Error::Solver {
                iterations,
                residual: rel,
                context: format!("conjugate gradients on a {n}-dimensional system"),
            });
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver {
                iterations,
                residual: rel,
                context: "operator is not positive definite on the search direction".into(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_step() {
        let id = CsrMatrix::from_rows(3, (0..3).map(|i| vec![(i, 1.0)]).collect());
        let (x, rep) = cg_solve(&id, &[1.0, 2.0, 3.0], None, SolverOptions::default()).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn zero_rhs() {
        let id = CsrMatrix::from_rows(2, (0..2).map(|i| vec![(i, 1.0)]).collect());
        let (x, rep) = cg_solve(&id, &[0.0, 0.0], None, SolverOptions::default()).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn reports_failure() {
        let indefinite = CsrMatrix::from_rows(2, vec![vec![(0, 1.0)], vec![(1, -1.0)]]);
        let err = cg_solve(&indefinite, &[1.0, 1.0], None, SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Solver { .. }));
        let a = CsrMatrix::from_rows(
            2,
            vec![vec![(0, 2.0), (1, 1.0)], vec![(0, 1.0), (1, 2.0)]],
        );
        let opts = SolverOptions { tol: 1e-14, max_iter: 0 };
        assert!(cg_solve(&a, &[1.0, 0.0], None, opts).is_err());
    }
}
