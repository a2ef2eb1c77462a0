//! Error-versus-bandwidth experiments that check the kernel expansions,
//! the boundary-integral estimator and the weak Laplacian against known
//! values, plus best-over-bandwidth PDE error sweeps.

mod ellipse;
mod experiments;
mod streaming;

pub use ellipse::{
    ellipse_curvature_experiment, ellipse_derivative_experiment, ellipse_targets, extract_mean_curvature,
    verify_derivative_terms, CurvatureReport, DerivativeReport, DerivativeTerms, EllipseGeometry,
};
pub use experiments::{
    ENERGY_X4, INTERVAL_POINTS, WARP_POWER, WARP_SHIFT,
    fig1_interval_experiment, fig2_boundary_integral_experiment, fig34_energy_experiment, pde_sweep,
    BoundaryIntegralReport, EnergyReport, GridKind, PdeSweepReport, PointwiseReport,
};
pub use streaming::{streaming_kernel_expectation, streaming_kernel_expectations, SampleFn, StreamingMean};

pub use crate::problems::hemisphere_exact;

use serde::{Deserialize, Serialize};

/// Errors over a bandwidth sweep with a fitted log-log rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub epsilons: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln eps` over `window`.
    pub slope: Option<f64>,
    /// Bandwidth range used for the fit, inclusive.
    pub window: Option<(f64, f64)>,
}

impl SweepResult {
    /// Fits the slope over the largest run of consecutive bandwidths on
    /// which the error is monotone. Needs at least three points in that run.
    pub fn new(epsilons: Vec<f64>, errors: Vec<f64>) -> Self {
        assert_eq!(epsilons.len(), errors.len(), "sweep arrays must align");
        let (slope, window) = match monotone_window(&epsilons, &errors) {
            Some((lo, hi)) => (
                log_log_slope(&epsilons[lo..=hi], &errors[lo..=hi]),
                Some((epsilons[lo], epsilons[hi])),
            ),
            None => (None, None),
        };
        Self {
            epsilons,
            errors,
            slope,
            window,
        }
    }

    /// Fits over a fixed bandwidth range instead of the automatic window.
    pub fn with_window(epsilons: Vec<f64>, errors: Vec<f64>, lo: f64, hi: f64) -> Self {
        let (e, r): (Vec<f64>, Vec<f64>) = epsilons
            .iter()
            .zip(&errors)
            .filter(|(&e, _)| e >= lo && e <= hi)
            .map(|(&e, &r)| (e, r))
            .unzip();
        let slope = log_log_slope(&e, &r);
        Self {
            epsilons,
            errors,
            slope,
            window: slope.map(|_| (lo, hi)),
        }
    }

    /// Smallest error and the bandwidth it occurred at.
    pub fn best(&self) -> Option<(f64, f64)> {
        self.epsilons
            .iter()
            .zip(&self.errors)
            .filter(|(_, r)| r.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&e, &r)| (e, r))
    }

    /// CSV with columns `eps,error` and the fitted slope repeated on every
    /// row (empty when there is none).
    pub fn to_csv(&self) -> String {
        let slope = self.slope.map(|s| format!("{s:.9e}")).unwrap_or_default();
        let mut out = String::from("eps,error,slope\n");
        for (e, r) in self.epsilons.iter().zip(&self.errors) {
            out.push_str(&format!("{e:.9e},{r:.9e},{slope}\n"));
        }
        out
    }
}

/// Inclusive index range of the longest run on which `errors` is monotone
/// (either direction) in increasing `eps`. Ties go to the run covering the
/// wider bandwidth ratio.
pub fn monotone_window(epsilons: &[f64], errors: &[f64]) -> Option<(usize, usize)> {
    let n = errors.len();
    if n < 3 {
        return None;
    }
    let mut best: Option<(usize, usize)> = None;
    let better = |cand: (usize, usize), best: Option<(usize, usize)>| match best {
        None => true,
        Some((lo, hi)) => {
            let (len_c, len_b) = (cand.1 - cand.0, hi - lo);
            len_c > len_b
                || (len_c == len_b && epsilons[cand.1] / epsilons[cand.0] > epsilons[hi] / epsilons[lo])
        }
    };
    for increasing in [true, false] {
        let mut start = 0;
        for i in 1..=n {
            let continues = i < n && {
                let (a, b) = (errors[i - 1], errors[i]);
                if increasing {
                    b >= a
                } else {
                    b <= a
                }
            };
            if !continues {
                if i - 1 >= start + 2 && better((start, i - 1), best) {
                    best = Some((start, i - 1));
                }
                start = i;
            }
        }
    }
    best
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable (positive, finite) points.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
