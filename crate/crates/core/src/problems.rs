//! Built-in test problems with known exact solutions.
//!
//! Square problems live on `[0,1]^2`, the hemisphere problem on the upper
//! unit hemisphere with the equator as boundary. The interval and ellipse
//! entries name the verification experiments in [`crate::verify`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::OperatorSet;
use crate::pde::{PdeProblem, ProblemKind};
use crate::pointcloud::{generate_square_grid, sample_hemisphere, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// `u = sin 2πx sin 2πy`, zero Dirichlet data.
    SquareDirichletSine,
    /// `u = x² + y²`, Dirichlet data from `u`.
    SquareDirichletQuadratic,
    /// `-Δu + u = f` with `u = cos 2πx cos 2πy`, zero flux.
    SquareNeumannCosine,
    /// `-Δu + u = f` with `u = x² + y²`, flux `∇u·η`.
    SquareNeumannQuadratic,
    /// `u = e^{-t} sin 2πx sin 2πy` for the heat equation up to `t = 1`.
    SquareHeatSine,
    /// `u = ½ sin²θ sin 3φ` on the upper hemisphere.
    HemisphereDirichlet,
    IntervalEnergy,
    IntervalWarpedEnergy,
    IntervalBoundaryIntegral,
    IntervalPointwise,
    EllipseCurvature,
    EllipseDerivatives,
}

pub const ALL: [Builtin; 12] = [
    Builtin::SquareDirichletSine,
    Builtin::SquareDirichletQuadratic,
    Builtin::SquareNeumannCosine,
    Builtin::SquareNeumannQuadratic,
    Builtin::SquareHeatSine,
    Builtin::HemisphereDirichlet,
    Builtin::IntervalEnergy,
    Builtin::IntervalWarpedEnergy,
    Builtin::IntervalBoundaryIntegral,
    Builtin::IntervalPointwise,
    Builtin::EllipseCurvature,
    Builtin::EllipseDerivatives,
];

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::SquareDirichletSine => "square-dirichlet-sine",
            Builtin::SquareDirichletQuadratic => "square-dirichlet-quadratic",
            Builtin::SquareNeumannCosine => "square-neumann-cosine",
            Builtin::SquareNeumannQuadratic => "square-neumann-quadratic",
            Builtin::SquareHeatSine => "square-heat-sine",
            Builtin::HemisphereDirichlet => "hemisphere-dirichlet",
            Builtin::IntervalEnergy => "interval-energy",
            Builtin::IntervalWarpedEnergy => "interval-warped-energy",
            Builtin::IntervalBoundaryIntegral => "interval-boundary-integral",
            Builtin::IntervalPointwise => "interval-pointwise",
            Builtin::EllipseCurvature => "ellipse-curvature",
            Builtin::EllipseDerivatives => "ellipse-derivatives",
        }
    }

    /// `None` for verification cases that are not PDE solves.
    pub fn kind(self) -> Option<ProblemKind> {
        match self {
            Builtin::SquareDirichletSine | Builtin::SquareDirichletQuadratic | Builtin::HemisphereDirichlet => {
                Some(ProblemKind::DirichletElliptic)
            }
            Builtin::SquareNeumannCosine | Builtin::SquareNeumannQuadratic => Some(ProblemKind::NeumannElliptic),
            Builtin::SquareHeatSine => Some(ProblemKind::DirichletParabolic),
            _ => None,
        }
    }

    pub fn is_pde(self) -> bool {
        self.kind().is_some()
    }

    /// Final time and step count used for time-dependent problems.
    pub fn time_grid(self) -> Option<(f64, usize)> {
        (self == Builtin::SquareHeatSine).then_some((1.0, 50))
    }

    /// Error the reference discretization reports for this problem.
    pub fn reference_error(self) -> Option<f64> {
        match self {
            Builtin::SquareDirichletSine => Some(1.541989e-2),
            Builtin::SquareDirichletQuadratic => Some(6.378652e-3),
            Builtin::SquareNeumannCosine => Some(2.125979e-2),
            Builtin::SquareNeumannQuadratic => Some(8.303406e-2),
            Builtin::SquareHeatSine => Some(9.902258e-3),
            Builtin::HemisphereDirichlet => Some(5.067884e-3),
            _ => None,
        }
    }

    /// Exact solution at a point and time.
    pub fn exact(self, x: &[f64], t: f64) -> f64 {
        match self {
            Builtin::SquareDirichletSine => sine_mode(x),
            Builtin::SquareDirichletQuadratic | Builtin::SquareNeumannQuadratic => x[0] * x[0] + x[1] * x[1],
            Builtin::SquareNeumannCosine => (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos(),
            Builtin::SquareHeatSine => (-t).exp() * sine_mode(x),
            Builtin::HemisphereDirichlet => hemisphere_exact_at(x).0,
            _ => 0.0,
        }
    }

    /// Right-hand side of the PDE at a point and time.
    pub fn source(self, x: &[f64], t: f64) -> f64 {
        let lambda = 8.0 * PI * PI;
        match self {
            Builtin::SquareDirichletSine => lambda * sine_mode(x),
            Builtin::SquareDirichletQuadratic => -4.0,
            Builtin::SquareNeumannCosine => (lambda + 1.0) * self.exact(x, t),
            Builtin::SquareNeumannQuadratic => x[0] * x[0] + x[1] * x[1] - 4.0,
            Builtin::SquareHeatSine => (lambda - 1.0) * self.exact(x, t),
            Builtin::HemisphereDirichlet => hemisphere_exact_at(x).1,
            _ => 0.0,
        }
    }

    /// Dirichlet value, or outward normal derivative for Neumann problems,
    /// at a boundary-layer point.
    ///
    /// Fluxes are taken along `normal` when given (the estimated outward
    /// direction), otherwise along the normal of the nearest side of the
    /// square. The cosine mode has zero flux on every side, so its data is
    /// identically zero.
    pub fn boundary_value(self, x: &[f64], normal: Option<&[f64]>) -> f64 {
        match self {
            Builtin::SquareNeumannCosine => 0.0,
            Builtin::SquareNeumannQuadratic => {
                let side = nearest_square_normal(x);
                let n = normal.unwrap_or(&side);
                2.0 * x[0] * n[0] + 2.0 * x[1] * n[1]
            }
            _ => self.exact(x, 0.0),
        }
    }

    /// The point cloud the reference numbers were produced on: a vertex grid
    /// with `resolution` cells per side for square problems, `resolution`
    /// random samples (with `seed`) for the hemisphere.
    pub fn default_cloud(self, resolution: Option<usize>, seed: u64) -> Result<PointCloud> {
        match self {
            Builtin::HemisphereDirichlet => sample_hemisphere(resolution.unwrap_or(5000), seed),
            b if b.is_pde() => generate_square_grid(resolution.unwrap_or(100)),
            other => Err(Error::config(format!(
                "{other} is a verification experiment and has no PDE point cloud"
            ))),
        }
    }

    /// Samples the problem data on `cloud` for the operators `ops`.
    pub fn pose<'a>(self, cloud: &'a PointCloud, ops: &OperatorSet) -> Result<PdeProblem<'a>> {
        let kind = self
            .kind()
            .ok_or_else(|| Error::config(format!("{self} is not a PDE problem")))?;
        let at_points = |t: f64| -> Vec<f64> { cloud.points().map(|x| self.source(x, t)).collect() };
        let g_boundary: Vec<f64> = ops
            .dofs
            .boundary
            .iter()
            .map(|&i| {
                let normal = ops.boundary.eta_defined[i].then(|| ops.boundary.eta(i));
                self.boundary_value(cloud.point(i), normal)
            })
            .collect();
        Ok(match kind {
            ProblemKind::DirichletElliptic => PdeProblem::Dirichlet {
                f: at_points(0.0),
                g_boundary,
            },
            ProblemKind::NeumannElliptic => PdeProblem::Neumann {
                f: at_points(0.0),
                g_boundary,
            },
            ProblemKind::DirichletParabolic => {
                let (final_time, steps) = self.time_grid().unwrap_or((1.0, 50));
                PdeProblem::Parabolic {
                    source: Box::new(move |t| cloud.points().map(|x| self.source(x, t)).collect()),
                    u0: cloud.points().map(|x| self.exact(x, 0.0)).collect(),
                    final_time,
                    steps,
                }
            }
        })
    }

    pub fn exact_on(self, cloud: &PointCloud, t: f64) -> Vec<f64> {
        cloud.points().map(|x| self.exact(x, t)).collect()
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL.iter().copied().find(|b| b.name() == s).ok_or_else(|| {
            let names: Vec<_> = ALL.iter().map(|b| b.name()).collect();
            Error::config(format!("unknown problem {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

fn sine_mode(x: &[f64]) -> f64 {
    (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
}

fn nearest_square_normal(x: &[f64]) -> [f64; 2] {
    let sides = [
        (x[0], [-1.0, 0.0]),
        (1.0 - x[0], [1.0, 0.0]),
        (x[1], [0.0, -1.0]),
        (1.0 - x[1], [0.0, 1.0]),
    ];
    sides
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|s| s.1)
        .unwrap_or([0.0, 0.0])
}

/// Exact solution and source `(u, -Δu)` of the hemisphere problem in polar
/// angle `theta` (from the pole) and azimuth `phi`.
pub fn hemisphere_exact(theta: f64, phi: f64) -> (f64, f64) {
    let s2 = theta.sin().powi(2);
    let wave = (3.0 * phi).sin();
    (0.5 * s2 * wave, (2.5 + 3.0 * s2) * wave)
}

fn hemisphere_exact_at(x: &[f64]) -> (f64, f64) {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let theta = rho.atan2(x[2]);
    let phi = x[1].atan2(x[0]);
    hemisphere_exact(theta, phi)
}
