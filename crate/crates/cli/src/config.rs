//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::fmt;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Bandwidth choice: a fixed value, or three times the mean nearest-neighbor
/// spacing of the cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSetting {
    Auto,
    Value(f64),
}

impl std::str::FromStr for EpsSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let v: f64 = s.parse().map_err(|_| format!("expected a number or \"auto\", got {s:?}"))?;
        if v > 0.0 && v.is_finite() {
            Ok(Self::Value(v))
        } else {
            Err(format!("bandwidth must be positive, got {v}"))
        }
    }
}

impl fmt::Display for EpsSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for EpsSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EpsSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => v.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Every setting a subcommand can use. Fields left unset fall back to the
/// config file, then to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Point-cloud CSV, one point per row.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,

    /// Synthetic cloud: interval, warped-interval, square, ellipse or hemisphere.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,

    /// Intrinsic dimension of the sampled manifold (required with --input).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,

    /// Number of points for interval, ellipse and hemisphere clouds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Cells per side of the square grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,

    /// Ellipse semi-axes as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<f64>>,

    /// Interval warp as `shift,power`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warp: Option<Vec<f64>>,

    /// Kernel bandwidth, or `auto`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<EpsSetting>,

    /// Comma-separated, strictly increasing bandwidths.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_sweep: Option<Vec<f64>>,

    /// Built-in problem name, or `custom` with --kind/--rhs/--boundary-data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,

    /// Problem kind for custom problems: dirichlet or neumann.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,

    /// One right-hand-side value per point, for custom problems.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<PathBuf>,

    /// One boundary value (or flux) per point, for custom problems. Only
    /// entries at boundary dofs are used.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_data: Option<PathBuf>,

    /// Operator directory written by build-operators.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operators: Option<PathBuf>,

    /// Verification experiment: fig1, fig2, fig3, fig4, ellipse-curvature,
    /// ellipse-derivatives, or a PDE problem name for an error sweep.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,

    /// Monte Carlo samples for the ellipse experiments.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,

    /// Polynomial degree for fig1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<u32>,

    /// Relative residual tolerance for CG.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Subtract the sampling variance from the BDE (random clouds).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_correction: Option<bool>,

    /// Project the BDE onto the local tangent space.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tangent_projection: Option<bool>,

    /// Main output: a CSV file, or a directory for build-operators.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Where to write the JSON summary (always printed to stdout too).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Reads a JSON config file.
    pub fn from_file(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("invalid config {}: {e}", path.display())))
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self, top, input, generator, m, n, cells, axes, warp, eps, eps_sweep, problem, kind, rhs,
            boundary_data, operators, experiment, samples, power, tol, max_iter, seed, noise_correction,
            tangent_projection, out, summary
        );
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.input.is_some() && self.generator.is_some() {
            return Err(CliError::Validation("give either --input or --generator, not both".into()));
        }
        if self.input.is_some() && self.m.is_none() {
            return Err(CliError::Validation("--input needs --m (intrinsic dimension)".into()));
        }
        if let Some(list) = &self.eps_sweep {
            if list.is_empty() || list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(CliError::Validation("sweep bandwidths must be positive".into()));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Validation("sweep bandwidths must be strictly increasing".into()));
            }
        }
        if self.eps.is_some() && self.eps_sweep.is_some() {
            return Err(CliError::Validation("give either --eps or --eps-sweep, not both".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(CliError::Validation(format!("tolerance must be positive, got {t}")));
            }
        }
        for (name, v) in [("axes", &self.axes), ("warp", &self.warp)] {
            if let Some(v) = v {
                if v.len() != 2 {
                    return Err(CliError::Validation(format!("--{name} takes two comma-separated values")));
                }
            }
        }
        Ok(())
    }
}
