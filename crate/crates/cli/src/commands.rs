use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::json;

use diffusion_pde::boundary::{analyze_with, classify_dofs, BoundaryOptions};
use diffusion_pde::kernels::Bandwidth;
use diffusion_pde::operators::{load_operator_dir, write_operator_dir, AssemblyOptions, OperatorSet};
use diffusion_pde::pde::{l2_error, solve as solve_problem, space_time_l2_error, PdeProblem, SolverOptions};
use diffusion_pde::pointcloud::{
    build_neighbors, default_cutoff, generate_interval_grid, generate_square_grid, mean_spacing, read_csv,
    sample_ellipse, sample_hemisphere, warp_interval_grid, write_csv, PointCloud,
};
use diffusion_pde::problems::Builtin;
use diffusion_pde::verify::{
    ellipse_curvature_experiment, ellipse_derivative_experiment, fig1_interval_experiment,
    fig2_boundary_integral_experiment, fig34_energy_experiment, pde_sweep, EllipseGeometry, GridKind, SweepResult,
    INTERVAL_POINTS, WARP_POWER, WARP_SHIFT,
};

use crate::config::{EpsSetting, RunConfig};
use crate::output::{emit_summary, num, summary, write_csv as write_rows};
use crate::CliError;

const DEFAULT_SEED: u64 = 1;
const ELLIPSE_SAMPLES: u64 = 5_000_000;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn require_out(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.out.as_deref().ok_or_else(|| invalid("--out is required for this command"))
}

fn generated_cloud(cfg: &RunConfig, name: &str) -> Result<PointCloud, CliError> {
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let cloud = match name {
        "interval" => generate_interval_grid(cfg.n.unwrap_or(INTERVAL_POINTS), -1.0, 1.0)?,
        "warped-interval" => {
            let (shift, power) = match cfg.warp.as_deref() {
                Some([s, p]) => (*s, *p),
                _ => (WARP_SHIFT, WARP_POWER),
            };
            warp_interval_grid(&generate_interval_grid(cfg.n.unwrap_or(INTERVAL_POINTS), -1.0, 1.0)?, shift, power)?
        }
        "square" => generate_square_grid(cfg.cells.unwrap_or(100))?,
        "ellipse" => {
            let (a, b) = match cfg.axes.as_deref() {
                Some([a, b]) => (*a, *b),
                _ => (1.0, 2.0 / 3.0),
            };
            sample_ellipse(cfg.n.unwrap_or(5000), a, b, seed)?
        }
        "hemisphere" => sample_hemisphere(cfg.n.unwrap_or(5000), seed)?,
        other => {
            return Err(invalid(format!(
                "unknown generator {other:?}; expected interval, warped-interval, square, ellipse or hemisphere"
            )))
        }
    };
    if let Some(m) = cfg.m {
        if m != cloud.intrinsic_dim() {
            return Err(invalid(format!(
                "generator {name} produces a {}-dimensional manifold, but --m is {m}",
                cloud.intrinsic_dim()
            )));
        }
    }
    Ok(cloud)
}

/// The cloud named by `--input` or `--generator`, if either is set.
fn explicit_cloud(cfg: &RunConfig) -> Result<Option<PointCloud>, CliError> {
    if let Some(path) = &cfg.input {
        let m = cfg.m.ok_or_else(|| invalid("--input needs --m"))?;
        let file = File::open(path).map_err(|e| CliError::Io(format!("opening {}: {e}", path.display())))?;
        return Ok(Some(read_csv(BufReader::new(file), m)?));
    }
    cfg.generator.as_deref().map(|g| generated_cloud(cfg, g)).transpose()
}

fn cloud_from(cfg: &RunConfig) -> Result<PointCloud, CliError> {
    explicit_cloud(cfg)?.ok_or_else(|| invalid("give --input (with --m) or --generator"))
}

fn resolve_eps(setting: EpsSetting, cloud: &PointCloud) -> Result<f64, CliError> {
    match setting {
        EpsSetting::Value(v) => Ok(v),
        EpsSetting::Auto => {
            let e = 3.0 * mean_spacing(cloud)?;
            info!("automatic bandwidth {e}");
            Ok(e)
        }
    }
}

fn boundary_options(cfg: &RunConfig) -> BoundaryOptions {
    let d = BoundaryOptions::default();
    BoundaryOptions {
        tangent_projection: cfg.tangent_projection.unwrap_or(d.tangent_projection),
        noise_correction: cfg.noise_correction.unwrap_or(d.noise_correction),
    }
}

fn assembly_options(cfg: &RunConfig) -> AssemblyOptions {
    AssemblyOptions {
        cutoff: None,
        boundary: boundary_options(cfg),
    }
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    let d = SolverOptions::default();
    SolverOptions {
        tol: cfg.tol.unwrap_or(d.tol),
        max_iter: cfg.max_iter.unwrap_or(d.max_iter),
    }
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.generator.is_none() {
        return Err(invalid("generate needs --generator"));
    }
    let cloud = cloud_from(cfg)?;
    let out = require_out(cfg)?;
    write_csv(&cloud, crate::output::create(out)?)?;
    let body = json!({
        "n_points": cloud.len(),
        "ambient_dim": cloud.ambient_dim(),
        "intrinsic_dim": cloud.intrinsic_dim(),
    });
    emit_summary(&summary(cfg, &body)?, cfg.summary.as_deref())
}

pub fn estimate_boundary(cfg: &RunConfig) -> Result<(), CliError> {
    let cloud = cloud_from(cfg)?;
    let e = resolve_eps(cfg.eps.unwrap_or(EpsSetting::Auto), &cloud)?;
    let eps = Bandwidth::new(e)?;
    let nl = build_neighbors(&cloud, default_cutoff(e))?;
    let (est, dens) = analyze_with(&cloud, &nl, eps, cloud.intrinsic_dim(), boundary_options(cfg))?;
    let dofs = classify_dofs(&est.b, eps);
    if let Some(out) = &cfg.out {
        let dim = cloud.ambient_dim();
        let mut header = vec!["index".to_string(), "b".to_string()];
        header.extend((0..dim).map(|k| format!("eta{k}")));
        header.extend(["ratio", "q_hat"].map(String::from));
        let rows = (0..cloud.len()).map(|i| {
            let mut row = vec![i.to_string(), num(est.b[i])];
            row.extend(est.eta(i).iter().map(|v| num(*v)));
            row.push(num(est.ratio[i]));
            row.push(num(dens.q_hat[i]));
            row
        });
        write_rows(out, &header, rows)?;
    }
    let body = json!({
        "n_points": cloud.len(),
        "eps": e,
        "n_boundary_dofs": dofs.boundary.len(),
        "n_interior_dofs": dofs.interior.len(),
        "min_b": est.b.iter().cloned().fold(f64::INFINITY, f64::min),
        "max_b": est.b.iter().cloned().fold(0.0, f64::max),
    });
    emit_summary(&summary(cfg, &body)?, cfg.summary.as_deref())
}

pub fn build_operators(cfg: &RunConfig) -> Result<(), CliError> {
    let cloud = cloud_from(cfg)?;
    let out = require_out(cfg)?;
    let e = resolve_eps(cfg.eps.unwrap_or(EpsSetting::Auto), &cloud)?;
    let ops = OperatorSet::assemble_with(&cloud, Bandwidth::new(e)?, assembly_options(cfg))?;
    write_operator_dir(&ops, &cloud, out)?;
    let body = json!({
        "n_points": cloud.len(),
        "eps": e,
        "cutoff": ops.cutoff,
        "nnz": ops.stiffness.nnz(),
        "n_interior_dofs": ops.dofs.interior.len(),
        "n_boundary_dofs": ops.dofs.boundary.len(),
    });
    emit_summary(&summary(cfg, &body)?, cfg.summary.as_deref())
}

enum ProblemSpec {
    Builtin(Builtin),
    Custom { neumann: bool, f: Vec<f64>, g: Vec<f64> },
}

fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        // the last column of each row, so `index,value` files work too
        let cell = t.rsplit(',').next().unwrap_or(t).trim();
        match cell.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if k == 0 && values.is_empty() => continue,
            Err(_) => return Err(invalid(format!("{}:{}: not a number: {cell:?}", path.display(), k + 1))),
        }
    }
    Ok(values)
}

fn problem_spec(cfg: &RunConfig) -> Result<ProblemSpec, CliError> {
    let name = cfg.problem.as_deref().ok_or_else(|| invalid("solve needs --problem"))?;
    if name != "custom" {
        let b: Builtin = name.parse()?;
        if !b.is_pde() {
            return Err(invalid(format!("{b} is a verification experiment; run it with verify --experiment")));
        }
        return Ok(ProblemSpec::Builtin(b));
    }
    let neumann = match cfg.kind.as_deref() {
        Some("dirichlet") => false,
        Some("neumann") => true,
        Some(other) => return Err(invalid(format!("unknown problem kind {other:?}; expected dirichlet or neumann"))),
        None => return Err(invalid("custom problems need --kind")),
    };
    let f = read_values(cfg.rhs.as_deref().ok_or_else(|| invalid("custom problems need --rhs"))?)?;
    let g = match &cfg.boundary_data {
        Some(p) => read_values(p)?,
        None => vec![0.0; f.len()],
    };
    Ok(ProblemSpec::Custom { neumann, f, g })
}

#[derive(Serialize)]
struct SolveRun {
    eps: f64,
    l2_error: Option<f64>,
    iterations: usize,
    residual: f64,
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = problem_spec(cfg)?;
    let loaded = match &cfg.operators {
        Some(dir) => {
            if cfg.eps_sweep.is_some() || cfg.input.is_some() || cfg.generator.is_some() {
                return Err(invalid("--operators cannot be combined with --eps-sweep, --input or --generator"));
            }
            Some(load_operator_dir(dir)?)
        }
        None => None,
    };
    let cloud = match (&loaded, explicit_cloud(cfg)?, &spec) {
        (Some((c, _)), _, _) => c.clone(),
        (None, Some(c), _) => c,
        (None, None, ProblemSpec::Builtin(b)) => {
            let resolution = if *b == Builtin::HemisphereDirichlet { cfg.n } else { cfg.cells };
            b.default_cloud(resolution, cfg.seed.unwrap_or(DEFAULT_SEED))?
        }
        (None, None, ProblemSpec::Custom { .. }) => return Err(invalid("custom problems need --input or --generator")),
    };
    if let ProblemSpec::Custom { f, g, .. } = &spec {
        for (what, v) in [("--rhs", f), ("--boundary-data", g)] {
            if v.len() != cloud.len() {
                return Err(invalid(format!("{what} has {} values for {} points", v.len(), cloud.len())));
            }
        }
    }

    let eps_list: Vec<f64> = match (&loaded, &cfg.eps_sweep) {
        (Some((_, ops)), _) => vec![ops.eps.get()],
        (None, Some(list)) => list.clone(),
        (None, None) => vec![resolve_eps(cfg.eps.unwrap_or(EpsSetting::Auto), &cloud)?],
    };

    let options = solver_options(cfg);
    let mut runs = Vec::new();
    let mut best: Option<(usize, OperatorSet, Vec<f64>, Option<Vec<f64>>)> = None;
    for (k, &e) in eps_list.iter().enumerate() {
        let ops = match &loaded {
            Some((_, ops)) => ops.clone(),
            None => OperatorSet::assemble_with(&cloud, Bandwidth::new(e)?, assembly_options(cfg))?,
        };
        let posed = match &spec {
            ProblemSpec::Builtin(b) => b.pose(&cloud, &ops)?,
            ProblemSpec::Custom { neumann, f, g } => {
                let g_boundary: Vec<f64> = ops.dofs.boundary.iter().map(|&i| g[i]).collect();
                if *neumann {
                    PdeProblem::Neumann { f: f.clone(), g_boundary }
                } else {
                    PdeProblem::Dirichlet { f: f.clone(), g_boundary }
                }
            }
        };
        let sol = solve_problem(&ops, &posed, options)?;
        let (error, exact_final) = match &spec {
            ProblemSpec::Builtin(b) => {
                let (t_end, err) = match &sol.trajectory {
                    Some(traj) => {
                        let (t, _) = b.time_grid().unwrap_or((1.0, 50));
                        (t, space_time_l2_error(traj, |s| b.exact_on(&cloud, s), t, &ops.mass)?)
                    }
                    None => (0.0, l2_error(&sol.u, &b.exact_on(&cloud, 0.0), &ops.mass)?),
                };
                (Some(err), Some(b.exact_on(&cloud, t_end)))
            }
            ProblemSpec::Custom { .. } => (None, None),
        };
        info!("eps {e}: error {error:?}, {} iterations", sol.report.iterations);
        runs.push(SolveRun {
            eps: e,
            l2_error: error,
            iterations: sol.report.iterations,
            residual: sol.report.residual,
        });
        let better = match (&best, error) {
            (None, _) => true,
            (Some((j, ..)), Some(err)) => runs[*j].l2_error.is_some_and(|b| err < b),
            _ => false,
        };
        if better {
            best = Some((k, ops, sol.u, exact_final));
        }
    }
    let (k, ops, u, exact) = best.ok_or_else(|| invalid("no bandwidth to solve at"))?;

    if let Some(out) = &cfg.out {
        let dim = cloud.ambient_dim();
        let mut header: Vec<String> = (0..dim).map(|d| format!("x{d}")).collect();
        header.push("u".into());
        if exact.is_some() {
            header.extend(["u_exact", "error"].map(String::from));
        }
        let rows = (0..cloud.len()).map(|i| {
            let mut row: Vec<String> = cloud.point(i).iter().map(|v| num(*v)).collect();
            row.push(num(u[i]));
            if let Some(ex) = &exact {
                row.push(num(ex[i]));
                row.push(num(u[i] - ex[i]));
            }
            row
        });
        write_rows(out, &header, rows)?;
    }

    let kind = match &spec {
        ProblemSpec::Builtin(b) => b.kind().map(|k| serde_json::to_value(k).unwrap_or_default()),
        ProblemSpec::Custom { neumann, .. } => {
            Some(json!(if *neumann { "neumann_elliptic" } else { "dirichlet_elliptic" }))
        }
    };
    let reference = match &spec {
        ProblemSpec::Builtin(b) => b.reference_error(),
        ProblemSpec::Custom { .. } => None,
    };
    let body = json!({
        "problem": cfg.problem,
        "kind": kind,
        "n_points": cloud.len(),
        "n_interior_dofs": ops.dofs.interior.len(),
        "n_boundary_dofs": ops.dofs.boundary.len(),
        "eps": runs[k].eps,
        "l2_error": runs[k].l2_error,
        "reference_error": reference,
        "iterations": runs[k].iterations,
        "residual": runs[k].residual,
        "sweep": if runs.len() > 1 { Some(&runs) } else { None },
    });
    emit_summary(&summary(cfg, &body)?, cfg.summary.as_deref())
}

fn sweep_csv(path: &Path, curves: &[(&str, &SweepResult)]) -> Result<(), CliError> {
    let header = ["curve", "eps", "error", "slope"].map(String::from);
    let rows = curves.iter().flat_map(|(name, s)| {
        let slope = s.slope.map(num).unwrap_or_default();
        s.epsilons
            .iter()
            .zip(&s.errors)
            .map(move |(e, r)| vec![name.to_string(), num(*e), num(*r), slope.clone()])
    });
    write_rows(path, &header, rows)
}

const INTERVAL_SWEEP: [f64; 11] = [0.005, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.15, 0.2, 0.3, 0.4];
const ENERGY_SWEEP: [f64; 8] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2];

fn default_pde_sweep(problem: Builtin, cloud: &PointCloud) -> Result<Vec<f64>, CliError> {
    if problem == Builtin::HemisphereDirichlet {
        return Ok(vec![0.05, 0.075, 0.1, 0.125, 0.15]);
    }
    let h = mean_spacing(cloud)?;
    Ok([1.5, 2.0, 2.5, 3.0, 3.5, 4.0].iter().map(|k| k * h).collect())
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let name = cfg.experiment.as_deref().ok_or_else(|| invalid("verify needs --experiment"))?;
    let sweep = |default: &[f64]| cfg.eps_sweep.clone().unwrap_or_else(|| match cfg.eps {
        Some(EpsSetting::Value(v)) => vec![v],
        _ => default.to_vec(),
    });
    if cfg.eps == Some(EpsSetting::Auto) {
        return Err(invalid("verify takes explicit bandwidths, not --eps auto"));
    }
    let n = cfg.n.unwrap_or(INTERVAL_POINTS);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let samples = cfg.samples.unwrap_or(ELLIPSE_SAMPLES);
    let spacing = 0.01;
    let geometry = || -> Result<EllipseGeometry, CliError> {
        let (a, b) = match cfg.axes.as_deref() {
            Some([a, b]) => (*a, *b),
            _ => (1.0, 2.0 / 3.0),
        };
        Ok(EllipseGeometry::new(a, b)?)
    };

    let body = match name {
        "fig1" | "interval-pointwise" => {
            let rep = fig1_interval_experiment(&sweep(&INTERVAL_SWEEP), cfg.power.unwrap_or(4), n)?;
            if let Some(out) = &cfg.out {
                sweep_csv(
                    out,
                    &[
                        ("corrected_interior", &rep.corrected_interior),
                        ("corrected_all", &rep.corrected_all),
                        ("uncorrected_max", &rep.uncorrected_max),
                    ],
                )?;
            }
            serde_json::to_value(&rep)
        }
        "fig2" | "interval-boundary-integral" => {
            let rep = fig2_boundary_integral_experiment(&sweep(&INTERVAL_SWEEP), 0.1, n)?;
            if let Some(out) = &cfg.out {
                sweep_csv(
                    out,
                    &[
                        ("raw", &rep.raw),
                        ("corrected", &rep.corrected),
                        ("corrected_analytic", &rep.corrected_analytic),
                    ],
                )?;
            }
            serde_json::to_value(&rep)
        }
        "fig3" | "interval-energy" | "fig4" | "interval-warped-energy" => {
            let grid = if matches!(name, "fig3" | "interval-energy") { GridKind::Uniform } else { GridKind::Warped };
            let rep = fig34_energy_experiment(grid, &sweep(&ENERGY_SWEEP), n)?;
            if let Some(out) = &cfg.out {
                let mut curves = vec![("normalized", &rep.normalized)];
                if let Some(u) = &rep.unnormalized {
                    curves.push(("unnormalized", u));
                }
                sweep_csv(out, &curves)?;
            }
            let mut v = serde_json::to_value(&rep).unwrap_or_default();
            if let Some((e, err)) = rep.normalized.best() {
                v["best_eps"] = json!(e);
                v["min_error"] = json!(err);
            }
            Ok(v)
        }
        "ellipse-curvature" => {
            let mut reports = Vec::new();
            for e in sweep(&[0.1]) {
                reports.push(ellipse_curvature_experiment(&geometry()?, Bandwidth::new(e)?, spacing, samples, seed)?);
            }
            let medians = SweepResult::new(
                reports.iter().map(|r| r.eps).collect(),
                reports.iter().map(|r| r.median_relative_error).collect(),
            );
            if let Some(out) = &cfg.out {
                sweep_csv(out, &[("median_relative_error", &medians)])?;
            }
            Ok(json!({ "median_relative_error": medians, "runs": reports }))
        }
        "ellipse-derivatives" => {
            let rep = ellipse_derivative_experiment(&geometry()?, &sweep(&[0.1]), spacing, samples, seed)?;
            if let Some(out) = &cfg.out {
                sweep_csv(out, &[("boundary", &rep.boundary), ("interior", &rep.interior)])?;
            }
            serde_json::to_value(&rep)
        }
        other => {
            let problem: Builtin = other.parse()?;
            if !problem.is_pde() {
                return Err(invalid(format!("{problem} is not a PDE problem")));
            }
            let cloud = match explicit_cloud(cfg)? {
                Some(c) => c,
                None => {
                    let resolution = if problem == Builtin::HemisphereDirichlet { cfg.n } else { cfg.cells };
                    problem.default_cloud(resolution, seed)?
                }
            };
            let list = match (&cfg.eps_sweep, cfg.eps) {
                (Some(l), _) => l.clone(),
                (None, Some(EpsSetting::Value(v))) => vec![v],
                _ => default_pde_sweep(problem, &cloud)?,
            };
            let rep = pde_sweep(problem, &cloud, &list, assembly_options(cfg), solver_options(cfg))?;
            if let Some(out) = &cfg.out {
                sweep_csv(out, &[("l2_error", &rep.errors)])?;
            }
            serde_json::to_value(&rep)
        }
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    let body = json!({ "experiment": name, "result": body });
    emit_summary(&summary(cfg, &body)?, cfg.summary.as_deref())
}
