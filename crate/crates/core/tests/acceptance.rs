//! Acceptance suite: runs every criterion at its pinned tolerance and
//! prints one PASS/FAIL line per check.
//!
//! `cargo test --test acceptance -- 4 7` runs only criteria 4 and 7. Set
//! `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit status.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diffusion_pde::boundary::{analyze, kde};
use diffusion_pde::kernels::{boundary_moment_recursive, boundary_moments, interior_moments, Bandwidth};
use diffusion_pde::operators::{AssemblyOptions, OperatorSet};
use diffusion_pde::pde::{cg_solve, l2_error, solve_dirichlet, solve_neumann, SolverOptions};
use diffusion_pde::pointcloud::{
    build_neighbors, default_cutoff, generate_interval_grid, generate_square_grid, sample_hemisphere, PointCloud,
};
use diffusion_pde::problems::Builtin;
use diffusion_pde::verify::{
    ellipse_curvature_experiment, ellipse_derivative_experiment, fig1_interval_experiment,
    fig2_boundary_integral_experiment, fig34_energy_experiment, pde_sweep, EllipseGeometry, GridKind, INTERVAL_POINTS,
};

struct Check {
    criterion: u32,
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn check(&mut self, criterion: u32, name: &str, pass: bool, detail: String) {
        println!("[{}] {criterion}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.checks.push(Check {
            criterion,
            name: name.to_string(),
            pass,
            detail,
        });
    }

    fn info(&self, criterion: u32, detail: String) {
        println!("[info] {criterion}. {detail}");
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x.is_finite() && x >= lo && x <= hi
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "none".into())
}

// composite Simpson on [a, b] with n (even) panels
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

fn criterion_1(r: &mut Report) {
    let mut exact = true;
    for m in 1..=4 {
        let (m0, m2) = interior_moments(m);
        exact &= m2 == m0 / 2.0;
    }
    r.check(1, "m2 = m0/2", exact, "m = 1..4, exact equality".into());

    // direct quadrature of the half-space moment in the normal coordinate
    let eps = Bandwidth::new(0.1).unwrap();
    let mut worst: f64 = 0.0;
    for m in 1..=3 {
        let transverse = PI.powf((m as f64 - 1.0) / 2.0);
        for ell in 2..=4 {
            for t in [-1.5, -0.3, 0.0, 0.25, 0.7, 1.3, 2.0, 3.5] {
                let oracle =
                    transverse * simpson(|s| s.powi(ell as i32) * (-s * s).exp(), -14.0, t, 40_000);
                let rec = boundary_moment_recursive(ell, t * 0.1, eps, m);
                worst = worst.max(((rec - oracle) / oracle).abs());
            }
        }
    }
    r.check(1, "moment recursion vs quadrature", worst <= 1e-8, format!("max relative error {worst:.2e} (tol 1e-8)"));

    let mut worst: f64 = 0.0;
    for m in 1..=3 {
        let (_, m2) = interior_moments(m);
        let integral = simpson(|t| boundary_moments(t * 0.1, eps, m).1, 0.0, 14.0, 40_000);
        worst = worst.max(((integral.abs() - m2 / 2.0) / (m2 / 2.0)).abs());
    }
    r.check(
        1,
        "integral of m1 over distance equals m2/2",
        worst <= 1e-8,
        format!("max relative error {worst:.2e} (tol 1e-8)"),
    );
}

fn criterion_2_3(r: &mut Report) {
    let cloud = generate_interval_grid(5000, -1.0, 1.0).unwrap();
    let e = 0.1;
    let eps = Bandwidth::new(e).unwrap();
    let nl = build_neighbors(&cloud, default_cutoff(e)).unwrap();
    let (est, dens) = analyze(&cloud, &nl, eps, 1).unwrap();
    let mut worst: f64 = 0.0;
    let mut bad_sign = 0;
    let mut count = 0;
    for i in 0..cloud.len() {
        let x = cloud.point(i)[0];
        let b = 1.0 - x.abs();
        if b <= 1.5 * e {
            count += 1;
            worst = worst.max((est.b[i] - b).abs() / e);
            if est.eta(i)[0] * x.signum() <= 0.0 {
                bad_sign += 1;
            }
        }
    }
    r.check(
        2,
        "distance estimate within 0.25 eps for b <= 1.5 eps",
        worst <= 0.25,
        format!("{count} points, max |b_hat - b| / eps = {worst:.4}"),
    );
    r.check(2, "normal direction sign", bad_sign == 0, format!("{bad_sign} of {count} points with wrong sign"));

    let q_err = dens.q_hat.iter().map(|q| (q - 0.5).abs() / 0.5).fold(0.0, f64::max);
    let raw = kde(&cloud, &nl, eps, 1).unwrap();
    let (m0, _) = interior_moments(1);
    let raw_err = raw.iter().map(|q| (q / m0 - 0.5).abs() / 0.5).fold(0.0, f64::max);
    r.check(3, "corrected density within 5%", q_err <= 0.05, format!("max relative error {q_err:.4}"));
    r.info(3, format!("uncorrected density max relative error {raw_err:.4}"));
}

fn criterion_4(r: &mut Report) {
    let eps = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2];
    for (grid, tol) in [(GridKind::Uniform, 0.02), (GridKind::Warped, 0.05)] {
        match fig34_energy_experiment(grid, &eps, INTERVAL_POINTS) {
            Ok(rep) => {
                let (be, err) = rep.normalized.best().unwrap();
                r.check(
                    4,
                    &format!("{grid:?} grid energy of x^4"),
                    err <= tol,
                    format!("min relative error {err:.4e} at eps {be} (tol {tol})"),
                );
                if let Some(u) = rep.unnormalized {
                    let (be, err) = u.best().unwrap();
                    r.info(4, format!("raw-kernel energy / q^2: min relative error {err:.4e} at eps {be}"));
                }
            }
            Err(e) => r.check(4, &format!("{grid:?} grid energy"), false, format!("error: {e}")),
        }
    }
}

fn criterion_5(r: &mut Report) {
    let eps = [0.005, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.15, 0.2, 0.3, 0.4];
    let rep = match fig2_boundary_integral_experiment(&eps, 0.1, INTERVAL_POINTS) {
        Ok(rep) => rep,
        Err(e) => return r.check(5, "boundary integral", false, format!("error: {e}")),
    };
    let window = |s: &diffusion_pde::verify::SweepResult| {
        s.window.map(|(a, b)| format!("[{a}, {b}]")).unwrap_or_else(|| "none".into())
    };
    let raw = rep.raw.slope.unwrap_or(f64::NAN);
    r.check(
        5,
        "raw estimator slope",
        within(raw, 0.8, 1.2),
        format!("{} over {} (want [0.8, 1.2])", fmt_opt(rep.raw.slope), window(&rep.raw)),
    );
    let corr = rep.corrected.slope.unwrap_or(f64::NAN);
    r.check(
        5,
        "+4 eps corrected slope",
        within(corr, 1.6, 2.4),
        format!("{} over {} (want [1.6, 2.4])", fmt_opt(rep.corrected.slope), window(&rep.corrected)),
    );
    let c1 = rep.linear_coefficient;
    r.check(
        5,
        "linear coefficient of the raw error",
        within(c1, -4.6, -3.4),
        format!("{c1:.4} from a fit up to eps {} (want -4 within 15%)", rep.fit_max_eps),
    );
    r.info(
        5,
        format!(
            "corrected by the estimator's own first-order term (8 eps / sqrt(pi)): slope {} over {}",
            fmt_opt(rep.corrected_analytic.slope),
            window(&rep.corrected_analytic)
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let eps = [0.005, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.15, 0.2, 0.3, 0.4];
    let rep = match fig1_interval_experiment(&eps, 4, INTERVAL_POINTS) {
        Ok(rep) => rep,
        Err(e) => return r.check(6, "pointwise Laplacian", false, format!("error: {e}")),
    };
    let k = eps.iter().position(|&e| e == 0.1).unwrap();
    let interior = rep.corrected_interior.errors[k];
    r.check(
        6,
        "corrected interior Laplacian of x^4 at eps 0.1",
        interior <= 0.03,
        format!("max error / max|12 x^2| = {interior:.4e} at points >= 2 eps from the boundary"),
    );
    let slope = rep.uncorrected_max.slope.unwrap_or(f64::NAN);
    let w = rep.uncorrected_max.window.unwrap_or((f64::NAN, f64::NAN));
    r.check(
        6,
        "uncorrected boundary blow-up slope",
        within(slope, -1.3, -0.7),
        format!("{slope:.4} over [{}, {}] (want [-1.3, -0.7])", w.0, w.1),
    );
    if let Ok(quad) = fig1_interval_experiment(&[0.1], 2, INTERVAL_POINTS) {
        r.info(6, format!("x^2 interior deviation from 2 at eps 0.1: {:.4e}", quad.corrected_interior.errors[0]));
    }
}

fn criterion_7(r: &mut Report) {
    let geometry = EllipseGeometry::new(1.0, 2.0 / 3.0).unwrap();
    let eps = Bandwidth::new(0.1).unwrap();
    match ellipse_curvature_experiment(&geometry, eps, 0.01, 5_000_000, 1) {
        Ok(rep) => r.check(
            7,
            "ellipse mean curvature",
            rep.median_relative_error <= 0.10,
            format!(
                "median relative error {:.4} over {} targets with b < eps/4, {} samples",
                rep.median_relative_error,
                rep.theta.len(),
                rep.samples
            ),
        ),
        Err(e) => r.check(7, "ellipse mean curvature", false, format!("error: {e}")),
    }
    if let Ok(rep) = ellipse_derivative_experiment(&geometry, &[0.1], 0.01, 5_000_000, 1) {
        r.info(
            7,
            format!(
                "derivative terms for f = R^3: median relative error {:.4} near the boundary, {:.4} in the interior",
                rep.boundary.errors[0], rep.interior.errors[0]
            ),
        );
    }
}

fn criterion_8(r: &mut Report) {
    let square = generate_square_grid(100).unwrap();
    let h = 0.01;
    let eps: Vec<f64> = [1.5, 2.0, 2.5, 3.0, 3.5, 4.0].iter().map(|k| k * h).collect();
    for problem in [
        Builtin::SquareDirichletSine,
        Builtin::SquareDirichletQuadratic,
        Builtin::SquareNeumannCosine,
        Builtin::SquareNeumannQuadratic,
        Builtin::SquareHeatSine,
    ] {
        let reference = problem.reference_error().unwrap();
        match pde_sweep(problem, &square, &eps, AssemblyOptions::default(), SolverOptions::default()) {
            Ok(rep) => r.check(
                8,
                problem.name(),
                within(rep.best_error, reference / 2.0, reference * 2.0),
                format!(
                    "best L2 error {:.4e} at eps {} vs reference {reference:.4e} (ratio {:.3})",
                    rep.best_error,
                    rep.best_eps,
                    rep.best_error / reference
                ),
            ),
            Err(e) => r.check(8, problem.name(), false, format!("error: {e}")),
        }
    }

    let problem = Builtin::HemisphereDirichlet;
    let reference = problem.reference_error().unwrap();
    let eps = [0.05, 0.075, 0.1, 0.125, 0.15];
    let mut bests = Vec::new();
    for seed in 1..=5 {
        let cloud = sample_hemisphere(5000, seed).unwrap();
        match pde_sweep(problem, &cloud, &eps, AssemblyOptions::default(), SolverOptions::default()) {
            Ok(rep) => bests.push(rep.best_error),
            Err(e) => return r.check(8, problem.name(), false, format!("seed {seed}: error: {e}")),
        }
    }
    bests.sort_by(f64::total_cmp);
    let median = bests[bests.len() / 2];
    r.check(
        8,
        "hemisphere-dirichlet (random, N = 5000, 5 seeds)",
        within(median, reference / 3.0, reference * 3.0),
        format!(
            "median best L2 error {median:.4e} vs reference {reference:.4e} (ratio {:.3}); per seed {:?}",
            median / reference,
            bests.iter().map(|b| format!("{b:.3e}")).collect::<Vec<_>>()
        ),
    );
    if let Ok(rep) = pde_sweep(problem, &fibonacci_hemisphere(5000), &eps, AssemblyOptions::default(), SolverOptions::default()) {
        r.info(
            8,
            format!("hemisphere on a quasi-uniform lattice, N = 5000: best L2 error {:.4e} at eps {}", rep.best_error, rep.best_eps),
        );
    }
}

// area-uniform spiral lattice on the upper hemisphere
fn fibonacci_hemisphere(n: usize) -> PointCloud {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut coords = Vec::with_capacity(3 * n);
    for k in 0..n {
        let z = (k as f64 + 0.5) / n as f64;
        let rho = (1.0 - z * z).sqrt();
        let phi = golden * k as f64;
        coords.extend([rho * phi.cos(), rho * phi.sin(), z]);
    }
    PointCloud::new(coords, 3, 2).unwrap()
}

fn criterion_9(r: &mut Report) {
    let clouds = [
        ("square 40x40", generate_square_grid(40).unwrap(), 0.05),
        ("random hemisphere", sample_hemisphere(2000, 3).unwrap(), 0.15),
    ];
    for (label, cloud, e) in &clouds {
        let ops = match OperatorSet::assemble(cloud, Bandwidth::new(*e).unwrap()) {
            Ok(ops) => ops,
            Err(err) => return r.check(9, label, false, format!("assembly error: {err}")),
        };
        let s = &ops.stiffness;
        let scale = s.max_abs();
        let asym = s.max_asymmetry() / scale;
        r.check(9, &format!("{label}: S symmetric"), asym <= 1e-14, format!("max |S - S^T| / max |S| = {asym:.2e}"));
        let row = s.mul_vec(&vec![1.0; s.nrows()]).iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale;
        r.check(9, &format!("{label}: S 1 = 0"), row <= 1e-12, format!("max |S 1| / max |S| = {row:.2e}"));

        let a = s.add_diagonal(&ops.mass);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs: Vec<f64> = (0..a.nrows()).map(|_| rng.random::<f64>() - 0.5).collect();
        let options = SolverOptions {
            tol: 1e-10,
            max_iter: 2000,
        };
        match cg_solve(&a, &rhs, None, options) {
            Ok((_, rep)) => r.check(
                9,
                &format!("{label}: CG on S + M"),
                rep.iterations <= 2000 && rep.residual <= 1e-10,
                format!("{} iterations, relative residual {:.2e}", rep.iterations, rep.residual),
            ),
            Err(err) => r.check(9, &format!("{label}: CG on S + M"), false, format!("{err}")),
        }

        let n = ops.len();
        let zeros_b = vec![0.0; ops.dofs.boundary.len()];
        match solve_dirichlet(&ops, &vec![0.0; n], &vec![0.0; n], SolverOptions::default()) {
            Ok(sol) => {
                let max = sol.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                r.check(9, &format!("{label}: f = g = 0 gives u = 0"), max == 0.0, format!("max |u| = {max:.2e}"));
            }
            Err(err) => r.check(9, &format!("{label}: f = g = 0"), false, format!("{err}")),
        }
        match solve_neumann(&ops, &vec![1.0; n], &zeros_b, SolverOptions::default()) {
            Ok(sol) => {
                let dev = l2_error(&sol.u, &vec![1.0; n], &ops.mass).unwrap_or(f64::NAN);
                let max = sol.u.iter().fold(0.0_f64, |m, v| m.max((v - 1.0).abs()));
                r.check(
                    9,
                    &format!("{label}: Neumann f = 1, g = 0 gives u = 1"),
                    max <= 1e-6,
                    format!("max |u - 1| = {max:.2e}, L2 {dev:.2e}"),
                );
            }
            Err(err) => r.check(9, &format!("{label}: Neumann f = 1"), false, format!("{err}")),
        }
    }
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |c: u32| selected.is_empty() || selected.contains(&c);
    let mut report = Report::default();
    let start = Instant::now();
    let stages: [(u32, fn(&mut Report)); 8] = [
        (1, criterion_1),
        (2, criterion_2_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    for (id, stage) in stages {
        if wanted(id) || (id == 2 && wanted(3)) {
            let t = Instant::now();
            stage(&mut report);
            println!("       ({:.1} s)", t.elapsed().as_secs_f64());
        }
    }

    let failed: Vec<&Check> = report.checks.iter().filter(|c| !c.pass).collect();
    println!(
        "\nacceptance: {} checks, {} passed, {} failed ({:.0} s)",
        report.checks.len(),
        report.checks.len() - failed.len(),
        failed.len(),
        start.elapsed().as_secs_f64()
    );
    for c in &failed {
        println!("  FAIL {}. {}: {}", c.criterion, c.name, c.detail);
    }
    if !failed.is_empty() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
