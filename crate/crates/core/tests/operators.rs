use diffusion_pde::kernels::Bandwidth;
use diffusion_pde::operators::{load_operator_dir, write_operator_dir, OperatorSet};
use diffusion_pde::pointcloud::{generate_square_grid, sample_hemisphere, PointCloud};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_square(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
    PointCloud::new(coords, 2, 2).unwrap()
}

fn check_invariants(ops: &OperatorSet, probe_seed: u64) {
    let s = &ops.stiffness;
    let scale = s.max_abs();
    assert!(s.max_asymmetry() <= 1e-14 * scale);
    let ones = vec![1.0; ops.len()];
    let s1 = s.mul_vec(&ones);
    assert!(s1.iter().all(|v| v.abs() <= 1e-12 * scale));
    for (i, j, v) in s.triplets() {
        if i != j {
            assert!(v <= 0.0, "off-diagonal S[{i},{j}] = {v}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
    for _ in 0..5 {
        let v: Vec<f64> = (0..ops.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        assert!(s.bilinear(&v, &v).unwrap() >= -1e-12 * scale);
    }
    assert!(ops.mass.iter().all(|m| *m > 0.0));
    assert!(ops.boundary_weights.iter().all(|w| *w >= 0.0));
    let mut all: Vec<usize> = ops.dofs.interior.iter().chain(&ops.dofs.boundary).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..ops.len()).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_clouds_give_valid_operators(seed in any::<u64>(), n in 200usize..600, e in 0.08f64..0.2) {
        let cloud = random_square(n, seed);
        let ops = OperatorSet::assemble(&cloud, Bandwidth::new(e).unwrap()).unwrap();
        check_invariants(&ops, seed);
    }
}

#[test]
fn square_grid_mass_and_boundary_weights_integrate_area_and_perimeter() {
    let cloud = generate_square_grid(60).unwrap();
    let ops = OperatorSet::assemble(&cloud, Bandwidth::new(0.05).unwrap()).unwrap();
    check_invariants(&ops, 7);
    // each of the 61^2 vertices carries a full h^2 cell
    let area: f64 = ops.mass.iter().sum();
    let cells = (61.0_f64 / 60.0).powi(2);
    assert!((area - cells).abs() < 0.005, "area {area}");
    let perimeter: f64 = ops.boundary_weights.iter().sum();
    assert!((perimeter - 4.0).abs() < 0.4, "perimeter {perimeter}");
}

#[test]
fn hemisphere_operators() {
    let cloud = sample_hemisphere(1500, 11).unwrap();
    let ops = OperatorSet::assemble(&cloud, Bandwidth::new(0.2).unwrap()).unwrap();
    check_invariants(&ops, 3);
    let area: f64 = ops.mass.iter().sum();
    assert!((area - 2.0 * std::f64::consts::PI).abs() < 0.1 * 2.0 * std::f64::consts::PI, "area {area}");
}

#[test]
fn export_round_trip() {
    let cloud = generate_square_grid(20).unwrap();
    let ops = OperatorSet::assemble(&cloud, Bandwidth::new(0.12).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_operator_dir(&ops, &cloud, dir.path()).unwrap();
    let (cloud2, ops2) = load_operator_dir(dir.path()).unwrap();
    assert_eq!(cloud2.len(), cloud.len());
    for (a, b) in cloud.coords().iter().zip(cloud2.coords()) {
        assert!((a - b).abs() <= 1e-15);
    }
    assert_eq!(ops2.eps, ops.eps);
    assert_eq!(ops2.dofs, ops.dofs);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1e-300);
    for (x, y) in [(&ops.stiffness, &ops2.stiffness), (&ops.kernel, &ops2.kernel)] {
        let tx: Vec<_> = x.triplets().collect();
        let ty: Vec<_> = y.triplets().collect();
        assert_eq!(tx.len(), ty.len());
        for ((i, j, v), (k, l, w)) in tx.into_iter().zip(ty) {
            assert_eq!((i, j), (k, l));
            assert!(close(v, w), "{v} vs {w}");
        }
    }
    for (a, b) in ops.mass.iter().zip(&ops2.mass) {
        assert!(close(*a, *b));
    }
    assert_eq!(ops.boundary_matrix.column, ops2.boundary_matrix.column);
}
