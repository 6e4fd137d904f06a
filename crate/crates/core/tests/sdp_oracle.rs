mod common;

use common::{project_density, random_density, random_instance, M4};
use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rfiqkd::sdp::{solve, SolverOptions};

#[test]
fn density_projection_is_idempotent() {
    let mut rng = StdRng::seed_from_u64(3);
    let rho = random_density(&mut rng);
    assert!((project_density(&rho) - rho).norm() < 1e-12);
    let h = M4::from_fn(|i, j| C64::new((i + 2 * j) as f64, (i as f64) - (j as f64)));
    let p = project_density(&(h + h.adjoint()));
    assert!((p.trace().re - 1.0).abs() < 1e-12);
    assert!(p.symmetric_eigen().eigenvalues.iter().all(|&l| l > -1e-12));
}

#[test]
fn interior_point_matches_brute_force() {
    let mut worst: f64 = 0.0;
    for seed in 0..25 {
        let inst = random_instance(1000 + seed);
        let report = solve(&inst.problem, &SolverOptions::default()).unwrap();
        assert!(report.is_optimal(), "{}: {:?}", inst.description, report.status);
        let oracle = inst.oracle.solve();
        assert!(oracle.max_residual < 1e-7, "{}: oracle residual {}", inst.description, oracle.max_residual);
        let diff = (report.optimal_value - oracle.value).abs();
        worst = worst.max(diff);
        assert!(diff < 1e-4, "{}: interior point {} vs oracle {}", inst.description, report.optimal_value, oracle.value);
    }
    eprintln!("worst disagreement {worst:.2e}");
}
