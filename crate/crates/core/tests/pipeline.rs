use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use nnca::cloud::{chebyshev_grid, uniform_random};
use nnca::krylov::{gmres, FredholmSystem};
use nnca::{builtin_kernel, dense_matvec, h2_matvec, relative_error, H2Matrix, NncaOptions, PointCloud};

#[test]
fn fredholm_solution_matches_dense_lu() {
    let system = FredholmSystem::new(8, 64, &NncaOptions::new(1e-10)).unwrap();
    let n = system.len();
    let kernel = builtin_kernel("coulomb-3d", 3).unwrap();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let k = kernel.evaluate(system.cloud.target(i), system.cloud.source(j));
        if i == j {
            1.0
        } else {
            system.quad_weight * k
        }
    });
    let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.13).cos()).collect();
    let exact = a.lu().solve(&DVector::from_vec(f.clone())).unwrap();
    let rep = gmres(|v| system.apply(v), &f, 1e-12, 100).unwrap();
    assert!(rep.converged);
    let err = relative_error(&rep.solution, exact.as_slice()).unwrap();
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn rectangular_cloud_in_3d_matches_dense() {
    let cloud = PointCloud::new(3, uniform_random(1800, 3, 1), chebyshev_grid(1300, 3, 2)).unwrap();
    let kernel = builtin_kernel("reg-inverse", 3).unwrap();
    let w = uniform_random(1300, 1, 3);
    for eps in [1e-5, 1e-9] {
        let h2 = H2Matrix::build(&cloud, &kernel, 64, SQRT_2, &NncaOptions::new(eps)).unwrap();
        assert!(!h2.uses_symmetry());
        let err = relative_error(&h2_matvec(&h2, &w).unwrap(), &dense_matvec(&kernel, &cloud, &w).unwrap()).unwrap();
        assert!(err <= 100.0 * eps, "eps {eps:e}: {err:e}");
    }
}

#[test]
fn custom_reg_a_changes_the_operator() {
    let cloud = PointCloud::shared(2, uniform_random(1500, 2, 4)).unwrap();
    let base = builtin_kernel("reg-inverse", 2).unwrap();
    let wide = base.with_reg_a(1e-1).unwrap();
    let w = uniform_random(1500, 1, 5);
    let h2 = H2Matrix::build(&cloud, &wide, 64, SQRT_2, &NncaOptions::new(1e-8)).unwrap();
    let u = h2_matvec(&h2, &w).unwrap();
    let dense = dense_matvec(&wide, &cloud, &w).unwrap();
    assert!(relative_error(&u, &dense).unwrap() <= 1e-6);
    assert!(relative_error(&u, &dense_matvec(&base, &cloud, &w).unwrap()).unwrap() > 1e-3);
}

#[test]
fn memory_and_rank_grow_as_epsilon_shrinks() {
    let cloud = PointCloud::shared(2, uniform_random(4000, 2, 6)).unwrap();
    let kernel = builtin_kernel("matern", 2).unwrap();
    let coarse = H2Matrix::build(&cloud, &kernel, 64, SQRT_2, &NncaOptions::new(1e-4)).unwrap();
    let fine = H2Matrix::build(&cloud, &kernel, 64, SQRT_2, &NncaOptions::new(1e-10)).unwrap();
    assert!(fine.stats().max_rank > coarse.stats().max_rank);
    assert!(fine.stats().memory_bytes > coarse.stats().memory_bytes);
}
