use bdris_core::linalg::{symmetry_residual, unitarity_residual};
use bdris_core::projections::{project, sym, symuni, FEASIBILITY_TOL};
use bdris_core::{path_loss, Architecture, CMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), n * n).prop_map(move |v| {
        CMatrix::from_fn(n, n, |i, j| {
            let (re, im) = v[i * n + j];
            Complex64::new(re, im)
        })
    })
}

fn sized_matrix() -> impl Strategy<Value = CMatrix> {
    (1usize..=8).prop_flat_map(matrix)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn symuni_is_feasible_and_idempotent(z in sized_matrix()) {
        let p = symuni(&z).unwrap().into_inner();
        prop_assert!(symmetry_residual(&p) <= FEASIBILITY_TOL);
        prop_assert!(unitarity_residual(&p) <= FEASIBILITY_TOL);
        let again = symuni(&p).unwrap().into_inner();
        prop_assert!((&again - &p).norm() <= 1e-9);
    }

    #[test]
    fn sym_is_closest_symmetric_matrix(z in matrix(4), s in matrix(4)) {
        let p = sym(&z).unwrap();
        let q = (&s + s.transpose()).map(|x| x * 0.5);
        prop_assert!((&z - &p).norm() <= (&z - &q).norm() + 1e-12);
    }

    #[test]
    fn every_architecture_projection_is_feasible(z in matrix(6), arch_idx in 0usize..4) {
        let arch = [
            Architecture::FullyConnected,
            Architecture::GroupConnected(2),
            Architecture::GroupConnected(3),
            Architecture::SingleConnected,
        ][arch_idx];
        let p = project(&z, arch).unwrap();
        prop_assert_eq!(p.arch(), arch);
        prop_assert!(p.is_feasible(FEASIBILITY_TOL));
    }

    #[test]
    fn path_loss_decreases_with_distance(
        d in 1.0f64..500.0,
        extra in 0.1f64..100.0,
        gamma in 1.5f64..4.5,
    ) {
        let near = path_loss(d, gamma, -30.0).unwrap();
        let far = path_loss(d + extra, gamma, -30.0).unwrap();
        prop_assert!(far < near);
        prop_assert!(near > 0.0);
    }
}
