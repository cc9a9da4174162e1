use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use walkcorr_core::bessel;
use walkcorr_core::correction;
use walkcorr_core::hamiltonian::{QueryLedger, SparseHamiltonian};
use walkcorr_core::linalg;
use walkcorr_core::planner;
use walkcorr_core::series::{LaurentSeries, UnitaryStep};
use walkcorr_core::walk::WalkSpace;

fn series() -> impl Strategy<Value = LaurentSeries> {
    (-6i64..=6, prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..10))
        .prop_map(|(lo, cs)| LaurentSeries::from_dense(lo, cs.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
}

/// Series with `c_{-n} = (-1)^n c_n`.
fn symmetric_series() -> impl Strategy<Value = LaurentSeries> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(|cs| {
        let mut pairs = Vec::new();
        for (n, (a, b)) in cs.into_iter().enumerate() {
            let c = Complex64::new(a, b);
            let n = n as i64;
            pairs.push((n, c));
            if n > 0 {
                pairs.push((-n, if n % 2 == 0 { c } else { -c }));
            }
        }
        LaurentSeries::from_pairs(pairs)
    })
}

proptest! {
    #[test]
    fn s_norm_laws(f in series(), g in series()) {
        let (sf, sg) = (f.s_norm(), g.s_norm());
        prop_assert!((&f + &g).s_norm() <= sf + sg + 1e-12);
        prop_assert!(f.mul(&g).s_norm() <= sf * sg + 1e-12);
        prop_assert!((f.adjoint().s_norm() - sf).abs() <= 1e-12);
    }

    #[test]
    fn multiplication_commutes_and_adjoint_reverses(f in series(), g in series()) {
        prop_assert!(f.mul(&g).max_abs_diff(&g.mul(&f)) <= 1e-12);
        prop_assert!(f.mul(&g).adjoint().max_abs_diff(&g.adjoint().mul(&f.adjoint())) <= 1e-12);
        prop_assert!(f.adjoint().adjoint().max_abs_diff(&f) == 0.0);
    }

    #[test]
    fn symmetry_is_preserved(f in symmetric_series(), g in symmetric_series()) {
        prop_assert!(f.check_alternating_symmetry(1e-12));
        prop_assert!(f.mul(&g).check_alternating_symmetry(1e-12));
        prop_assert!(f.adjoint().check_alternating_symmetry(1e-12));
        prop_assert!(correction::oaa_series(&f).check_alternating_symmetry(1e-12));
        prop_assert!(f.truncate(2).check_alternating_symmetry(1e-12));
    }

    #[test]
    fn operator_evaluation_is_a_homomorphism(f in series(), g in series(), theta in 0.0f64..std::f64::consts::TAU) {
        // diagonal unitary: evaluation reduces to the scalar series
        let u = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::from_polar(1.0, theta),
            Complex64::from_polar(1.0, -0.7 * theta),
        ]));
        let fg = f.mul(&g).eval_matrix(&u).unwrap();
        let prod = f.eval_matrix(&u).unwrap() * g.eval_matrix(&u).unwrap();
        prop_assert!((fg - prod).norm() <= 1e-10);
    }

    #[test]
    fn segment_truncations_nest(z in -1.1f64..0.0, m in 1u64..8) {
        let small = bessel::segment_series(z, m).unwrap();
        let big = bessel::segment_series(z, m + 1).unwrap();
        prop_assert!((big.s_norm() - small.s_norm()) >= 0.0);
        prop_assert!(small.max_abs_diff(&big.truncate(m)) == 0.0);
        prop_assert!(bessel::tail_sum(z, m).unwrap() <= bessel::bessel_tail_bound(z, m) + 1e-16);
    }

    #[test]
    fn correction_result_invariants(z in -1.0f64..-0.1, m in 2u64..5, r in 1u64..6) {
        let v = bessel::full_series(z, bessel::EXACT_SERIES_TOL).unwrap();
        let vt = bessel::segment_series(z, m).unwrap();
        let w = correction::w_first(&v, &vt);
        let res = correction::correction_first(&w, r, 1e-15, 3 * r * m).unwrap();
        prop_assert!(res.s_tail >= 0.0);
        prop_assert!(res.residual <= 1e-12);
        prop_assert!(res.truncated.check_alternating_symmetry(1e-12));
        let mut res = res;
        prop_assert!(correction::verify_first(&vt, &mut res, r, z).unwrap() <= 1e-10);
    }

    #[test]
    fn walk_is_an_isometric_encoding(n in 1u32..=2, seed in 0u64..10_000, dsel in 0usize..4) {
        let d = 1 + dsel % (1usize << n);
        let h = SparseHamiltonian::random_sparse(n, d, seed).unwrap();
        let walk = WalkSpace::build(&h).unwrap();
        prop_assert!(linalg::isometry_defect(&walk.dense_t()) <= 1e-12);
        let probe = DMatrix::from_fn(walk.walk_dim(), 1, |i, _| Complex64::new((i % 7) as f64, 1.0));
        let back = walk.apply_inverse(&walk.apply(&probe));
        prop_assert!((back - &probe).norm() <= 1e-12 * probe.norm());
        prop_assert!(walk.verify_spectral_map(0.9).unwrap().max_residual() <= 1e-10);
    }

    #[test]
    fn effective_operator_charges_twice_the_reach(m in 0u64..6) {
        let h = SparseHamiltonian::random_sparse(1, 2, 5).unwrap();
        let walk = WalkSpace::build(&h).unwrap();
        let mut ledger = QueryLedger::new();
        walk.effective_operator(&bessel::segment_series(-0.5, m).unwrap(), &mut ledger).unwrap();
        prop_assert_eq!(ledger.walk_steps(), 2 * m);
        prop_assert_eq!(ledger.oracle_queries(), 8 * m);
    }

    #[test]
    fn single_plans_certify(tau in 0.0f64..40.0, log_eps in -12.0f64..-1.0) {
        let eps = 10f64.powf(log_eps);
        let plan = planner::plan_single(tau, eps).unwrap();
        prop_assert_eq!(plan.n, 3 * plan.spec.segments * plan.spec.cutoff);
        prop_assert!(plan.certified.lcu_s_bound <= 2.0);
        prop_assert!(plan.predicted_error <= eps);
        prop_assert!(plan.spec.z.abs() <= bessel::z_cap());
        prop_assert_eq!(planner::predicted_queries(&plan), plan.predicted);
    }

    #[test]
    fn double_plans_certify(tau in 0.5f64..40.0, log_eps in -12.0f64..-1.0) {
        let eps = 10f64.powf(log_eps);
        let plan = planner::plan_double(tau, eps).unwrap();
        let rp = plan.spec.compound_segments.unwrap();
        prop_assert_eq!(plan.n_prime, Some(9 * plan.spec.segments * rp * plan.spec.cutoff));
        prop_assert!(plan.certified.second_lcu_s_bound.unwrap() <= 2.0);
        prop_assert!(plan.certified.second_tail_bound.unwrap() <= eps);
        prop_assert!((plan.spec.tau() - tau).abs() <= 1e-12 * tau);
    }
}
