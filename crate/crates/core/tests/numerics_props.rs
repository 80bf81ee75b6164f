mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wdro::numerics::{
    bisect_root, minimize_scalar_convex, psd_sqrt, sym_eig, ConstraintSense, Interval, LinearProgram, LpStatus, Tolerance,
};
use wdro::Mat;

/// Feasible by construction (x0 satisfies every row) and bounded below
/// (nonnegative costs on nonnegative variables plus some boxed ones).
fn random_lp(seed: u64, nvars: usize, nrows: usize) -> LinearProgram {
    let mut r = rng(seed);
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for j in 0..nvars {
        if j % 3 == 2 {
            lp.add_var(-2.0, 3.0, r.random_range(-1.0..1.0));
            x0.push(r.random_range(-2.0..3.0));
        } else {
            lp.add_nonneg_var(r.random_range(0.0..2.0));
            x0.push(r.random_range(0.0..2.0));
        }
    }
    for i in 0..nrows {
        let mut coeffs = Vec::new();
        for j in 0..nvars {
            if r.random_bool(0.6) {
                coeffs.push((j, r.random_range(-2.0..2.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a): &(usize, f64)| a * x0[j]).sum();
        let (sense, rhs) = match i % 3 {
            0 => (ConstraintSense::Le, act + r.random_range(0.0..1.0)),
            1 => (ConstraintSense::Ge, act - r.random_range(0.0..1.0)),
            _ => (ConstraintSense::Eq, act),
        };
        lp.add_constraint(coeffs, sense, rhs);
    }
    lp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_strong_duality(seed in any::<u64>(), nvars in 1usize..12, nrows in 0usize..10) {
        let lp = random_lp(seed, nvars, nrows);
        let sol = lp.solve();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&sol.x) <= 1e-8);
        let dual = lp.dual_objective(&sol.row_duals, 1e-8);
        prop_assert!((sol.objective - dual).abs() <= 1e-8 * (1.0 + sol.objective.abs()), "{} vs {}", sol.objective, dual);
    }

    #[test]
    fn lp_is_deterministic(seed in any::<u64>(), nvars in 1usize..10, nrows in 0usize..8) {
        let lp = random_lp(seed, nvars, nrows);
        let (a, b) = (lp.solve(), lp.solve());
        prop_assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn eigen_reconstruction(seed in any::<u64>(), m in 1usize..50) {
        let mut r = rng(seed);
        let a = uniform_mat(&mut r, m, m, 1.0);
        let a = (&a + a.transpose()) * 0.5;
        let eig = sym_eig(&a).unwrap();
        prop_assert!((eig.reconstruct() - &a).norm() <= 1e-10 * (1.0 + a.norm()));
        let v = &eig.vectors;
        prop_assert!((v.transpose() * v - Mat::identity(m, m)).norm() <= 1e-10 * m as f64);
    }

    #[test]
    fn psd_square_root(seed in any::<u64>(), m in 1usize..50, rank in 1usize..50) {
        let mut r = rng(seed);
        let b = uniform_mat(&mut r, m, rank.min(m), 1.0);
        let a = &b * b.transpose();
        let root = psd_sqrt(&a, 1e-10).unwrap();
        prop_assert!((&root * &root - &a).norm() <= 1e-8 * (1.0 + a.norm()));
        prop_assert!((&root - root.transpose()).amax() <= 1e-12 * (1.0 + root.amax()));
        prop_assert!(sym_eig(&root).unwrap().min_value() >= -1e-8);
    }

    #[test]
    fn bisection_meets_residual(c in 0.01f64..100.0, lo in -5.0f64..0.0) {
        let tol = Tolerance::new(1e-12, 0.0, 10_000);
        let x = bisect_root(|x| x * x * x - c, lo, lo + 0.5, tol).unwrap();
        let width_ok = (x - c.cbrt()).abs() <= 1e-12 * c.cbrt() * 4.0;
        prop_assert!((x * x * x - c).abs() <= 1e-12 || width_ok);
    }

    #[test]
    fn scalar_minimum_on_half_line(a in -10.0f64..10.0, b in -5.0f64..5.0, lo in -5.0f64..5.0) {
        let min = minimize_scalar_convex(|x| (x - a) * (x - a) + b, Interval::closed_above(lo), Tolerance::default()).unwrap();
        let at = a.max(lo);
        let best = (at - a) * (at - a) + b;
        prop_assert!((min.value - best).abs() <= 1e-9 * (1.0 + best.abs()));
        prop_assert!((min.argmin - at).abs() <= 1e-4 * (1.0 + at.abs()));
    }
}
