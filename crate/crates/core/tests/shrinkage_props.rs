mod common;

use common::*;
use proptest::prelude::*;
use wdro::shrinkage::{gamma_residual, wasserstein_shrinkage};
use wdro::{Mat, MomentPair, Vector};

fn cov(seed: u64, m: usize) -> Mat {
    let mut r = rng(seed);
    let a = uniform_mat(&mut r, m, (m / 2).max(1), 1.0);
    &a * a.transpose() + spd(&mut r, m, 0.0) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotation_equivariant(seed in any::<u64>(), m in 1usize..12, eps in 0.01f64..5.0) {
        let s = cov(seed, m);
        let q = uniform_mat(&mut rng(seed ^ 1), m, m, 1.0).qr().q();
        let rotated = &q * &s * q.transpose();
        let rotated = (&rotated + rotated.transpose()) * 0.5;
        let a = wasserstein_shrinkage(&MomentPair::new(Vector::zeros(m), s).unwrap(), eps).unwrap();
        let b = wasserstein_shrinkage(&MomentPair::new(Vector::zeros(m), rotated).unwrap(), eps).unwrap();
        let expect = &q * &a.precision * q.transpose();
        prop_assert!((b.precision - &expect).amax() <= 1e-8 * (1.0 + expect.amax()));
    }

    #[test]
    fn eigenvalue_map_is_order_reversing(seed in any::<u64>(), m in 2usize..12, eps in 0.01f64..5.0) {
        let res = wasserstein_shrinkage(&MomentPair::new(Vector::zeros(m), cov(seed, m)).unwrap(), eps).unwrap();
        for pair in res.eigen_map.windows(2) {
            // sample eigenvalues descend, so precision eigenvalues ascend
            prop_assert!(pair[0].0 >= pair[1].0);
            prop_assert!(pair[0].1 <= pair[1].1 * (1.0 + 1e-12));
        }
        for &(l, x) in &res.eigen_map {
            prop_assert!(x > 0.0 && x <= res.gamma * (1.0 + 1e-12));
            if l > 0.0 {
                prop_assert!(x <= 1.0 / l * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn larger_radius_is_better_conditioned(seed in any::<u64>(), m in 2usize..12, e1 in 0.01f64..5.0, e2 in 0.01f64..5.0) {
        let mp = MomentPair::new(Vector::zeros(m), cov(seed, m)).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let a = wasserstein_shrinkage(&mp, lo).unwrap();
        let b = wasserstein_shrinkage(&mp, hi).unwrap();
        prop_assert!(b.gamma <= a.gamma * (1.0 + 1e-12));
        prop_assert!(b.condition_number() <= a.condition_number() * (1.0 + 1e-9));
    }

    #[test]
    fn multiplier_solves_its_equation(seed in any::<u64>(), m in 1usize..20, eps in 0.001f64..100.0) {
        let res = wasserstein_shrinkage(&MomentPair::new(Vector::zeros(m), cov(seed, m)).unwrap(), eps).unwrap();
        let lambdas: Vec<f64> = res.eigen_map.iter().map(|p| p.0).collect();
        prop_assert!(gamma_residual(&lambdas, eps, res.gamma).abs() <= 1e-10 * m as f64);
    }
}
