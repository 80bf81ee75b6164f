mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wdro::convex::{NormSpec, SetSpec};
use wdro::numerics::sym_eig;
use wdro::transport::gelbrich_distance;
use wdro::wc_empirical::{wc_risk_quadratic, BallSpec, QuadraticLoss};
use wdro::wc_moments::{
    gelbrich_hull_contains, gelbrich_risk_quadratic, quadratic_moment_risk, support_v, GelbrichBall, MomentsError,
};
use wdro::{Mat, MomentPair};

/// Worst-case value, falling back to the dual bound when no interior multiplier exists.
fn risk(loss: &QuadraticLoss, ball: &GelbrichBall) -> f64 {
    match gelbrich_risk_quadratic(loss, ball) {
        Ok(r) => r.value,
        Err(MomentsError::NoInteriorSolution { dual_value, .. }) => dual_value,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dominates_empirical_ball(seed in any::<u64>(), m in 1usize..4, eps in 0.0f64..1.5) {
        let mut r = rng(seed);
        let n = r.random_range(2..=8);
        let samples = empirical(&mut r, n, m, 1.0);
        let q_mat = indefinite(&mut r, m);
        let loss = QuadraticLoss::new(q_mat, uniform_vec(&mut r, m, 1.0)).unwrap();
        let emp = wc_risk_quadratic(&loss, &samples, &BallSpec::new(eps, 2.0, NormSpec::l2(), SetSpec::Whole)).unwrap().value;
        let ball = GelbrichBall::new(samples.moments(), eps).unwrap();
        let gel = risk(&loss, &ball);
        prop_assert!(emp <= gel + 1e-7 * (1.0 + gel.abs()), "{emp} > {gel}");
    }

    #[test]
    fn dominates_feasible_moments(seed in any::<u64>(), m in 1usize..4, eps in 0.05f64..1.5) {
        let mut r = rng(seed);
        let center = moments(&mut r, m);
        let q_mat = indefinite(&mut r, m);
        let loss = QuadraticLoss::new(q_mat, uniform_vec(&mut r, m, 1.0)).unwrap();
        let ball = GelbrichBall::new(center.clone(), eps).unwrap();
        let value = risk(&loss, &ball);
        let mut tried = 0;
        for _ in 0..40 {
            let mean = &center.mean + uniform_vec(&mut r, m, eps);
            let a = Mat::identity(m, m) + uniform_mat(&mut r, m, m, 0.5 * eps);
            let cov = &a * &center.cov * a.transpose();
            let cand = MomentPair::new(mean, (&cov + cov.transpose()) * 0.5).unwrap();
            if gelbrich_hull_contains(&ball, &cand, 0.0).unwrap() {
                tried += 1;
                let got = quadratic_moment_risk(&loss, &cand);
                prop_assert!(got <= value + 1e-8 * (1.0 + value.abs()), "{got} > {value}");
            }
        }
        prop_assert!(tried > 0 || eps < 0.3);
    }

    #[test]
    fn extremal_in_ball_and_tight(seed in any::<u64>(), m in 1usize..4, eps in 0.05f64..1.5) {
        let mut r = rng(seed);
        let center = moments(&mut r, m);
        let q_mat = indefinite(&mut r, m);
        let loss = QuadraticLoss::new(q_mat, uniform_vec(&mut r, m, 1.0)).unwrap();
        let res = gelbrich_risk_quadratic(&loss, &GelbrichBall::new(center.clone(), eps).unwrap()).unwrap();
        let g = gelbrich_distance(&res.extremal, &center).unwrap();
        prop_assert!(g <= eps * (1.0 + 1e-6), "{g} > {eps}");
        prop_assert!((res.primal_value - res.dual_value).abs() <= 1e-7 * (1.0 + res.dual_value.abs()));
    }

    #[test]
    fn psd_loss_inflates_covariance(seed in any::<u64>(), m in 1usize..5, eps in 0.05f64..1.5) {
        let mut r = rng(seed);
        let center = moments(&mut r, m);
        let q_mat = spd(&mut r, m, 0.1);
        let loss = QuadraticLoss::new(q_mat, uniform_vec(&mut r, m, 1.0)).unwrap();
        let res = gelbrich_risk_quadratic(&loss, &GelbrichBall::new(center.clone(), eps).unwrap()).unwrap();
        let before = sym_eig(&center.cov).unwrap().min_value();
        let after = sym_eig(&res.extremal.cov).unwrap().min_value();
        prop_assert!(after >= before * (1.0 - 1e-9));
    }

    #[test]
    fn support_is_homogeneous(seed in any::<u64>(), m in 1usize..4, eps in 0.05f64..1.5, t in 0.1f64..10.0) {
        let mut r = rng(seed);
        let ball = GelbrichBall::new(moments(&mut r, m), eps).unwrap();
        let q = uniform_vec(&mut r, m, 1.0);
        let q_mat = indefinite(&mut r, m);
        let base = support_v(&q, &q_mat, &ball).unwrap();
        let scaled = support_v(&(&q * t), &(&q_mat * t), &ball).unwrap();
        prop_assert!((scaled - t * base).abs() <= 1e-7 * (1.0 + t * base.abs()), "{scaled} vs {}", t * base);
    }
}
