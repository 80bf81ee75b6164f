mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wdro::convex::{NormSpec, SetSpec};
use wdro::transport::wasserstein_p;
use wdro::wc_empirical::{
    extremal_pwa, lipschitz_upper_bound, robust_lower_bound, wc_risk_pwa, wc_risk_quadratic, BallSpec, ExtremalReport,
    QuadraticLoss,
};
use wdro::{DiscreteDistribution, Mat, Vector};

fn cube(m: usize, half: f64) -> SetSpec {
    let mut c = Mat::zeros(2 * m, m);
    for k in 0..m {
        c[(2 * k, k)] = 1.0;
        c[(2 * k + 1, k)] = -1.0;
    }
    SetSpec::Polyhedron { c, d: Vector::from_element(2 * m, half) }
}

fn polyhedral_norm() -> impl Strategy<Value = NormSpec> {
    prop_oneof![Just(NormSpec::l1()), Just(NormSpec::linf())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sandwich_bounds(seed in any::<u64>(), m in 1usize..4, eps in 0.0f64..2.0, norm in polyhedral_norm(), boxed in any::<bool>()) {
        let mut r = rng(seed);
        let (n, j) = (r.random_range(1..=6), r.random_range(1..=4));
        let samples = distribution(&mut r, n, m, 1.0);
        let loss = pwa(&mut r, m, j);
        let support = if boxed { cube(m, 2.0) } else { SetSpec::Whole };
        let ball = BallSpec::new(eps, 1.0, norm, support);
        let wc = wc_risk_pwa(&loss, &samples, &ball).unwrap().value;
        let lower = robust_lower_bound(&loss, &samples, &ball).unwrap();
        let upper = lipschitz_upper_bound(&loss, &samples, &ball).unwrap();
        let tol = 1e-8 * (1.0 + wc.abs());
        prop_assert!(lower <= wc + tol, "{lower} > {wc}");
        prop_assert!(wc <= upper + tol, "{wc} > {upper}");
    }

    #[test]
    fn monotone_in_radius(seed in any::<u64>(), m in 1usize..4, e1 in 0.0f64..2.0, e2 in 0.0f64..2.0, p in prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY)]) {
        let mut r = rng(seed);
        let (n, j) = (r.random_range(1..=6), r.random_range(1..=4));
        let samples = distribution(&mut r, n, m, 1.0);
        let loss = pwa(&mut r, m, j);
        let at = |eps: f64| wc_risk_pwa(&loss, &samples, &BallSpec::new(eps, p, NormSpec::l2(), SetSpec::Whole)).unwrap().value;
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        prop_assert!(at(lo) <= at(hi) + 1e-9 * (1.0 + at(hi).abs()));
        prop_assert!((at(0.0) - loss.expected(&samples)).abs() <= 1e-12 * (1.0 + at(0.0).abs()));
    }

    #[test]
    fn smaller_ball_for_higher_order(seed in any::<u64>(), m in 1usize..4, eps in 0.0f64..2.0) {
        let mut r = rng(seed);
        let (n, j) = (r.random_range(1..=6), r.random_range(1..=4));
        let samples = distribution(&mut r, n, m, 1.0);
        let loss = pwa(&mut r, m, j);
        let at = |p: f64| wc_risk_pwa(&loss, &samples, &BallSpec::new(eps, p, NormSpec::l2(), SetSpec::Whole)).unwrap().value;
        let (w1, w2, winf) = (at(1.0), at(2.0), at(f64::INFINITY));
        prop_assert!(winf <= w2 + 1e-8 * (1.0 + w2.abs()));
        prop_assert!(w2 <= w1 + 1e-8 * (1.0 + w1.abs()));
    }

    #[test]
    fn extremal_certificate(seed in any::<u64>(), m in 1usize..3, eps in 0.05f64..1.5, norm in polyhedral_norm(), boxed in any::<bool>()) {
        let mut r = rng(seed);
        let (n, j) = (r.random_range(1..=5), r.random_range(1..=3));
        let samples = distribution(&mut r, n, m, 1.0);
        let loss = pwa(&mut r, m, j);
        let support = if boxed { cube(m, 2.0) } else { SetSpec::Whole };
        let ball = BallSpec::new(eps, 1.0, norm.clone(), support.clone());
        let wc = wc_risk_pwa(&loss, &samples, &ball).unwrap().value;
        let (value, report) = extremal_pwa(&loss, &samples, &ball).unwrap();
        let tol = 1e-7 * (1.0 + wc.abs());
        prop_assert!((value - wc).abs() <= tol, "{value} vs {wc}");
        let witness: DiscreteDistribution = match &report {
            ExtremalReport::Attained { distribution } => {
                prop_assert!((loss.expected(distribution) - wc).abs() <= tol);
                distribution.clone()
            }
            ExtremalReport::Asymptotic { family } => {
                let member = family.at(family.min_index().max(1e5));
                let got = loss.expected(&member);
                prop_assert!(got <= wc + tol);
                prop_assert!(wc - got <= 1e-3 * (1.0 + wc.abs()), "{got} far below {wc}");
                member
            }
        };
        prop_assert!(witness.atoms().iter().all(|x| support.contains(x.as_slice(), 1e-7)));
        let dist = wasserstein_p(&witness, &samples, 1.0, &norm).unwrap().distance;
        prop_assert!(dist <= eps * (1.0 + 1e-7) + 1e-9, "distance {dist} > {eps}");
    }

    #[test]
    fn quadratic_dominates_feasible_moves(seed in any::<u64>(), m in 1usize..4, eps in 0.0f64..1.5) {
        let mut r = rng(seed);
        let n = r.random_range(1..=6);
        let samples = distribution(&mut r, n, m, 1.0);
        let q_mat = indefinite(&mut r, m);
        let loss = QuadraticLoss::new(q_mat, uniform_vec(&mut r, m, 1.0)).unwrap();
        let wc = wc_risk_quadratic(&loss, &samples, &BallSpec::new(eps, 2.0, NormSpec::l2(), SetSpec::Whole)).unwrap().value;
        for _ in 0..20 {
            let moves: Vec<Vector> = (0..n).map(|_| uniform_vec(&mut r, m, 1.0)).collect();
            let spent: f64 = moves.iter().zip(samples.weights()).map(|(d, w)| w * d.norm_squared()).sum();
            let scale = if spent > 0.0 { eps / spent.sqrt() } else { 0.0 };
            let atoms = samples.atoms().iter().zip(&moves).map(|(x, d)| x + d * scale).collect();
            let moved = DiscreteDistribution::new(atoms, samples.weights().to_vec()).unwrap();
            let got = loss.expected(&moved);
            prop_assert!(got <= wc + 1e-8 * (1.0 + wc.abs()), "{got} > {wc}");
        }
    }
}
