//! Worst-case expected quadratic loss over a type-2 Euclidean ball around
//! an empirical distribution, with the distribution that attains it.
//!
//! `cargo run --example quadratic_risk`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdro::convex::{NormSpec, SetSpec};
use wdro::wc_empirical::{extremal_quadratic, wc_risk_quadratic, BallSpec, ExtremalReport, QuadraticLoss};
use wdro::{DiscreteDistribution, Mat, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let atoms: Vec<Vector> = (0..6).map(|_| Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0))).collect();
    let samples = DiscreteDistribution::empirical(atoms)?;
    // indefinite: one direction gains, the other loses
    let loss = QuadraticLoss::new(Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, -0.5]), Vector::from_vec(vec![0.5, 0.0]))?;

    println!("nominal risk {:.6}", loss.expected(&samples));
    for eps in [0.1, 0.3, 1.0] {
        let ball = BallSpec::new(eps, 2.0, NormSpec::l2(), SetSpec::Whole);
        let res = wc_risk_quadratic(&loss, &samples, &ball)?;
        let (value, report) = extremal_quadratic(&loss, &samples, &ball)?;
        let kind = match &report {
            ExtremalReport::Attained { distribution } => format!("attained, risk there {:.6}", loss.expected(distribution)),
            ExtremalReport::Asymptotic { .. } => "approached by escaping mass".to_string(),
        };
        println!("eps = {eps}: worst case {value:.6}, multiplier {:.4}, {kind}", res.gamma);
    }
    Ok(())
}
