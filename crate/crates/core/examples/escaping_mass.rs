//! A hinge loss whose worst case over a type-1 ball around a point mass is
//! not attained: a vanishing amount of mass escapes to infinity.
//!
//! `cargo run --example escaping_mass`

use wdro::convex::{NormSpec, SetSpec};
use wdro::wc_empirical::{extremal_pwa, wc_risk_pwa, AffinePiece, BallSpec, ExtremalReport, PiecewiseAffineLoss};
use wdro::{DiscreteDistribution, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // max(0, x - 1) around the origin
    let loss = PiecewiseAffineLoss::new(vec![AffinePiece::new(vec![0.0], 0.0), AffinePiece::new(vec![1.0], -1.0)])?;
    let samples = DiscreteDistribution::dirac(Vector::zeros(1));

    for eps in [0.1, 0.5, 1.0, 3.0] {
        let ball = BallSpec::new(eps, 1.0, NormSpec::l1(), SetSpec::Whole);
        let wc = wc_risk_pwa(&loss, &samples, &ball)?;
        let (_, report) = extremal_pwa(&loss, &samples, &ball)?;
        println!("eps = {eps}: worst case {:.6} ({:?})", wc.value, wc.method);
        match report {
            ExtremalReport::Attained { distribution } => println!("  attained by {:?}", distribution.atoms()),
            ExtremalReport::Asymptotic { family } => {
                for n in [10.0f64, 1e3, 1e6] {
                    let member = family.at(n.max(family.min_index()));
                    println!("  n = {n:>9}: expected loss {:.9}", loss.expected(&member));
                }
            }
        }
    }
    Ok(())
}
