//! Worst case over a type-1 ball restricted to the half line `x <= 2`:
//! the support caps how far mass can travel, so the supremum is attained.
//!
//! `cargo run --example half_line`

use wdro::convex::{NormSpec, SetSpec};
use wdro::wc_empirical::{
    extremal_pwa, lipschitz_upper_bound, wc_risk_pwa, AffinePiece, BallSpec, ExtremalReport, PiecewiseAffineLoss,
};
use wdro::{DiscreteDistribution, Mat, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let loss = PiecewiseAffineLoss::new(vec![AffinePiece::new(vec![0.0], 0.0), AffinePiece::new(vec![1.0], -1.0)])?;
    let samples = DiscreteDistribution::dirac(Vector::zeros(1));
    let support = SetSpec::Polyhedron { c: Mat::from_element(1, 1, 1.0), d: Vector::from_element(1, 2.0) };

    for eps in [0.5, 1.0, 1.5, 2.5] {
        let ball = BallSpec::new(eps, 1.0, NormSpec::l1(), support.clone());
        let wc = wc_risk_pwa(&loss, &samples, &ball)?;
        let upper = lipschitz_upper_bound(&loss, &samples, &ball)?;
        println!("eps = {eps}: worst case {:.6}, unconstrained bound {upper:.6}, LP gap {:?}", wc.value, wc.lp_gap);
        if let (_, ExtremalReport::Attained { distribution }) = extremal_pwa(&loss, &samples, &ball)? {
            for (x, w) in distribution.iter() {
                println!("  atom {:>8.4} with mass {w:.4}", x[0]);
            }
        }
    }
    Ok(())
}
