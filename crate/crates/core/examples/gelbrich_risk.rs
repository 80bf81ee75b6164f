//! Worst-case quadratic risk when only the mean and covariance are known,
//! over all moment pairs within a Gelbrich distance of the estimate.
//!
//! `cargo run --example gelbrich_risk`

use wdro::transport::gelbrich_distance;
use wdro::wc_empirical::QuadraticLoss;
use wdro::wc_moments::{gelbrich_risk_quadratic, quadratic_moment_risk, GelbrichBall};
use wdro::{Mat, MomentPair, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let center = MomentPair::new(Vector::from_vec(vec![0.0, 1.0]), Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]))?;
    let loss = QuadraticLoss::new(Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, -0.5]), Vector::from_vec(vec![0.5, 0.0]))?;
    println!("nominal {:.6}", quadratic_moment_risk(&loss, &center));

    for eps in [0.1, 0.5, 1.0] {
        let res = gelbrich_risk_quadratic(&loss, &GelbrichBall::new(center.clone(), eps)?)?;
        let dist = gelbrich_distance(&res.extremal, &center)?;
        println!("eps = {eps}: value {:.6}, primal {:.6}, extremal at distance {dist:.6}", res.dual_value, res.primal_value);
        println!("  mean {:?}", res.extremal.mean.as_slice());
    }
    Ok(())
}
