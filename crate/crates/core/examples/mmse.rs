//! Robust affine estimator of a signal from a noisy observation, found by
//! Frank-Wolfe over the covariances near the nominal one.
//!
//! `cargo run --example mmse`

use wdro::mmse::{fw_solve, mmse_objective, AffineEstimator, JointMoments};
use wdro::{Mat, MomentPair, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cov = Mat::from_row_slice(4, 4, &[2.0, 0.3, 0.8, 0.2, 0.3, 1.0, 0.1, 0.4, 0.8, 0.1, 1.5, 0.2, 0.2, 0.4, 0.2, 1.2]);
    let mean = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.5]);
    let joint = JointMoments::new(2, 2, MomentPair::new(mean.clone(), cov.clone())?)?;
    let nominal = AffineEstimator::from_covariance(&cov, 2, &mean)?;
    println!("nominal error {:.6}, gain\n{}", mmse_objective(&cov, 2)?, nominal.gain);

    for eps in [0.1, 0.5] {
        let res = fw_solve(&joint, eps, 200, 1e-8)?;
        println!(
            "eps = {eps}: worst-case error {:.6} after {} iterations, last gap {:.2e}, converged {}",
            res.best.objective,
            res.gaps.len(),
            res.gaps.last().copied().unwrap_or(f64::NAN),
            res.converged
        );
        println!("robust gain\n{}", res.estimator.gain);
    }
    Ok(())
}
