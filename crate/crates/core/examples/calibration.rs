//! Choosing the ball radius: finite-sample guarantees, cross-validation,
//! and a Monte Carlo check of how often the guarantee holds.
//!
//! `cargo run --release --example calibration`

use wdro::calibrate::{
    cv_radius, hinge_coverage, radius_empirical, radius_moments, CalibrateError, CoverageConfig, MomentTailModel, TailModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = TailModel::heuristic(3, 2.5);
    for n in [10, 100, 1_000, 10_000] {
        println!(
            "n = {n:>6}: type-1 radius {:.4}, type-2 radius {:.4}, moment radius {:.4}",
            radius_empirical(&model, n, 0.05, 1.0)?,
            radius_empirical(&model, n, 0.05, 2.0)?,
            radius_moments(&MomentTailModel::default(), n, 0.05)?
        );
    }

    // shrink a mean estimate toward zero; larger radii shrink harder
    let data: Vec<f64> = (0..40).map(|i| 0.3 + ((i * 17 % 13) as f64 - 6.0) / 4.0).collect();
    let grid = [0.0, 0.5, 1.0, 2.0, 4.0];
    let cv = cv_radius::<f64, CalibrateError>(
        data.len(),
        &grid,
        5,
        1,
        |train, eps| Ok(train.iter().map(|&i| data[i]).sum::<f64>() / (train.len() as f64 + eps)),
        |mean, test| test.iter().map(|&i| (data[i] - mean).powi(2)).sum::<f64>() / test.len() as f64,
    )?;
    println!("cross-validated radius {} (scores {:.4?})", cv.eps, cv.scores);

    let report = hinge_coverage(&CoverageConfig::default())?;
    println!(
        "coverage {:.3} (target {:.2}) at radius {:.4}, true risk {:.4}",
        report.fraction, report.target, report.radius, report.true_risk
    );
    Ok(())
}
