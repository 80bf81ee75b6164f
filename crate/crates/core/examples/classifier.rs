//! Distributionally robust linear classifiers on the bundled CSV data,
//! checked against the worst-case risk they are meant to bound.
//!
//! `cargo run --example classifier`

use std::path::Path;

use wdro::cli::read_csv;
use wdro::convex::NormSpec;
use wdro::learn::{dro_objective_crosscheck, dro_train_classifier, Dataset, TrainOptions, UnivariateLoss};
use wdro::Vector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/classify.csv");
    let (_, rows) = read_csv(&path, "input")?;
    let features = rows.iter().map(|r| Vector::from_column_slice(&r[..r.len() - 1])).collect();
    let labels = rows.iter().map(|r| r[r.len() - 1]).collect();
    let data = Dataset::new(features, labels)?;

    for loss in [UnivariateLoss::Hinge, UnivariateLoss::LogLoss, UnivariateLoss::SmoothHinge] {
        for eps in [0.0, 0.05, 0.2] {
            let model = dro_train_classifier(&data, loss, &TrainOptions::new(eps, NormSpec::l2()))?;
            print!("{loss:?} eps = {eps}: w = {:.4?}, objective {:.6}", model.weights.as_slice(), model.objective);
            if let Ok(x) = dro_objective_crosscheck(&model, &data, loss, eps, &NormSpec::l2()) {
                print!(", worst case {:.6}", x.worst_case);
            }
            println!();
        }
    }
    Ok(())
}
