//! Distributionally robust linear regression with several losses.
//!
//! `cargo run --example regressor`

use std::path::Path;

use wdro::cli::read_csv;
use wdro::convex::NormSpec;
use wdro::learn::{dro_objective_crosscheck, dro_train_regressor, Dataset, TrainOptions, UnivariateLoss};
use wdro::Vector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/regress.csv");
    let (_, rows) = read_csv(&path, "input")?;
    let features = rows.iter().map(|r| Vector::from_column_slice(&r[..r.len() - 1])).collect();
    let labels = rows.iter().map(|r| r[r.len() - 1]).collect();
    let data = Dataset::new(features, labels)?;

    let losses = [
        (UnivariateLoss::Squared, 2),
        (UnivariateLoss::Huber { delta: 0.5 }, 1),
        (UnivariateLoss::EpsInsensitive { delta: 0.1 }, 1),
        (UnivariateLoss::Pinball { tau: 0.9 }, 1),
    ];
    for (loss, order) in losses {
        for eps in [0.0, 0.1] {
            let model = dro_train_regressor(&data, loss, order, &TrainOptions::new(eps, NormSpec::l2()))?;
            print!("{loss:?} eps = {eps}: w = {:.4?}, objective {:.6}", model.weights.as_slice(), model.objective);
            // piecewise affine losses have an exact worst-case counterpart
            if let Ok(x) = dro_objective_crosscheck(&model, &data, loss, eps, &NormSpec::l2()) {
                print!(", worst case {:.6}", x.worst_case);
            }
            println!();
        }
    }
    Ok(())
}
