//! Robust inverse covariance estimate from few samples: eigenvalues are
//! shrunk toward each other and the estimate stays well conditioned.
//!
//! `cargo run --example shrinkage`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wdro::shrinkage::{sample_moments, wasserstein_shrinkage};
use wdro::Vector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (m, n) = (8, 6);
    // fewer samples than dimensions: the sample covariance is singular
    let samples: Vec<Vector> = (0..n).map(|_| Vector::from_fn(m, |_, _| StandardNormal.sample(&mut rng))).collect();
    let moments = sample_moments(&samples)?;

    for eps in [0.01, 0.1, 1.0] {
        let res = wasserstein_shrinkage(&moments, eps)?;
        println!("eps = {eps}: gamma {:.4}, condition number {:.2}", res.gamma, res.condition_number());
        for (l, x) in &res.eigen_map {
            println!("  sample eigenvalue {l:>8.4} -> precision eigenvalue {x:>8.4}");
        }
    }
    Ok(())
}
