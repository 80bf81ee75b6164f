//! Optimal transport between two small discrete distributions, with the
//! dual potentials that certify the type-1 distance.
//!
//! `cargo run --example transport`

use wdro::convex::NormSpec;
use wdro::transport::{gelbrich_distance, kr_verify, wasserstein_p};
use wdro::{DiscreteDistribution, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = DiscreteDistribution::new(
        vec![Vector::from_vec(vec![0.0, 0.0]), Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![0.0, 2.0])],
        vec![0.5, 0.25, 0.25],
    )?;
    let target = DiscreteDistribution::empirical(vec![Vector::from_vec(vec![1.0, 1.0]), Vector::from_vec(vec![-1.0, 0.5])])?;

    for norm in [NormSpec::l1(), NormSpec::l2(), NormSpec::linf()] {
        let w1 = wasserstein_p(&source, &target, 1.0, &norm)?;
        let check = kr_verify(&source, &target, &norm, &w1.duals, 1e-9);
        println!(
            "{norm:?}: W1 = {:.6}, dual value = {:.6}, potentials feasible = {}",
            w1.distance, check.dual_value, check.feasible
        );
    }

    let w2 = wasserstein_p(&source, &target, 2.0, &NormSpec::l2())?;
    println!("W2 = {:.6}, duality gap {:.1e}", w2.distance, w2.duality_gap);
    println!("coupling:\n{}", w2.plan.coupling);
    // moment-based lower bound on W2
    let g = gelbrich_distance(&source.moments(), &target.moments())?;
    println!("Gelbrich bound {g:.6} <= W2");
    Ok(())
}
