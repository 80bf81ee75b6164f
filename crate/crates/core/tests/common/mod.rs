//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdro::wc_empirical::{AffinePiece, PiecewiseAffineLoss};
use wdro::{DiscreteDistribution, Mat, MomentPair, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Vector {
    Vector::from_fn(m, |_, _| rng.random_range(-scale..scale))
}

pub fn uniform_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// Positive definite with eigenvalues bounded below by `floor`.
pub fn spd(rng: &mut ChaCha8Rng, m: usize, floor: f64) -> Mat {
    let a = uniform_mat(rng, m, m, 1.0);
    &a * a.transpose() + Mat::identity(m, m) * floor
}

/// Symmetric with eigenvalues of both signs (for m >= 2).
pub fn indefinite(rng: &mut ChaCha8Rng, m: usize) -> Mat {
    let q = uniform_mat(rng, m, m, 1.0).qr().q();
    let eig = Vector::from_fn(m, |k, _| {
        let mag = rng.random_range(0.2..2.0);
        if k % 2 == 0 {
            mag
        } else {
            -mag
        }
    });
    let s = &q * Mat::from_diagonal(&eig) * q.transpose();
    (&s + s.transpose()) * 0.5
}

pub fn distribution(rng: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> DiscreteDistribution {
    let atoms: Vec<Vector> = (0..n).map(|_| uniform_vec(rng, m, scale)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteDistribution::normalized(atoms, weights).unwrap()
}

pub fn empirical(rng: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> DiscreteDistribution {
    DiscreteDistribution::empirical((0..n).map(|_| uniform_vec(rng, m, scale)).collect()).unwrap()
}

pub fn pwa(rng: &mut ChaCha8Rng, m: usize, pieces: usize) -> PiecewiseAffineLoss {
    let ps = (0..pieces)
        .map(|_| AffinePiece::new(uniform_vec(rng, m, 2.0).as_slice().to_vec(), rng.random_range(-1.0..1.0)))
        .collect();
    PiecewiseAffineLoss::new(ps).unwrap()
}

pub fn moments(rng: &mut ChaCha8Rng, m: usize) -> MomentPair {
    MomentPair::new(uniform_vec(rng, m, 1.0), spd(rng, m, 0.2)).unwrap()
}
