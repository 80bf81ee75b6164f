//! Wasserstein distributionally robust optimization.
//!
//! Worst-case expected losses over Wasserstein balls and Gelbrich moment
//! balls, together with the estimators and learners built on top of them.
//!
//! | module | contents |
//! |---|---|
//! | [`numerics`] | simplex LP, Jacobi eigensolver, scalar root finding and minimization, cutting-plane solver |
//! | [`convex`] | dual norms, convex conjugates, support functions |
//! | [`transport`] | discrete Wasserstein distances, dual potentials, Gelbrich distance |
//! | [`wc_empirical`] | worst-case risk over balls around an empirical distribution |
//! | [`wc_moments`] | worst-case risk over Gelbrich balls of moments |
//! | [`shrinkage`] | robust inverse covariance estimation |
//! | [`mmse`] | minimax affine estimation by Frank-Wolfe |
//! | [`learn`] | robust classifiers and regressors |
//! | [`calibrate`] | radius selection |
//! | [`cli`] | the `wdro` command line driver |
//!
//! Matrices and vectors are `nalgebra` dense types throughout.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibrate;
pub mod cli;
pub mod convex;
pub mod distribution;
pub mod learn;
pub mod mmse;
pub mod numerics;
pub mod shrinkage;
pub mod transport;
pub mod wc_empirical;
pub mod wc_moments;

pub use distribution::{DiscreteDistribution, MomentPair};

/// Dense column-major matrix.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vector = nalgebra::DVector<f64>;
