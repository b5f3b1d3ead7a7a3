//! Optimal adversarial perturbation laws under a distortion budget.
//!
//! Every solver here answers the same question for a different source model:
//! which perturbation distribution, subject to a cap on its expected cost,
//! minimizes the mutual information between a source `U` and the perturbed
//! observation `Y = X + E`?
//!
//! - [`scalar`]: scalar Gaussian source observed through additive Gaussian noise.
//! - [`projection`]: Gaussian vector seen through a linear map `X = HU`
//!   (reverse water-filling over the singular values of `H`).
//! - [`bsc`]: binary source and binary observation with input-dependent flips.
//! - [`subset`]: sparse attacks that may only touch `k` of `m` coordinates.
//!
//! Shared analytics (Gaussian and discrete mutual information, differential
//! entropy, thin SVD, empirical estimators and a splittable RNG) live in
//! [`info`] and [`rng`]. All quantities are in nats unless stated otherwise.

pub mod bsc;
pub mod error;
pub mod info;
pub mod matrix_csv;
pub mod projection;
pub mod rng;
pub mod scalar;
pub mod subset;

pub use error::{Error, Result};
pub use info::{
    discrete_mi, empirical_gaussian_mi, gaussian_entropy, gaussian_mi, svd, CovarianceMatrix, DiscreteJoint,
    JointGaussian, SvdResult,
};
pub use rng::RngStream;

/// Converts nats to bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
