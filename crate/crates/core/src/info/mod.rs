//! Closed-form and empirical information measures shared by every attack model.

mod discrete;
mod empirical;
mod gaussian;
mod svd;

pub(crate) use discrete::LOG_FLOOR;
pub use discrete::{discrete_mi, DiscreteJoint};
pub use empirical::{empirical_gaussian_mi, sample_covariance};
pub use gaussian::{gaussian_entropy, gaussian_mi, CovarianceMatrix, JointGaussian};
pub(crate) use svd::squared_singular_values;
pub use svd::{svd, SvdResult, SVD_RANK_CUTOFF};

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues of a symmetric matrix in ascending order.
pub(crate) fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}
