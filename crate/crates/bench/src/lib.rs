//! Fixed inputs shared by the criterion benchmarks.

use miattack_core::bsc::BscJoint;
use miattack_core::RngStream;
use nalgebra::DMatrix;

/// `n x m` matrix with i.i.d. `N(0, 1/m)` entries.
pub fn gaussian_matrix(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = RngStream::new(seed, 0);
    let sd = (1.0 / m as f64).sqrt();
    DMatrix::from_fn(n, m, |_, _| sd * rng.standard_normal())
}

/// Descending random spectrum of length `k`.
pub fn spectrum(k: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 1);
    let mut s: Vec<f64> = (0..k).map(|_| 0.01 + 4.0 * rng.uniform()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn concentrated_joint() -> BscJoint {
    BscJoint::new(0.45, 0.05, 0.05, 0.45).expect("valid joint")
}
