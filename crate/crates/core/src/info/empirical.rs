use nalgebra::DMatrix;

use super::gaussian::{gaussian_mi, CovarianceMatrix, JointGaussian};
use crate::error::{Error, Result};

/// Unbiased (`1/(n-1)`) sample covariance of the rows of `samples`.
pub fn sample_covariance(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let n = samples.nrows();
    let mean = samples.row_mean();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    (centered.transpose() * &centered) / (n as f64 - 1.0)
}

/// Plug-in estimate of `I(U;Y)`: sample covariance of the stacked draws fed
/// to [`gaussian_mi`]. Rows are draws.
pub fn empirical_gaussian_mi(u_samples: &DMatrix<f64>, y_samples: &DMatrix<f64>) -> Result<f64> {
    let n = u_samples.nrows();
    if y_samples.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y_samples.nrows() });
    }
    let (du, dy) = (u_samples.ncols(), y_samples.ncols());
    if du == 0 || dy == 0 {
        return Err(Error::InvalidInput("both sample blocks need at least one column".into()));
    }
    if n < du + dy + 2 {
        return Err(Error::InvalidInput(format!("need at least {} draws, got {n}", du + dy + 2)));
    }
    let mut stacked = DMatrix::zeros(n, du + dy);
    stacked.columns_mut(0, du).copy_from(u_samples);
    stacked.columns_mut(du, dy).copy_from(y_samples);
    let cov = CovarianceMatrix::new(sample_covariance(&stacked)).map_err(|e| match e {
        Error::NotPsd(_) => Error::DegenerateJoint,
        other => other,
    })?;
    gaussian_mi(&JointGaussian::stacked(cov, du)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn draws(n: usize, rho: f64, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = RngStream::new(seed, 0);
        let mut u = DMatrix::zeros(n, 1);
        let mut y = DMatrix::zeros(n, 1);
        for i in 0..n {
            let a = rng.standard_normal();
            let b = rng.standard_normal();
            u[(i, 0)] = a;
            y[(i, 0)] = rho * a + (1.0 - rho * rho).sqrt() * b;
        }
        (u, y)
    }

    #[test]
    fn independent_draws_near_zero() {
        let (u, y) = draws(100_000, 0.0, 11);
        assert!(empirical_gaussian_mi(&u, &y).unwrap().abs() < 0.01);
    }

    #[test]
    fn correlated_draws_near_closed_form() {
        let (u, y) = draws(100_000, 0.5, 12);
        let mi = empirical_gaussian_mi(&u, &y).unwrap();
        assert!((mi - 0.14384).abs() < 0.01, "{mi}");
    }

    #[test]
    fn identical_draws_are_degenerate() {
        let (u, _) = draws(1000, 0.0, 13);
        assert_eq!(empirical_gaussian_mi(&u, &u.clone()), Err(Error::DegenerateJoint));
    }

    #[test]
    fn too_few_draws() {
        let (u, y) = draws(3, 0.0, 14);
        assert!(matches!(empirical_gaussian_mi(&u, &y), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sample_covariance_uses_n_minus_one() {
        let s = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        assert_eq!(sample_covariance(&s)[(0, 0)], 2.0);
    }
}
