use std::f64::consts::{E, PI};

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use super::sorted_eigenvalues;
use crate::error::{Error, Result};

/// Relative asymmetry accepted before a matrix is rejected.
const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue may dip to `-PSD_TOL * trace` before the input counts as indefinite.
const PSD_TOL: f64 = 1e-9;
/// A block whose eigenvalue ratio falls below this is treated as singular.
const SINGULAR_TOL: f64 = 1e-12;

/// Dense symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates symmetry and positive semidefiniteness, then stores the
    /// exactly symmetrized matrix.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "covariance must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariance has non-finite entries".into()));
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        let asym = (&entries - entries.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let smallest = sorted_eigenvalues(&sym)[0];
        if smallest < -PSD_TOL * sym.trace().abs() {
            return Err(Error::NotPsd(smallest));
        }
        Ok(Self { entries: sym })
    }

    pub fn from_row_slice(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: rows.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(variances)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        sorted_eigenvalues(&self.entries)[0]
    }

    /// Principal submatrix on `idx` (rows and columns in the given order).
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.entries[(rows[i], cols[j])])
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.entries.transpose().iter().copied().collect()
    }
}

/// Zero-mean jointly Gaussian vector split into a source block `U` and an
/// observation block `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    cov: CovarianceMatrix,
    source: Vec<usize>,
    observation: Vec<usize>,
}

impl JointGaussian {
    pub fn new(cov: CovarianceMatrix, source: Vec<usize>, observation: Vec<usize>) -> Result<Self> {
        let n = cov.dim();
        if source.is_empty() || observation.is_empty() {
            return Err(Error::InvalidInput("both blocks of the partition must be nonempty".into()));
        }
        let mut seen = vec![false; n];
        for &i in source.iter().chain(observation.iter()) {
            if i >= n || seen[i] {
                return Err(Error::InvalidInput(format!("partition index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("partition does not cover every coordinate".into()));
        }
        Ok(Self { cov, source, observation })
    }

    /// Source block is the first `dim_u` coordinates, observation the rest.
    pub fn stacked(cov: CovarianceMatrix, dim_u: usize) -> Result<Self> {
        let n = cov.dim();
        if dim_u == 0 || dim_u >= n {
            return Err(Error::InvalidInput(format!("cannot split dimension {n} at {dim_u}")));
        }
        Self::new(cov, (0..dim_u).collect(), (dim_u..n).collect())
    }

    pub fn cov(&self) -> &CovarianceMatrix {
        &self.cov
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn observation(&self) -> &[usize] {
        &self.observation
    }
}

fn is_singular(block: &DMatrix<f64>) -> bool {
    let ev = sorted_eigenvalues(block);
    let largest = ev[ev.len() - 1];
    largest <= 0.0 || ev[0] <= SINGULAR_TOL * largest
}

/// `I(U;Y)` in nats for a zero-mean jointly Gaussian pair.
///
/// Whitens both blocks and sums `-1/2 ln(1 - rho_i^2)` over the canonical
/// correlations, which equals `1/2 ln(det S_uu det S_yy / det S)` without
/// cancelling large log-determinants.
pub fn gaussian_mi(joint: &JointGaussian) -> Result<f64> {
    let cov = joint.cov();
    let uu = cov.block(joint.source(), joint.source());
    let yy = cov.block(joint.observation(), joint.observation());
    let uy = cov.block(joint.source(), joint.observation());

    let scale = (uu.diagonal().max() * yy.diagonal().max()).sqrt();
    if uy.amax() <= 1e-14 * scale || scale == 0.0 {
        return Ok(0.0);
    }
    if is_singular(&uu) || is_singular(&yy) {
        return Err(Error::DegenerateJoint);
    }
    let lu = Cholesky::new(uu).ok_or(Error::DegenerateJoint)?.unpack();
    let ly = Cholesky::new(yy).ok_or(Error::DegenerateJoint)?.unpack();
    // M = Lu^-1 S_uy Ly^-T
    let left = lu.solve_lower_triangular(&uy).ok_or(Error::DegenerateJoint)?;
    let whitened = ly.solve_lower_triangular(&left.transpose()).ok_or(Error::DegenerateJoint)?;
    let rho = whitened.singular_values();
    let mut mi = 0.0;
    for r in rho.iter() {
        let r2 = r * r;
        if r2 >= 1.0 - 1e-13 {
            return Err(Error::DegenerateJoint);
        }
        mi -= 0.5 * (-r2).ln_1p();
    }
    Ok(mi.max(0.0))
}

/// Differential entropy `1/2 ln((2 pi e)^d det cov)` in nats.
pub fn gaussian_entropy(cov: &CovarianceMatrix) -> Result<f64> {
    let m = cov.matrix();
    if is_singular(m) {
        return Err(Error::SingularEntropy);
    }
    let chol = Cholesky::new(m.clone()).ok_or(Error::SingularEntropy)?;
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    Ok(0.5 * (cov.dim() as f64 * (2.0 * PI * E).ln() + logdet))
}
