use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

/// Singular values at or below `SVD_RANK_CUTOFF * sigma_max` are dropped.
pub const SVD_RANK_CUTOFF: f64 = 1e-12;

/// Thin SVD `H = Q diag(sigma) V^T` restricted to the numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// n x k, orthonormal columns.
    pub q: DMatrix<f64>,
    /// Descending, strictly positive.
    pub singular_values: Vec<f64>,
    /// m x k, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn squared_singular_values(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.q.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.v.transpose()
    }
}

pub fn svd(h: &DMatrix<f64>) -> Result<SvdResult> {
    if h.is_empty() {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if h.iter().all(|v| *v == 0.0) {
        return Err(Error::RankZero);
    }
    let dec = SVD::new(h.clone(), true, true);
    let u = dec.u.expect("requested U");
    let vt = dec.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]).then(i.cmp(&j)));
    let smax = dec.singular_values[order[0]];
    let kept: Vec<usize> = order.into_iter().filter(|&i| dec.singular_values[i] > SVD_RANK_CUTOFF * smax).collect();
    if kept.is_empty() {
        return Err(Error::RankZero);
    }
    let q = DMatrix::from_fn(h.nrows(), kept.len(), |r, c| u[(r, kept[c])]);
    let v = DMatrix::from_fn(h.ncols(), kept.len(), |r, c| vt[(kept[c], r)]);
    let singular_values = kept.iter().map(|&i| dec.singular_values[i]).collect();
    Ok(SvdResult { q, singular_values, v })
}

/// Descending squared singular values above the rank cutoff, without
/// forming the singular vectors.
pub(crate) fn squared_singular_values(h: &DMatrix<f64>) -> Result<Vec<f64>> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if h.is_empty() || h.iter().all(|v| *v == 0.0) {
        return Err(Error::RankZero);
    }
    let mut s: Vec<f64> = h.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let smax = s[0];
    Ok(s.into_iter().filter(|v| *v > SVD_RANK_CUTOFF * smax).map(|v| v * v).collect())
}
