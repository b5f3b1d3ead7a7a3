//! Attacks on a Gaussian vector seen through a linear map.
//!
//! `U ~ N(0, s I_m)` is observed as `X = HU` and the attacker adds `E` with
//! `E ||E||^2 <= D`. Writing `H = Q C V^T` (thin SVD, rank `k`), the problem
//! decouples into `k` independent scalar channels `U''_i = sigma_i V_i^T U`
//! with variances `s sigma_i^2`, and the budget is reverse water-filled across
//! them. The optimal perturbation is `E = Q Lambda` with
//! `Lambda_i = g_i U''_i + N_i`, `g_i = -D_i / (s sigma_i^2)` and
//! `Var(N_i) = D_i (1 - D_i / (s sigma_i^2))`, which leaves
//! `1/2 sum ln(s sigma_i^2 / D_i)` nats.
//!
//! Once `D` reaches `s ||H||_F^2` the attacker can cancel the signal outright
//! (`E = -HU`) and nothing is left.

mod waterfill;

pub use waterfill::{falling_bar, waterfill_bisect_oracle, WaterfillAllocation};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{empirical_gaussian_mi, gaussian_mi, squared_singular_values, svd, CovarianceMatrix, JointGaussian};
use crate::rng::RngStream;
use waterfill::SATURATION_TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionProblem {
    pub h: DMatrix<f64>,
    pub d: f64,
    pub source_variance: f64,
}

impl ProjectionProblem {
    pub fn new(h: DMatrix<f64>, d: f64) -> Result<Self> {
        Self::with_source_variance(h, d, 1.0)
    }

    pub fn with_source_variance(h: DMatrix<f64>, d: f64, source_variance: f64) -> Result<Self> {
        if h.is_empty() || h.iter().all(|v| *v == 0.0) {
            return Err(Error::RankZero);
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("H has non-finite entries".into()));
        }
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {d}")));
        }
        if !(source_variance.is_finite() && source_variance > 0.0) {
            return Err(Error::InvalidInput("source variance must be positive".into()));
        }
        Ok(Self { h, d, source_variance })
    }

    /// Component variances `s sigma_i^2`, descending.
    pub fn component_variances(&self) -> Result<Vec<f64>> {
        Ok(squared_singular_values(&self.h)?.into_iter().map(|v| v * self.source_variance).collect())
    }
}

/// Minimal information from a descending spectrum of component variances.
pub fn min_mi_from_spectrum(sigma_sq: &[f64], d: f64) -> Result<f64> {
    let total: f64 = sigma_sq.iter().sum();
    if d >= total * (1.0 - SATURATION_TOL) {
        return Ok(0.0);
    }
    if d == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(falling_bar(sigma_sq, d)?.mutual_information())
}

/// Smallest achievable `I(U; HU + E)` in nats.
///
/// Zero once the budget covers `s ||H||_F^2`; infinite at `D = 0` (a noiseless
/// linear observation of a continuous source).
pub fn min_mi(p: &ProjectionProblem) -> Result<f64> {
    min_mi_from_spectrum(&p.component_variances()?, p.d)
}

/// Jointly Gaussian law of the optimal perturbation `E = Q Lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationLaw {
    /// n x k
    pub q: DMatrix<f64>,
    /// m x k
    pub v: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub source_variance: f64,
    pub budgets: Vec<f64>,
    pub gains: Vec<f64>,
    pub noise_vars: Vec<f64>,
}

impl PerturbationLaw {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn source_dim(&self) -> usize {
        self.v.nrows()
    }

    fn component_variance(&self, i: usize) -> f64 {
        self.singular_values[i] * self.singular_values[i] * self.source_variance
    }

    /// `Var(Lambda_i)`.
    pub fn perturbation_variance(&self, i: usize) -> f64 {
        self.gains[i] * self.gains[i] * self.component_variance(i) + self.noise_vars[i]
    }

    /// `Cov(Lambda_i, U''_i)`.
    pub fn cross_covariance(&self, i: usize) -> f64 {
        self.gains[i] * self.component_variance(i)
    }

    /// Components whose observation `U''_i + Lambda_i` is not identically zero.
    pub fn active_components(&self) -> Vec<usize> {
        (0..self.rank()).filter(|&i| self.budgets[i] < self.component_variance(i) * (1.0 - SATURATION_TOL)).collect()
    }

    /// Joint law of `U` and the coordinates `Q_a^T Y` of the observation on the
    /// active components, a sufficient statistic for `U` (the rest of `Y` is
    /// identically zero). `None` when every component is cancelled.
    pub fn analytic_joint(&self) -> Result<Option<JointGaussian>> {
        let active = self.active_components();
        if active.is_empty() {
            return Ok(None);
        }
        let m = self.source_dim();
        let ka = active.len();
        let s = self.source_variance;
        let mut cov = DMatrix::zeros(m + ka, m + ka);
        for i in 0..m {
            cov[(i, i)] = s;
        }
        for (c, &i) in active.iter().enumerate() {
            let sigma = self.singular_values[i];
            let keep = 1.0 + self.gains[i];
            for r in 0..m {
                let v = s * keep * sigma * self.v[(r, i)];
                cov[(r, m + c)] = v;
                cov[(m + c, r)] = v;
            }
            cov[(m + c, m + c)] = keep * keep * self.component_variance(i) + self.noise_vars[i];
        }
        Ok(Some(JointGaussian::stacked(CovarianceMatrix::new(cov)?, m)?))
    }

    /// `I(U; HU + E)` of this law, computed from its covariance.
    pub fn analytic_mi(&self) -> Result<f64> {
        match self.analytic_joint()? {
            Some(joint) => gaussian_mi(&joint),
            None => Ok(0.0),
        }
    }
}

pub fn optimal_perturbation_law(p: &ProjectionProblem) -> Result<PerturbationLaw> {
    let dec = svd(&p.h)?;
    let s = p.source_variance;
    let var: Vec<f64> = dec.singular_values.iter().map(|v| v * v * s).collect();
    let total: f64 = var.iter().sum();
    let k = var.len();
    let (budgets, gains, noise_vars) = if p.d == 0.0 {
        (vec![0.0; k], vec![0.0; k], vec![0.0; k])
    } else if p.d >= total * (1.0 - SATURATION_TOL) {
        (var.clone(), vec![-1.0; k], vec![0.0; k])
    } else {
        let alloc = falling_bar(&var, p.d)?;
        let gains = alloc.budgets.iter().zip(&var).map(|(d, v)| -d / v).collect();
        let noise = alloc.budgets.iter().zip(&var).map(|(d, v)| (d * (1.0 - d / v)).max(0.0)).collect();
        (alloc.budgets, gains, noise)
    };
    Ok(PerturbationLaw {
        q: dec.q,
        v: dec.v,
        singular_values: dec.singular_values,
        source_variance: s,
        budgets,
        gains,
        noise_vars,
    })
}

/// One draw of `E = Q Lambda` given the source draw `u`.
pub fn sample_attack(law: &PerturbationLaw, u: &DVector<f64>, rng: &mut RngStream) -> Result<DVector<f64>> {
    if u.len() != law.source_dim() {
        return Err(Error::DimensionMismatch { expected: law.source_dim(), got: u.len() });
    }
    let projected = law.v.tr_mul(u);
    let lambda = DVector::from_fn(law.rank(), |i, _| {
        law.gains[i] * law.singular_values[i] * projected[i] + rng.normal(law.noise_vars[i])
    });
    Ok(&law.q * lambda)
}

/// Monte Carlo check of an optimal attack against its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub analytic_mi: f64,
    /// `None` when the attacked observation is identically zero.
    pub empirical_mi: Option<f64>,
    pub empirical_distortion: f64,
    pub seed: u64,
}

impl ValidationReport {
    pub fn csv_header() -> &'static str {
        "analytic_mi,empirical_mi,empirical_distortion,seed"
    }

    pub fn to_csv_line(&self) -> String {
        let emp = self.empirical_mi.map(|v| format!("{v:.12e}")).unwrap_or_else(|| "degenerate".to_string());
        format!("{:.12e},{emp},{:.12e},{}", self.analytic_mi, self.empirical_distortion, self.seed)
    }
}

const CHUNK: usize = 4096;

/// Samples `(U, HU + E)` under the optimal law and compares the plug-in
/// information estimate and mean distortion with the closed form.
///
/// Draws are generated in fixed chunks, chunk `c` on stream `c` of `seed`.
pub fn validate_attack(p: &ProjectionProblem, n_samples: usize, seed: u64) -> Result<ValidationReport> {
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!("need at least 1000 samples, got {n_samples}")));
    }
    let law = optimal_perturbation_law(p)?;
    let analytic_mi = min_mi(p)?;
    let m = law.source_dim();
    let active = law.active_components();
    let qa = law.q.select_columns(active.iter());
    let sd = p.source_variance.sqrt();

    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunks: Vec<(DMatrix<f64>, DMatrix<f64>, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let rows = CHUNK.min(n_samples - c * CHUNK);
            let mut rng = RngStream::new(seed, c as u64);
            let mut us = DMatrix::zeros(rows, m);
            let mut zs = DMatrix::zeros(rows, active.len());
            let mut dist = 0.0;
            for r in 0..rows {
                let u = DVector::from_fn(m, |_, _| sd * rng.standard_normal());
                let e = sample_attack(&law, &u, &mut rng)?;
                dist += e.norm_squared();
                let y = &p.h * &u + &e;
                let z = qa.tr_mul(&y);
                us.row_mut(r).copy_from(&u.transpose());
                zs.row_mut(r).copy_from(&z.transpose());
            }
            Ok((us, zs, dist))
        })
        .collect::<Result<_>>()?;

    let mut u_all = DMatrix::zeros(n_samples, m);
    let mut z_all = DMatrix::zeros(n_samples, active.len());
    let mut distortion = 0.0;
    let mut offset = 0;
    for (us, zs, dist) in &chunks {
        u_all.rows_mut(offset, us.nrows()).copy_from(us);
        z_all.rows_mut(offset, zs.nrows()).copy_from(zs);
        distortion += dist;
        offset += us.nrows();
    }
    let empirical_mi = if active.is_empty() { None } else { Some(empirical_gaussian_mi(&u_all, &z_all)?) };
    Ok(ValidationReport { analytic_mi, empirical_mi, empirical_distortion: distortion / n_samples as f64, seed })
}
