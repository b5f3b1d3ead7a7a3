//! Scalar Gaussian attack.
//!
//! `U ~ N(0, a2)` is observed as `X = U + W` with independent `W ~ N(0, sigma2)`,
//! and the attacker adds `E` with `E[E^2] <= D`. The optimal `E` is jointly
//! Gaussian with `(U, W)`, so the search reduces to the two cross-covariances
//! `x = Cov(U, E)` and `y = Cov(W, E)`. Positive semidefiniteness of the
//! `(U, W, E)` covariance is the ellipse `x^2/a2 + y^2/sigma2 <= D`, and the
//! attained information is `-1/2 ln(1 - r)` with
//!
//! ```text
//! r = (a2 + x)^2 / (a2 (a2 + sigma2 + D + 2x + 2y))
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::CovarianceMatrix;

const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarProblem {
    pub a2: f64,
    pub sigma2: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl ScalarProblem {
    pub fn new(a2: f64, sigma2: f64, d: f64) -> Result<Self> {
        if !(a2.is_finite() && sigma2.is_finite() && d.is_finite()) {
            return Err(Error::InvalidInput("scalar problem parameters must be finite".into()));
        }
        if a2 <= 0.0 || sigma2 <= 0.0 || d < 0.0 {
            return Err(Error::InvalidInput(format!("need a2 > 0, sigma2 > 0, D >= 0 (got {a2}, {sigma2}, {d})")));
        }
        Ok(Self { a2, sigma2, d })
    }

    pub fn with_budget(&self, d: f64) -> Result<Self> {
        Self::new(self.a2, self.sigma2, d)
    }

    /// Information carried by the unattacked channel, `1/2 ln(1 + a2/sigma2)`.
    pub fn unattacked_mi(&self) -> f64 {
        0.5 * (self.a2 / self.sigma2).ln_1p()
    }
}

/// Optimal cross-covariances and the information they leave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSolution {
    pub a2: f64,
    pub sigma2: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub x: f64,
    pub y: f64,
    pub ratio: f64,
    pub mi_nats: f64,
    /// Covariance of `(U, W, E)`, row-major.
    #[serde(rename = "F")]
    pub f: [f64; 9],
}

impl ScalarSolution {
    fn at(p: &ScalarProblem, x: f64, y: f64) -> Self {
        let ratio = objective_ratio(p, x, y);
        Self {
            a2: p.a2,
            sigma2: p.sigma2,
            d: p.d,
            x,
            y,
            ratio,
            mi_nats: mi_from_ratio(ratio),
            f: [p.a2, 0.0, x, 0.0, p.sigma2, y, x, y, p.d],
        }
    }

    pub fn problem(&self) -> ScalarProblem {
        ScalarProblem { a2: self.a2, sigma2: self.sigma2, d: self.d }
    }

    pub fn covariance(&self) -> Result<CovarianceMatrix> {
        CovarianceMatrix::from_row_slice(3, &self.f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSolverConfig {
    /// Points per axis of the seeding mesh.
    pub grid_resolution: usize,
    /// Simplex iterations for the local polish.
    pub max_iter: usize,
    /// Relative spread of simplex values at which the polish stops.
    pub rel_tol: f64,
}

impl Default for ScalarSolverConfig {
    fn default() -> Self {
        Self { grid_resolution: 200, max_iter: 500, rel_tol: 1e-10 }
    }
}

/// `-1/2 ln(1 - r)`; infinite when `r >= 1`.
pub fn mi_from_ratio(ratio: f64) -> f64 {
    if ratio >= 1.0 {
        f64::INFINITY
    } else {
        (-0.5 * (-ratio).ln_1p()).max(0.0)
    }
}

pub fn objective_ratio(p: &ScalarProblem, x: f64, y: f64) -> f64 {
    let var_y = p.a2 + p.sigma2 + p.d + 2.0 * x + 2.0 * y;
    // A constant observation carries no information; PSD-ness forces a2 + x -> 0 too.
    if var_y <= 1e-12 * p.a2 {
        return 0.0;
    }
    let cov_uy = p.a2 + x;
    cov_uy * cov_uy / (p.a2 * var_y)
}

pub fn feasible(p: &ScalarProblem, x: f64, y: f64) -> bool {
    x * x / p.a2 + y * y / p.sigma2 <= p.d + FEASIBILITY_SLACK
}

/// Radial pull-back of `(x, y)` onto the feasibility ellipse.
fn project(p: &ScalarProblem, x: f64, y: f64) -> (f64, f64) {
    let q = x * x / p.a2 + y * y / p.sigma2;
    if q <= p.d {
        (x, y)
    } else if p.d == 0.0 {
        (0.0, 0.0)
    } else {
        let s = (p.d / q).sqrt();
        (x * s, y * s)
    }
}

fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }
}

/// Exhaustive search over the `resolution x resolution` mesh spanning
/// `x in [-sqrt(a2 D), sqrt(a2 D)]`, `y in [-sqrt(sigma2 D), sqrt(sigma2 D)]`.
///
/// Infeasible mesh points are skipped; ties go to the lexicographically
/// smallest `(x, y)`. A mesh with no feasible point (even resolutions skip the
/// origin) reports the unattacked origin.
pub fn grid_oracle(p: &ScalarProblem, resolution: usize) -> Result<ScalarSolution> {
    if resolution < 2 {
        return Err(Error::InvalidInput("grid resolution must be at least 2".into()));
    }
    if p.d == 0.0 {
        return Ok(ScalarSolution::at(p, 0.0, 0.0));
    }
    let xr = (p.a2 * p.d).sqrt();
    let yr = (p.sigma2 * p.d).sqrt();
    let best = (0..resolution)
        .into_par_iter()
        .filter_map(|i| {
            let x = linspace(-xr, xr, resolution, i);
            let mut row_best: Option<(f64, usize, usize)> = None;
            for j in 0..resolution {
                let y = linspace(-yr, yr, resolution, j);
                if !feasible(p, x, y) {
                    continue;
                }
                let r = objective_ratio(p, x, y);
                if row_best.is_none_or(|(br, _, _)| r < br) {
                    row_best = Some((r, i, j));
                }
            }
            row_best
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a });
    let Some(best) = best else {
        return Ok(ScalarSolution::at(p, 0.0, 0.0));
    };
    let x = linspace(-xr, xr, resolution, best.1);
    let y = linspace(-yr, yr, resolution, best.2);
    Ok(ScalarSolution::at(p, x, y))
}

/// Nelder-Mead on `f(project(z))`.
fn polish(p: &ScalarProblem, start: (f64, f64), step: f64, cfg: &ScalarSolverConfig) -> (f64, f64) {
    let f = |z: [f64; 2]| {
        let (x, y) = project(p, z[0], z[1]);
        objective_ratio(p, x, y)
    };
    let mut simplex = [[start.0, start.1], [start.0 + step, start.1], [start.0, start.1 + step]];
    let mut values = simplex.map(f);
    for _ in 0..cfg.max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        if values[2] - values[0] <= cfg.rel_tol * values[0].abs() + f64::MIN_POSITIVE {
            break;
        }
        let centroid = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along =
            |t: f64| [centroid[0] + t * (simplex[2][0] - centroid[0]), centroid[1] + t * (simplex[2][1] - centroid[1])];
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = [
                        simplex[0][0] + 0.5 * (simplex[k][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[k][1] - simplex[0][1]),
                    ];
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    project(p, simplex[best][0], simplex[best][1])
}

/// Golden-section refinement along the ellipse boundary, seeded by a dense
/// angular scan.
fn boundary_search(p: &ScalarProblem) -> (f64, f64) {
    let xr = (p.a2 * p.d).sqrt();
    let yr = (p.sigma2 * p.d).sqrt();
    let point = |t: f64| (xr * t.cos(), yr * t.sin());
    let f = |t: f64| {
        let (x, y) = point(t);
        objective_ratio(p, x, y)
    };
    const SCAN: usize = 720;
    let h = std::f64::consts::TAU / SCAN as f64;
    let k = (0..SCAN).min_by(|&i, &j| f(i as f64 * h).total_cmp(&f(j as f64 * h))).unwrap_or(0);
    let (mut lo, mut hi) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let t = if fc <= fd { c } else { d };
    let (x, y) = point(t);
    project(p, x, y)
}

pub fn solve(p: &ScalarProblem, cfg: &ScalarSolverConfig) -> Result<ScalarSolution> {
    solve_with_hints(p, cfg, &[])
}

/// [`solve`], additionally considering caller-supplied feasible points
/// (e.g. the optimum at a smaller budget, which stays feasible and no worse).
pub fn solve_with_hints(p: &ScalarProblem, cfg: &ScalarSolverConfig, hints: &[(f64, f64)]) -> Result<ScalarSolution> {
    let seed = grid_oracle(p, cfg.grid_resolution.max(2))?;
    if p.d == 0.0 {
        return Ok(seed);
    }
    let mut candidates = vec![(seed.x, seed.y), (0.0, 0.0)];
    if feasible(p, -p.a2, 0.0) {
        candidates.push(project(p, -p.a2, 0.0));
    }
    candidates.extend(hints.iter().filter(|(x, y)| feasible(p, *x, *y)).map(|&(x, y)| project(p, x, y)));
    let spacing = 2.0 * (p.a2 * p.d).sqrt().max((p.sigma2 * p.d).sqrt()) / (cfg.grid_resolution.max(2) - 1) as f64;
    candidates.push(polish(p, (seed.x, seed.y), 2.0 * spacing, cfg));
    candidates.push(boundary_search(p));
    let boundary = *candidates.last().expect("just pushed");
    candidates.push(polish(p, boundary, spacing, cfg));

    let mut best = candidates[0];
    let mut best_r = objective_ratio(p, best.0, best.1);
    for &(x, y) in &candidates[1..] {
        let r = objective_ratio(p, x, y);
        if r < best_r {
            best = (x, y);
            best_r = r;
        }
    }
    Ok(ScalarSolution::at(p, best.0, best.1))
}

/// Minimal information over a sorted list of budgets.
///
/// Each solve is warm-started with the previous optimum, which remains
/// feasible for a larger budget, so the curve is nonincreasing.
pub fn mi_curve(a2: f64, sigma2: f64, d_values: &[f64], cfg: &ScalarSolverConfig) -> Result<Vec<ScalarSolution>> {
    if d_values.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidInput("budgets must be finite and nonnegative".into()));
    }
    if d_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("budgets must be sorted ascending".into()));
    }
    let mut out: Vec<ScalarSolution> = Vec::with_capacity(d_values.len());
    for &d in d_values {
        let p = ScalarProblem::new(a2, sigma2, d)?;
        let hints: Vec<(f64, f64)> = out.last().map(|s| vec![(s.x, s.y)]).unwrap_or_default();
        let sol = solve_with_hints(&p, cfg, &hints)?;
        if let Some(prev) = out.last() {
            debug_assert!(sol.mi_nats <= prev.mi_nats + 1e-6);
        }
        out.push(sol);
    }
    Ok(out)
}
