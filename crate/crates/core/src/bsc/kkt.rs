//! First-order optimality check for the binary attack.
//!
//! With Lagrangian `I(U;Y) + lambda (w.p - eps)` the stationarity condition for
//! cell `j` is `dI/dp_j + lambda w_j = 0`. Coordinates pinned at 0 or 1 carry a
//! box multiplier, so there only the sign of `dI/dp_j + lambda w_j` is
//! constrained (`>= 0` at 0, `<= 0` at 1).

use serde::{Deserialize, Serialize};

use super::{bsc_gradient, bsc_mi, cells, dot, BscJoint, FlipProbs};
use crate::error::Result;
use crate::info::LOG_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateState {
    Interior,
    AtZero,
    AtOne,
    /// Zero cost weight: the flip does not affect `(U, Y)`.
    Unused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub lambda_star: f64,
    /// Interior: `|g + lambda w|`; at a bound: the violation of the sign
    /// condition; unused cells: 0.
    pub stationarity_residuals: [f64; 4],
    pub coordinates: [CoordinateState; 4],
    pub primal_feasible: bool,
    pub complementary_slackness_residual: f64,
    /// Largest `|ln r_u - ln r_Y|` over `u`, with `r = P(Y=0|.)/P(Y=1|.)`.
    /// `None` when the ratio equality is not a necessary condition here.
    pub ratio_equality_residual: Option<f64>,
    pub mi_nats: f64,
}

impl KktReport {
    pub fn max_stationarity_residual(&self) -> f64 {
        self.stationarity_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_interior(&self) -> bool {
        self.coordinates.iter().all(|c| matches!(c, CoordinateState::Interior | CoordinateState::Unused))
    }
}

/// Evaluates the optimality conditions at `flips`.
///
/// `tol` decides when a coordinate counts as sitting on a bound, when the
/// budget counts as met, and when the information counts as zero.
pub fn kkt_report(joint: &BscJoint, eps: f64, flips: &FlipProbs, tol: f64) -> Result<KktReport> {
    let w = joint.weights();
    let p = flips.to_array();
    let g = bsc_gradient(joint, flips)?;
    let cost = dot(&w, &p);
    let slack = eps - cost;

    let coordinates = std::array::from_fn(|i| {
        if w[i] == 0.0 {
            CoordinateState::Unused
        } else if p[i] <= tol {
            CoordinateState::AtZero
        } else if p[i] >= 1.0 - tol {
            CoordinateState::AtOne
        } else {
            CoordinateState::Interior
        }
    });
    let interior: Vec<usize> = (0..4).filter(|&i| coordinates[i] == CoordinateState::Interior).collect();

    let lambda_star = if !interior.is_empty() {
        let num: f64 = interior.iter().map(|&i| g[i] * w[i]).sum();
        let den: f64 = interior.iter().map(|&i| w[i] * w[i]).sum();
        (-num / den).max(0.0)
    } else if slack > tol {
        0.0
    } else {
        (0..4).filter(|&i| coordinates[i] == CoordinateState::AtZero).map(|i| -g[i] / w[i]).fold(0.0, f64::max)
    };

    let stationarity_residuals = std::array::from_fn(|i| {
        let r = g[i] + lambda_star * w[i];
        match coordinates[i] {
            CoordinateState::Interior => r.abs(),
            CoordinateState::AtZero => (-r).max(0.0),
            CoordinateState::AtOne => r.max(0.0),
            CoordinateState::Unused => 0.0,
        }
    });

    let in_box = p.iter().all(|v| *v >= -tol && *v <= 1.0 + tol);
    let mi_nats = bsc_mi(joint, flips);
    let independent = mi_nats <= tol;
    let interior_point = coordinates.iter().all(|c| *c == CoordinateState::Interior);
    let ratio_equality_residual =
        if joint.is_strictly_positive() && (interior_point || independent) { ratio_residual(joint, &p) } else { None };

    Ok(KktReport {
        lambda_star,
        stationarity_residuals,
        coordinates,
        primal_feasible: in_box && slack >= -tol,
        complementary_slackness_residual: (lambda_star * slack).abs(),
        ratio_equality_residual,
        mi_nats,
    })
}

fn ratio_residual(joint: &BscJoint, p: &[f64; 4]) -> Option<f64> {
    let [p00, p01, p10, p11] = cells(joint, p);
    let log_ratio = |y0: f64, y1: f64| {
        if y0 > LOG_FLOOR && y1 > LOG_FLOOR {
            Some(y0.ln() - y1.ln())
        } else {
            None
        }
    };
    let r0 = log_ratio(p00, p01)?;
    let r1 = log_ratio(p10, p11)?;
    let ry = log_ratio(p00 + p10, p01 + p11)?;
    Some((r0 - ry).abs().max((r1 - ry).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsc::{solve_bsc, BscSolverConfig};

    #[test]
    fn plateau_has_zero_residuals() {
        let j = BscJoint::new(0.25, 0.25, 0.25, 0.25).unwrap();
        let r = kkt_report(&j, 0.1, &FlipProbs::ZERO, 1e-9).unwrap();
        assert_eq!(r.lambda_star, 0.0);
        assert!(r.max_stationarity_residual() < 1e-15);
        assert_eq!(r.complementary_slackness_residual, 0.0);
        assert!(r.primal_feasible);
        assert!(r.ratio_equality_residual.unwrap() < 1e-15);
    }

    #[test]
    fn zero_information_optimum_satisfies_ratio_equality() {
        let j = BscJoint::new(0.45, 0.05, 0.05, 0.45).unwrap();
        let s = solve_bsc(&j, 0.6, &BscSolverConfig::default()).unwrap();
        let r = kkt_report(&j, 0.6, &s.flips, 1e-9).unwrap();
        assert!(r.ratio_equality_residual.unwrap() <= 1e-4, "{r:?}");
    }

    #[test]
    fn over_budget_is_infeasible() {
        let j = BscJoint::new(0.4, 0.1, 0.1, 0.4).unwrap();
        let f = FlipProbs::new(0.5, 0.5, 0.5, 0.5).unwrap();
        assert!(!kkt_report(&j, 0.1, &f, 1e-9).unwrap().primal_feasible);
    }

    #[test]
    fn boundary_optimum_reports_box_corrected_residuals() {
        let j = BscJoint::new(0.45, 0.05, 0.05, 0.45).unwrap();
        let s = solve_bsc(&j, 0.1, &BscSolverConfig::default()).unwrap();
        let r = kkt_report(&j, 0.1, &s.flips, 1e-9).unwrap();
        assert!(r.mi_nats > 0.0);
        assert!(r.lambda_star > 0.0);
        assert!(r.max_stationarity_residual() < 1e-4, "{r:?}");
        assert!(r.complementary_slackness_residual < 1e-6);
    }
}
