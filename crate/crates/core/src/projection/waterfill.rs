//! Reverse water-filling of a distortion budget over independent components.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for treating the budget as equal to the total variance.
pub(crate) const SATURATION_TOL: f64 = 1e-12;

/// Water level `tau` and per-component budgets `D_i = min(tau, sigma_i^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfillAllocation {
    pub tau: f64,
    pub budgets: Vec<f64>,
    /// Component variances, descending.
    pub sigma_sq: Vec<f64>,
}

impl WaterfillAllocation {
    pub fn total(&self) -> f64 {
        self.budgets.iter().sum()
    }

    /// `1/2 sum ln(sigma_i^2 / D_i)`; components with `D_i = sigma_i^2` add nothing.
    pub fn mutual_information(&self) -> f64 {
        self.sigma_sq.iter().zip(&self.budgets).map(|(&s, &d)| if d >= s { 0.0 } else { 0.5 * (s / d).ln() }).sum()
    }
}

fn validate(sigma_sq: &[f64], d: f64) -> Result<f64> {
    if sigma_sq.is_empty() {
        return Err(Error::InvalidInput("no components to allocate over".into()));
    }
    if sigma_sq.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidInput("component variances must be positive and finite".into()));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {d}")));
    }
    let total: f64 = sigma_sq.iter().sum();
    if d > total * (1.0 + SATURATION_TOL) {
        return Err(Error::UseZeroMiBranch { budget: d, total });
    }
    Ok(total)
}

fn saturated(sigma_sq: &[f64]) -> WaterfillAllocation {
    WaterfillAllocation { tau: sigma_sq[0] + 1.0, budgets: sigma_sq.to_vec(), sigma_sq: sigma_sq.to_vec() }
}

/// Finite search for the water level: lower a bar through the sorted
/// variances and stop at the first interval that contains the candidate level.
///
/// With 1-based `i`, the candidate is `tau_i = (D - sum_{j>i} sigma_j^2) / i`
/// and the interval is `R_i = [sigma_{i+1}^2, sigma_i^2)`, open below for
/// `i = k`. The case `D = sum sigma_i^2` (`i = 0`) returns every budget at its
/// variance and `tau = sigma_1^2 + 1`.
pub fn falling_bar(sigma_sq: &[f64], d: f64) -> Result<WaterfillAllocation> {
    let total = validate(sigma_sq, d)?;
    if sigma_sq.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("variances must be sorted descending".into()));
    }
    let k = sigma_sq.len();
    if (total - d).abs() <= SATURATION_TOL * total {
        return Ok(saturated(sigma_sq));
    }
    // tail[i] = sum of sigma_sq[i..]
    let mut tail = vec![0.0; k + 1];
    for i in (0..k).rev() {
        tail[i] = tail[i + 1] + sigma_sq[i];
    }
    let candidate = |i: usize| (d - tail[i]) / i as f64;
    let interval = |i: usize| {
        let upper = sigma_sq[i - 1];
        let lower = if i < k { sigma_sq[i] } else { f64::NEG_INFINITY };
        (lower, upper)
    };
    let accepted = (1..=k).find(|&i| {
        let tau = candidate(i);
        let (lo, hi) = interval(i);
        lo <= tau && tau < hi
    });
    // Rounding can push a level sitting exactly on a variance out of both
    // neighbouring intervals; fall back to the nearest interval.
    let i = accepted.unwrap_or_else(|| {
        let miss = |i: usize| {
            let tau = candidate(i);
            let (lo, hi) = interval(i);
            (lo - tau).max(tau - hi).max(0.0)
        };
        (1..=k).min_by(|&a, &b| miss(a).total_cmp(&miss(b))).expect("k >= 1")
    });
    let tau = candidate(i);
    let budgets = sigma_sq.iter().enumerate().map(|(j, &s)| if j < i { tau.clamp(0.0, s) } else { s }).collect();
    Ok(WaterfillAllocation { tau, budgets, sigma_sq: sigma_sq.to_vec() })
}

/// Bisection on the monotone map `tau -> sum min(tau, sigma_i^2)`.
///
/// Independent of [`falling_bar`]; shares only the saturated-budget convention.
pub fn waterfill_bisect_oracle(sigma_sq: &[f64], d: f64, tol: f64) -> Result<WaterfillAllocation> {
    let total = validate(sigma_sq, d)?;
    if d <= 0.0 {
        return Err(Error::InvalidInput("bisection oracle needs a positive budget".into()));
    }
    let mut sorted = sigma_sq.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if (total - d).abs() <= SATURATION_TOL * total {
        return Ok(saturated(&sorted));
    }
    let filled = |tau: f64| sorted.iter().map(|&s| tau.min(s)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, sorted[0]);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if filled(mid) < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let budgets = sorted.iter().map(|&s| tau.min(s)).collect();
    Ok(WaterfillAllocation { tau, budgets, sigma_sq: sorted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_traces() {
        let a = falling_bar(&[4.0, 1.0], 2.0).unwrap();
        assert_eq!(a.tau, 1.0);
        assert_eq!(a.budgets, vec![1.0, 1.0]);

        let b = falling_bar(&[4.0, 1.0], 0.5).unwrap();
        assert_eq!(b.tau, 0.25);
        assert_eq!(b.budgets, vec![0.25, 0.25]);

        let c = falling_bar(&[4.0, 1.0], 5.0).unwrap();
        assert_eq!(c.budgets, vec![4.0, 1.0]);
        assert_eq!(c.tau, 5.0);
    }

    #[test]
    fn zero_budget_gives_zero_level() {
        let a = falling_bar(&[3.0, 2.0, 1.0], 0.0).unwrap();
        assert_eq!(a.tau, 0.0);
        assert!(a.budgets.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn over_budget_and_empty_are_errors() {
        assert!(matches!(falling_bar(&[4.0, 1.0], 5.5), Err(Error::UseZeroMiBranch { .. })));
        assert!(falling_bar(&[], 1.0).is_err());
        assert!(falling_bar(&[1.0, 4.0], 1.0).is_err());
    }

    #[test]
    fn duplicates_skip_empty_intervals() {
        let a = falling_bar(&[2.0, 2.0, 2.0, 0.5], 3.5).unwrap();
        assert!((a.tau - 1.0).abs() < 1e-15);
        assert_eq!(a.budgets, vec![1.0, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn level_exactly_on_a_variance() {
        let a = falling_bar(&[9.0, 4.0, 1.0], 9.0).unwrap();
        assert!((a.tau - 4.0).abs() < 1e-15);
        assert!((a.total() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_hand_cases() {
        let a = waterfill_bisect_oracle(&[4.0, 1.0], 2.0, 1e-13).unwrap();
        assert!((a.tau - 1.0).abs() < 1e-10);
        let b = waterfill_bisect_oracle(&[9.0], 3.0, 1e-13).unwrap();
        assert!((b.tau - 3.0).abs() < 1e-10);
        let c = waterfill_bisect_oracle(&[4.0, 1.0], 4.999, 1e-13).unwrap();
        assert!((c.tau - 3.999).abs() < 1e-10);
        assert!((c.budgets[0] - 3.999).abs() < 1e-10 && c.budgets[1] == 1.0);
    }

    #[test]
    fn mutual_information_of_hand_cases() {
        let mi = |d: f64| falling_bar(&[4.0, 1.0], d).unwrap().mutual_information();
        assert!((mi(2.0) - 2f64.ln()).abs() < 1e-15);
        assert!((mi(0.5) - 0.5 * 64f64.ln()).abs() < 1e-15);
        assert_eq!(mi(5.0), 0.0);
    }
}
