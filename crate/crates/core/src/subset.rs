//! Sparse attacks that may overwrite `k` of `m` independent Gaussian coordinates.
//!
//! The attacker can erase everything it touches, so what is left is the
//! entropy of the untouched block, `1/2 ln((2 pi e)^{m-k} det Sigma_rest)`.
//! Minimizing it means leaving the smallest variances alone, i.e. attacking
//! the `k` largest.
//!
//! The reported value is that differential entropy, labelled as the residual
//! information of the attack; for a noiseless observation the mutual
//! information of the untouched block is not finite in the usual sense.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `m` accepted by [`brute_force_subset_oracle`].
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetProblem {
    pub variances: Vec<f64>,
    pub k: usize,
}

impl SubsetProblem {
    pub fn new(variances: Vec<f64>, k: usize) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidInput("no coordinates".into()));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("variances must be positive and finite".into()));
        }
        if k >= variances.len() {
            return Err(Error::InvalidInput(format!("k = {k} must be smaller than m = {}", variances.len())));
        }
        Ok(Self { variances, k })
    }

    pub fn m(&self) -> usize {
        self.variances.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSolution {
    /// 0-based indices of the attacked coordinates, ascending.
    pub attacked: Vec<usize>,
    pub residual_mi_nats: f64,
}

/// `1/2 ln((2 pi e)^{|rest|} prod_{i in rest} sigma_i^2)`, summed in index order.
pub fn residual_entropy(variances: &[f64], attacked: &[usize]) -> f64 {
    let mut hit = vec![false; variances.len()];
    for &i in attacked {
        hit[i] = true;
    }
    let ln2pie = (2.0 * PI * E).ln();
    variances.iter().zip(&hit).filter(|(_, h)| !**h).map(|(v, _)| 0.5 * (ln2pie + v.ln())).sum()
}

/// Attacks the `k` largest variances, lowest index first among ties.
pub fn choose_subset(p: &SubsetProblem) -> SubsetSolution {
    let mut order: Vec<usize> = (0..p.m()).collect();
    order.sort_by(|&i, &j| p.variances[j].total_cmp(&p.variances[i]).then(i.cmp(&j)));
    let mut attacked: Vec<usize> = order[..p.k].to_vec();
    attacked.sort_unstable();
    let residual_mi_nats = residual_entropy(&p.variances, &attacked);
    SubsetSolution { attacked, residual_mi_nats }
}

/// Enumerates every size-`k` attacked set and keeps the one whose untouched
/// block has the smallest log-determinant (first in lexicographic order on ties).
pub fn brute_force_subset_oracle(p: &SubsetProblem) -> Result<SubsetSolution> {
    let m = p.m();
    if m > MAX_ENUMERATION {
        return Err(Error::TooLarge { m, max: MAX_ENUMERATION });
    }
    let logs: Vec<f64> = p.variances.iter().map(|v| v.ln()).collect();
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() as usize != p.k {
            continue;
        }
        let logdet: f64 = (0..m).filter(|i| mask & (1 << i) == 0).map(|i| logs[i]).sum();
        if best.is_none_or(|(b, _)| logdet < b) {
            best = Some((logdet, mask));
        }
    }
    let (_, mask) = best.expect("k < m leaves at least one candidate set");
    let attacked: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
    let residual_mi_nats = residual_entropy(&p.variances, &attacked);
    Ok(SubsetSolution { attacked, residual_mi_nats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{gaussian_entropy, CovarianceMatrix};

    fn solve(v: &[f64], k: usize) -> SubsetSolution {
        choose_subset(&SubsetProblem::new(v.to_vec(), k).unwrap())
    }

    #[test]
    fn hand_values() {
        let s = solve(&[3.0, 2.0, 1.0], 1);
        assert_eq!(s.attacked, vec![0]);
        assert!((s.residual_mi_nats - 3.18446).abs() < 1e-5);

        let s = solve(&[1.0, 1.0, 1.0], 0);
        assert!(s.attacked.is_empty());
        assert!((s.residual_mi_nats - 4.25681).abs() < 1e-5);

        let s = solve(&[5.0, 5.0, 1.0], 2);
        assert_eq!(s.attacked, vec![0, 1]);
        assert!((s.residual_mi_nats - 1.41894).abs() < 1e-5);
    }

    #[test]
    fn residual_is_entropy_of_untouched_block() {
        let v = [0.7, 2.5, 0.1, 4.0];
        let s = solve(&v, 2);
        let rest: Vec<f64> = (0..4).filter(|i| !s.attacked.contains(i)).map(|i| v[i]).collect();
        let h = gaussian_entropy(&CovarianceMatrix::diagonal(&rest).unwrap()).unwrap();
        assert!((s.residual_mi_nats - h).abs() < 1e-12);
    }

    #[test]
    fn oracle_hand_cases() {
        let p = SubsetProblem::new(vec![3.0, 2.0, 1.0], 1).unwrap();
        assert_eq!(brute_force_subset_oracle(&p).unwrap(), choose_subset(&p));
        let p = SubsetProblem::new(vec![0.4, 3.0, 0.2, 1.0], 3).unwrap();
        assert_eq!(brute_force_subset_oracle(&p).unwrap().attacked, vec![0, 1, 3]);
    }

    #[test]
    fn validation() {
        assert!(SubsetProblem::new(vec![1.0, 2.0], 2).is_err());
        assert!(SubsetProblem::new(vec![1.0, 0.0], 1).is_err());
        assert!(SubsetProblem::new(vec![], 0).is_err());
        let big = SubsetProblem::new(vec![1.0; 21], 3).unwrap();
        assert!(matches!(brute_force_subset_oracle(&big), Err(Error::TooLarge { .. })));
    }
}
