//! Binary attacks with input-dependent flips.
//!
//! `(U, X)` is a pair of bits with joint `(a, b, c, d)` over
//! `(0,0), (0,1), (1,0), (1,1)`. The attacker flips `X` with probability
//! `p_j` depending on the cell, producing `Y = X xor E`, at expected cost
//! `a p1 + b p2 + c p3 + d p4 <= eps`. `I(U;Y)` is convex in `p`, so a
//! projected first-order method reaches the global minimum; an exhaustive
//! mesh search serves as the independent oracle.

mod kkt;

pub use kkt::{kkt_report, CoordinateState, KktReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{DiscreteJoint, LOG_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BscJoint {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl BscJoint {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let cells = [a, b, c, d];
        if cells.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("joint probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("joint probabilities sum to {total}, not 1")));
        }
        Ok(Self { a, b, c, d })
    }

    /// Rescales nonnegative weights to a distribution.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let total = a + b + c + d;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidInput("joint weights must have a positive finite sum".into()));
        }
        Self::new(a / total, b / total, c / total, d / total)
    }

    /// Flip costs `(a, b, c, d)`.
    pub fn weights(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights().iter().all(|w| *w > 0.0)
    }

    /// Swaps the labels of `X`.
    pub fn relabel_x(&self) -> Self {
        Self { a: self.b, b: self.a, c: self.d, d: self.c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipProbs {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl FlipProbs {
    pub const ZERO: Self = Self { p1: 0.0, p2: 0.0, p3: 0.0, p4: 0.0 };

    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Result<Self> {
        let p = Self { p1, p2, p3, p4 };
        if p.to_array().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!("flip probabilities must lie in [0,1]: {p:?}")));
        }
        Ok(p)
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        Self { p1: p[0], p2: p[1], p3: p[2], p4: p[3] }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }

    pub fn cost(&self, joint: &BscJoint) -> f64 {
        dot(&joint.weights(), &self.to_array())
    }

    pub fn relabel_x(&self) -> Self {
        Self { p1: self.p2, p2: self.p1, p3: self.p4, p4: self.p3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BscSolution {
    pub flips: FlipProbs,
    pub mi_nats: f64,
    pub cost: f64,
}

impl BscSolution {
    fn at(joint: &BscJoint, p: [f64; 4]) -> Self {
        let flips = FlipProbs::from_array(p);
        Self { flips, mi_nats: bsc_mi(joint, &flips), cost: flips.cost(joint) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BscSolverConfig {
    /// Accepted gap to the best candidate, in nats.
    pub tol: f64,
    /// Mesh resolution of the coarse seed search.
    pub seed_grid_resolution: usize,
    pub max_iter: usize,
}

impl Default for BscSolverConfig {
    fn default() -> Self {
        Self { tol: 1e-6, seed_grid_resolution: 25, max_iter: 5000 }
    }
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cells of the `(U, Y)` joint: `[P(0,0), P(0,1), P(1,0), P(1,1)]`.
fn cells(joint: &BscJoint, p: &[f64; 4]) -> [f64; 4] {
    let BscJoint { a, b, c, d } = *joint;
    [a * (1.0 - p[0]) + b * p[1], a * p[0] + b * (1.0 - p[1]), c * (1.0 - p[2]) + d * p[3], c * p[2] + d * (1.0 - p[3])]
}

/// Joint table of `(U, Y)` under the flips.
pub fn eq8_joint(joint: &BscJoint, flips: &FlipProbs) -> Result<DiscreteJoint> {
    let t = cells(joint, &flips.to_array());
    let total: f64 = t.iter().sum();
    DiscreteJoint::from_row_slice(2, 2, &t.map(|v| v / total))
}

/// `x ln(1/x)` with `0 ln 0 = 0`.
fn plogp_neg(x: f64) -> f64 {
    if x > LOG_FLOOR {
        -x * x.ln()
    } else {
        0.0
    }
}

/// `H(Y) - P(U=0) H(Y|U=0) - P(U=1) H(Y|U=1)` in nats.
pub fn bsc_mi(joint: &BscJoint, flips: &FlipProbs) -> f64 {
    let [p00, p01, p10, p11] = cells(joint, &flips.to_array());
    let h_y = plogp_neg(p00 + p10) + plogp_neg(p01 + p11);
    let cond = |m: f64, y0: f64, y1: f64| {
        if m > LOG_FLOOR {
            m * (plogp_neg(y0 / m) + plogp_neg(y1 / m))
        } else {
            0.0
        }
    };
    let h_y_u = cond(joint.a + joint.b, p00, p01) + cond(joint.c + joint.d, p10, p11);
    (h_y - h_y_u).max(0.0)
}

/// Partial derivatives of [`bsc_mi`] with respect to `(p1, p2, p3, p4)`.
///
/// `dI/dp1 = a ln(P(Y=0) P(Y=1|U=0) / (P(Y=1) P(Y=0|U=0)))` and the
/// analogous expressions for the other cells. A component whose cost weight
/// is zero is exactly zero.
pub fn bsc_gradient(joint: &BscJoint, flips: &FlipProbs) -> Result<[f64; 4]> {
    let [p00, p01, p10, p11] = cells(joint, &flips.to_array());
    let (py0, py1) = (p00 + p10, p01 + p11);
    let w = joint.weights();
    let need =
        |v: f64, name: &'static str| if v > LOG_FLOOR { Ok(v.ln()) } else { Err(Error::GradientUndefined(name)) };
    let mut g = [0.0; 4];
    if w.iter().any(|x| *x > 0.0) {
        let ly = need(py0, "P(Y=0)")? - need(py1, "P(Y=1)")?;
        if w[0] > 0.0 || w[1] > 0.0 {
            let l0 = need(p01, "P(U=0,Y=1)")? - need(p00, "P(U=0,Y=0)")?;
            g[0] = w[0] * (ly + l0);
            g[1] = -w[1] * (ly + l0);
        }
        if w[2] > 0.0 || w[3] > 0.0 {
            let l1 = need(p11, "P(U=1,Y=1)")? - need(p10, "P(U=1,Y=0)")?;
            g[2] = w[2] * (ly + l1);
            g[3] = -w[3] * (ly + l1);
        }
    }
    Ok(g)
}

/// Gradient with log arguments floored, for use inside the descent loop where
/// an exact zero cell means an infinitely steep (but finite-valued) objective.
fn descent_gradient(joint: &BscJoint, p: &[f64; 4]) -> [f64; 4] {
    const FLOOR: f64 = 1e-15;
    let [p00, p01, p10, p11] = cells(joint, p).map(|v| v.max(FLOOR));
    let ly = (p00 + p10).ln() - (p01 + p11).ln();
    let l0 = p01.ln() - p00.ln();
    let l1 = p11.ln() - p10.ln();
    let w = joint.weights();
    [w[0] * (ly + l0), -w[1] * (ly + l0), w[2] * (ly + l1), -w[3] * (ly + l1)]
}

/// Euclidean projection onto `{p in [0,1]^4 : w.p <= eps}`, with coordinates
/// of zero weight pinned to 0.
pub fn project_feasible(joint: &BscJoint, eps: f64, p: &[f64; 4]) -> [f64; 4] {
    let w = joint.weights();
    let shifted = |mu: f64| {
        let mut out = [0.0; 4];
        for i in 0..4 {
            if w[i] > 0.0 {
                out[i] = (p[i] - mu * w[i]).clamp(0.0, 1.0);
            }
        }
        out
    };
    let base = shifted(0.0);
    if dot(&w, &base) <= eps {
        return base;
    }
    let mut hi = (0..4).filter(|&i| w[i] > 0.0).map(|i| p[i] / w[i]).fold(0.0, f64::max);
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dot(&w, &shifted(mid)) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    shifted(hi)
}

fn mi_at(joint: &BscJoint, p: &[f64; 4]) -> f64 {
    bsc_mi(joint, &FlipProbs::from_array(*p))
}

/// Projected gradient descent with backtracking from a single start.
fn descend(joint: &BscJoint, eps: f64, start: [f64; 4], max_iter: usize) -> [f64; 4] {
    let mut p = project_feasible(joint, eps, &start);
    let mut f = mi_at(joint, &p);
    let mut step = 1.0;
    for _ in 0..max_iter {
        if f <= 0.0 {
            break;
        }
        let g = descent_gradient(joint, &p);
        let mut accepted = None;
        while step > 1e-18 {
            let trial = project_feasible(
                joint,
                eps,
                &[p[0] - step * g[0], p[1] - step * g[1], p[2] - step * g[2], p[3] - step * g[3]],
            );
            let delta = [trial[0] - p[0], trial[1] - p[1], trial[2] - p[2], trial[3] - p[3]];
            let moved = dot(&delta, &delta);
            if moved == 0.0 {
                break;
            }
            let ft = mi_at(joint, &trial);
            if ft <= f + dot(&g, &delta) + moved / (2.0 * step) {
                accepted = Some((trial, ft, moved));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, ft, moved)) => {
                let gain = f - ft;
                p = trial;
                f = ft;
                if moved.sqrt() <= 1e-14 || (0.0..=1e-18).contains(&gain) {
                    break;
                }
                step = (step * 2.0).min(1e6);
            }
            None => break,
        }
    }
    p
}

fn starts(joint: &BscJoint, eps: f64) -> Vec<[f64; 4]> {
    let w = joint.weights();
    let scaled = |dir: [f64; 4]| {
        let cost = dot(&w, &dir);
        let t = if cost > 0.0 { (eps / cost).min(1.0) } else { 0.0 };
        dir.map(|v| v * t)
    };
    let mut out = vec![[0.0; 4]];
    for i in 0..4 {
        let mut e = [0.0; 4];
        e[i] = 1.0;
        out.push(scaled(e));
    }
    out.push(scaled([1.0; 4]));
    out.push(scaled([1.0, 0.0, 0.0, 1.0]));
    out.push(scaled([0.0, 1.0, 1.0, 0.0]));
    out
}

/// Minimizes `I(U;Y)` over flips with expected cost at most `eps`.
pub fn solve_bsc(joint: &BscJoint, eps: f64, cfg: &BscSolverConfig) -> Result<BscSolution> {
    solve_bsc_with_hints(joint, eps, cfg, &[])
}

/// [`solve_bsc`] with extra starting points (infeasible hints are projected).
pub fn solve_bsc_with_hints(
    joint: &BscJoint,
    eps: f64,
    cfg: &BscSolverConfig,
    hints: &[FlipProbs],
) -> Result<BscSolution> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {eps}")));
    }
    let seed = bsc_grid_oracle(joint, eps, cfg.seed_grid_resolution.max(2))?;
    let mut all = starts(joint, eps);
    all.push(seed.flips.to_array());
    all.extend(hints.iter().map(|h| h.to_array()));
    let results: Vec<([f64; 4], f64)> = all
        .par_iter()
        .map(|s| {
            let p = descend(joint, eps, *s, cfg.max_iter);
            (p, mi_at(joint, &p))
        })
        .collect();
    let mut best = (seed.flips.to_array(), seed.mi_nats);
    for (p, f) in results {
        if f < best.1 {
            best = (p, f);
        }
    }
    Ok(BscSolution::at(joint, best.0))
}

fn mesh(i: usize, resolution: usize) -> f64 {
    if i + 1 == resolution {
        1.0
    } else {
        i as f64 / (resolution - 1) as f64
    }
}

/// Exhaustive search over the `resolution^4` mesh of `[0,1]^4`, skipping
/// points over budget. Ties go to the first mesh point in `(p1, p2, p3, p4)`
/// lexicographic order.
pub fn bsc_grid_oracle(joint: &BscJoint, eps: f64, resolution: usize) -> Result<BscSolution> {
    if resolution < 2 {
        return Err(Error::InvalidInput("grid resolution must be at least 2".into()));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {eps}")));
    }
    let BscJoint { a, b, c, d } = *joint;
    let r = resolution;
    let cond = |m: f64, y0: f64, y1: f64| {
        if m > LOG_FLOOR {
            m * (plogp_neg(y0 / m) + plogp_neg(y1 / m))
        } else {
            0.0
        }
    };
    // (cost, P(u,Y=0), P(u,Y=1), m H(Y|U=u)) for each pair of flips of one source row
    let half = |w0: f64, w1: f64| -> Vec<(f64, f64, f64, f64)> {
        (0..r * r)
            .map(|idx| {
                let (q0, q1) = (mesh(idx / r, r), mesh(idx % r, r));
                let y0 = w0 * (1.0 - q0) + w1 * q1;
                let y1 = w0 * q0 + w1 * (1.0 - q1);
                (w0 * q0 + w1 * q1, y0, y1, cond(w0 + w1, y0, y1))
            })
            .collect()
    };
    let top = half(a, b);
    let bottom = half(c, d);
    let limit = eps + 1e-12;
    let best = top
        .par_iter()
        .enumerate()
        .filter(|(_, t)| t.0 <= limit)
        .filter_map(|(i, t)| {
            let mut row: Option<(f64, usize, usize)> = None;
            for (j, u) in bottom.iter().enumerate() {
                if t.0 + u.0 > limit {
                    continue;
                }
                let mi = plogp_neg(t.1 + u.1) + plogp_neg(t.2 + u.2) - t.3 - u.3;
                if row.is_none_or(|(v, _, _)| mi < v) {
                    row = Some((mi, i, j));
                }
            }
            row
        })
        .reduce_with(|x, y| if y.0 < x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) { y } else { x })
        .expect("the all-zero flip point is always feasible");
    let p = [mesh(best.1 / r, r), mesh(best.1 % r, r), mesh(best.2 / r, r), mesh(best.2 % r, r)];
    Ok(BscSolution::at(joint, p))
}
