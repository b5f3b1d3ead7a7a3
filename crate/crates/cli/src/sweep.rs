//! Parameter sweeps over the solvers, one job per independent series.
//!
//! Jobs run on a bounded pool and their rows are reassembled in job order,
//! and random draws come from a stream keyed by the grid cell, so the output
//! does not depend on the number of workers.

use std::io::Write;
use std::time::Instant;

use miattack_core::bsc::{bsc_grid_oracle, kkt_report, solve_bsc_with_hints, BscJoint, BscSolverConfig, FlipProbs};
use miattack_core::projection::{falling_bar, min_mi_from_spectrum, waterfill_bisect_oracle, ProjectionProblem};
use miattack_core::scalar::{grid_oracle, solve_with_hints, ScalarProblem, ScalarSolverConfig};
use miattack_core::{nats_to_bits, RngStream};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{SweepConfig, SweepKind};
use crate::error::{CliError, Result};
use crate::format::sig12;

/// Tolerance handed to the KKT check in binary sweeps.
const KKT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Missing,
}

impl Cell {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Self::Int(v) => Some(v as f64),
            Self::Real(v) => Some(v),
            Self::Missing => None,
        }
    }

    fn render(self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Real(v) => sig12(v),
            Self::Missing => "na".into(),
        }
    }
}

/// One grid cell: swept parameters, the minimal information, solution
/// details and solver metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<Cell>,
    pub mi_nats: f64,
    pub details: Vec<Cell>,
    /// Brute-force minimum minus the solver's minimum, when computed.
    pub oracle_gap: Option<f64>,
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub solver: &'static str,
    pub param_names: Vec<&'static str>,
    pub detail_names: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Value of a named column in `row`.
    pub fn get(&self, row: &SweepRow, name: &str) -> Option<f64> {
        if name == "mi_nats" {
            return Some(row.mi_nats);
        }
        if name == "oracle_gap" {
            return row.oracle_gap;
        }
        if let Some(i) = self.param_names.iter().position(|n| *n == name) {
            return row.params[i].as_f64();
        }
        let i = self.detail_names.iter().position(|n| *n == name)?;
        row.details[i].as_f64()
    }

    pub fn header(&self, bits: bool) -> Vec<String> {
        let mut h: Vec<String> = self.param_names.iter().map(|s| s.to_string()).collect();
        h.push("mi_nats".into());
        if bits {
            h.push("mi_bits".into());
        }
        h.extend(self.detail_names.iter().map(|s| s.to_string()));
        h.push("solver".into());
        h.push("oracle_gap".into());
        if self.rows.iter().any(|r| r.runtime_ms.is_some()) {
            h.push("runtime_ms".into());
        }
        h
    }

    /// Header plus one record per row, LF-terminated.
    pub fn write_csv<W: Write>(&self, out: W, bits: bool) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.header(bits))?;
        let timing = self.rows.iter().any(|r| r.runtime_ms.is_some());
        for r in &self.rows {
            let mut rec: Vec<String> = r.params.iter().map(|c| c.render()).collect();
            rec.push(sig12(r.mi_nats));
            if bits {
                rec.push(sig12(nats_to_bits(r.mi_nats)));
            }
            rec.extend(r.details.iter().map(|c| c.render()));
            rec.push(self.solver.into());
            rec.push(r.oracle_gap.map_or("na".into(), sig12));
            if timing {
                rec.push(r.runtime_ms.map_or("na".into(), sig12));
            }
            w.write_record(&rec)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self, bits: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, bits).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Runs the sweep described by `cfg` on at most `jobs` worker threads.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Result<SweepTable> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| match cfg.kind {
        SweepKind::Scalar => run_scalar_sweep(cfg),
        SweepKind::Projection => run_projection_sweep(cfg),
        SweepKind::Bsc => run_bsc_sweep(cfg),
    })
}

fn elapsed_ms(t: Instant, timing: bool) -> Option<f64> {
    timing.then(|| t.elapsed().as_secs_f64() * 1e3)
}

fn collect_jobs<J: Sync, F>(jobs: &[J], f: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&J) -> Result<Vec<SweepRow>> + Sync + Send,
{
    let per_job: Vec<Result<Vec<SweepRow>>> = jobs.par_iter().map(f).collect();
    let mut rows = Vec::new();
    for r in per_job {
        rows.extend(r?);
    }
    Ok(rows)
}

/// One `(a2, sigma2)` series per job, warm-started along ascending `D`.
pub fn run_scalar_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    let solver_cfg = ScalarSolverConfig { grid_resolution: cfg.grid, ..ScalarSolverConfig::default() };
    let series: Vec<(f64, f64)> = cfg.a2.iter().flat_map(|&a2| cfg.sigma2.iter().map(move |&s2| (a2, s2))).collect();
    let rows = collect_jobs(&series, |&(a2, sigma2)| {
        let mut rows = Vec::with_capacity(cfg.d.len());
        let mut prev: Option<(f64, f64)> = None;
        for &d in &cfg.d {
            let t = Instant::now();
            let p = ScalarProblem::new(a2, sigma2, d)?;
            let s = solve_with_hints(&p, &solver_cfg, prev.as_slice())?;
            let runtime_ms = elapsed_ms(t, cfg.timing);
            prev = Some((s.x, s.y));
            let oracle_gap =
                if cfg.oracle_grid >= 2 { Some(grid_oracle(&p, cfg.oracle_grid)?.mi_nats - s.mi_nats) } else { None };
            rows.push(SweepRow {
                params: vec![Cell::Real(a2), Cell::Real(sigma2), Cell::Real(d)],
                mi_nats: s.mi_nats,
                details: vec![Cell::Real(s.x), Cell::Real(s.y), Cell::Real(s.ratio)],
                oracle_gap,
                runtime_ms,
            });
        }
        Ok(rows)
    })?;
    Ok(SweepTable {
        kind: SweepKind::Scalar,
        solver: "grid+simplex",
        param_names: vec!["a2", "sigma2", "D"],
        detail_names: vec!["x", "y", "ratio"],
        rows,
    })
}

/// `n x m` matrix with i.i.d. `N(0, 1/m)` entries.
pub fn random_projection(n: usize, m: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let sd = (1.0 / m as f64).sqrt();
    DMatrix::from_fn(n, m, |_, _| sd * rng.standard_normal())
}

/// Rows of a projection matrix for ratio `alpha`, at least one.
pub fn projection_rows(m: usize, alpha: f64) -> usize {
    ((alpha * m as f64).round() as usize).max(1)
}

/// One `(m, alpha, seed)` draw of `H` per job; every budget reuses its spectrum.
pub fn run_projection_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    let mut jobs = Vec::new();
    for (mi, &m) in cfg.m.iter().enumerate() {
        for (ai, &alpha) in cfg.alpha.iter().enumerate() {
            let cell = (mi * cfg.alpha.len() + ai) as u64;
            for &seed in &cfg.seeds {
                jobs.push((m, alpha, seed, cell));
            }
        }
    }
    let rows = collect_jobs(&jobs, |&(m, alpha, seed, cell)| {
        let t = Instant::now();
        let n = projection_rows(m, alpha);
        let mut rng = RngStream::new(seed, cell);
        let h = random_projection(n, m, &mut rng);
        let sigma_sq = ProjectionProblem::new(h, 0.0)?.component_variances()?;
        let total: f64 = sigma_sq.iter().sum();
        let spectrum_ms = elapsed_ms(t, cfg.timing);
        let budgets = cfg.d_fractions.iter().map(|f| f * total).chain(cfg.d_absolute.iter().copied());
        budgets
            .map(|d| {
                let t = Instant::now();
                let mi = min_mi_from_spectrum(&sigma_sq, d)?;
                let oracle_gap = if d < total && mi > 0.0 {
                    let fb = falling_bar(&sigma_sq, d)?.mutual_information();
                    let bi = waterfill_bisect_oracle(&sigma_sq, d, 1e-13)?.mutual_information();
                    (bi - fb).abs()
                } else {
                    0.0
                };
                Ok(SweepRow {
                    params: vec![
                        Cell::Int(m as u64),
                        Cell::Real(alpha),
                        Cell::Int(n as u64),
                        Cell::Int(seed),
                        Cell::Real(d / total),
                        Cell::Real(d),
                    ],
                    mi_nats: mi,
                    details: vec![Cell::Real(total), Cell::Int(sigma_sq.len() as u64)],
                    oracle_gap: Some(oracle_gap),
                    runtime_ms: elapsed_ms(t, cfg.timing).zip(spectrum_ms).map(|(a, b)| a + b),
                })
            })
            .collect()
    })?;
    Ok(SweepTable {
        kind: SweepKind::Projection,
        solver: "falling-bar",
        param_names: vec!["m", "alpha", "n", "seed", "d_fraction", "D"],
        detail_names: vec!["sum_sigma_sq", "rank"],
        rows,
    })
}

/// One joint per job, warm-started along ascending `eps`.
pub fn run_bsc_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    let solver_cfg = BscSolverConfig::default();
    let rows = collect_jobs(&cfg.joints, |w| {
        let joint = BscJoint::new(w[0], w[1], w[2], w[3])?;
        let mut rows = Vec::with_capacity(cfg.eps.len());
        let mut prev: Option<FlipProbs> = None;
        for &eps in &cfg.eps {
            let t = Instant::now();
            let s = solve_bsc_with_hints(&joint, eps, &solver_cfg, prev.as_slice())?;
            let runtime_ms = elapsed_ms(t, cfg.timing);
            prev = Some(s.flips);
            let kkt = kkt_report(&joint, eps, &s.flips, KKT_TOL).ok();
            let oracle_gap = if cfg.oracle_grid >= 2 {
                Some(bsc_grid_oracle(&joint, eps, cfg.oracle_grid)?.mi_nats - s.mi_nats)
            } else {
                None
            };
            let mut details: Vec<Cell> = s.flips.to_array().into_iter().map(Cell::Real).collect();
            details.push(Cell::Real(s.cost));
            match &kkt {
                Some(k) => {
                    details.push(Cell::Real(k.lambda_star));
                    details.push(Cell::Real(k.max_stationarity_residual()));
                    details.push(Cell::Real(k.complementary_slackness_residual));
                    details.push(k.ratio_equality_residual.map_or(Cell::Missing, Cell::Real));
                }
                None => details.extend([Cell::Missing; 4]),
            }
            rows.push(SweepRow {
                params: vec![
                    Cell::Real(joint.a),
                    Cell::Real(joint.b),
                    Cell::Real(joint.c),
                    Cell::Real(joint.d),
                    Cell::Real(eps),
                ],
                mi_nats: s.mi_nats,
                details,
                oracle_gap,
                runtime_ms,
            });
        }
        Ok(rows)
    })?;
    Ok(SweepTable {
        kind: SweepKind::Bsc,
        solver: "projected-gradient",
        param_names: vec!["a", "b", "c", "d", "eps"],
        detail_names: vec![
            "p1",
            "p2",
            "p3",
            "p4",
            "cost",
            "lambda_star",
            "stationarity_residual",
            "slackness_residual",
            "ratio_residual",
        ],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_cfg(a2: &[f64], sigma2: &[f64], d: &[f64]) -> SweepConfig {
        let mut c = SweepConfig::custom(SweepKind::Scalar);
        c.a2 = a2.to_vec();
        c.sigma2 = sigma2.to_vec();
        c.d = d.to_vec();
        c
    }

    #[test]
    fn single_scalar_cell_is_closed_form() {
        let t = run_sweep(&scalar_cfg(&[1.0], &[1.0], &[0.0]), 1).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!((t.rows[0].mi_nats - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(
            t.to_csv_string(false),
            "a2,sigma2,D,mi_nats,x,y,ratio,solver,oracle_gap\n1,1,0,0.34657359028,0,0,0.5,grid+simplex,na\n"
        );
    }

    #[test]
    fn scalar_series_is_nonincreasing() {
        let t = run_sweep(&scalar_cfg(&[0.75], &[0.1, 1.0], &[0.1, 0.4, 0.7, 1.0]), 2).unwrap();
        assert_eq!(t.rows.len(), 8);
        for pair in t.rows.chunks(4) {
            assert!(pair.windows(2).all(|w| w[1].mi_nats <= w[0].mi_nats + 1e-6));
        }
    }

    #[test]
    fn saturated_projection_rows_are_exactly_zero() {
        let mut c = SweepConfig::custom(SweepKind::Projection);
        c.m = vec![50];
        c.alpha = vec![0.5];
        c.d_fractions = vec![0.5, 1.0];
        let t = run_sweep(&c, 1).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0].mi_nats > 0.0);
        assert_eq!(t.rows[1].mi_nats, 0.0);
        assert_eq!(t.get(&t.rows[0], "n"), Some(25.0));
        assert_eq!(t.get(&t.rows[1], "rank"), Some(25.0));
    }

    #[test]
    fn bsc_rows_follow_hand_values() {
        let mut c = SweepConfig::custom(SweepKind::Bsc);
        c.joints = vec![[0.45, 0.05, 0.05, 0.45], [0.25; 4]];
        c.eps = vec![0.0, 0.1];
        let t = run_sweep(&c, 2).unwrap();
        let expected = 2f64.ln() - (-(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln()));
        assert!((t.rows[0].mi_nats - expected).abs() < 1e-9);
        assert!(t.rows[1].mi_nats < t.rows[0].mi_nats);
        assert!(t.rows[2..].iter().all(|r| r.mi_nats == 0.0));
        assert_eq!(t.header(true)[5..7], ["mi_nats".to_string(), "mi_bits".to_string()]);
    }

    #[test]
    fn timing_adds_a_column() {
        let mut c = scalar_cfg(&[1.0], &[1.0], &[0.5]);
        c.timing = true;
        let t = run_sweep(&c, 1).unwrap();
        assert_eq!(t.header(false).last().unwrap(), "runtime_ms");
    }
}
