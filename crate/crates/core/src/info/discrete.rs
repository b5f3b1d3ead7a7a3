use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Probabilities at or below this are exact zeros under `0 log 0 = 0`.
pub(crate) const LOG_FLOOR: f64 = 1e-300;

/// Joint probability table of `(U, Y)` over finite alphabets, `table[(u, y)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    table: DMatrix<f64>,
}

impl DiscreteJoint {
    pub fn new(table: DMatrix<f64>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidInput("empty probability table".into()));
        }
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput("probabilities must be finite and nonnegative".into()));
        }
        let total = table.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { table })
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn table(&self) -> &DMatrix<f64> {
        &self.table
    }
}

/// `I(U;Y)` in nats from a joint table.
pub fn discrete_mi(joint: &DiscreteJoint) -> f64 {
    let t = joint.table();
    let pu: Vec<f64> = t.row_iter().map(|r| r.sum()).collect();
    let py: Vec<f64> = t.column_iter().map(|c| c.sum()).collect();
    let mut mi = 0.0;
    for (u, &pu_u) in pu.iter().enumerate() {
        for (y, &py_y) in py.iter().enumerate() {
            let p = t[(u, y)];
            if p > LOG_FLOOR {
                mi += p * (p / (pu_u * py_y)).ln();
            }
        }
    }
    mi.max(0.0)
}
