use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values on a uniform `rows × cols` grid of `[0,1]²`, evaluated by bilinear
/// interpolation. Row index follows the first argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub values: Vec<Vec<f64>>,
}

impl Grid2 {
    pub fn validate(&self) -> Result<()> {
        let rows = self.values.len();
        if rows < 2 {
            return Err(Error::Model("tabulated grid needs at least 2 rows".into()));
        }
        let cols = self.values[0].len();
        if cols < 2 || self.values.iter().any(|r| r.len() != cols) {
            return Err(Error::Model("tabulated grid rows must share a length ≥ 2".into()));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Model("tabulated grid contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let rows = self.values.len();
        let cols = self.values[0].len();
        let (i0, tx) = locate(x, rows);
        let (j0, ty) = locate(y, cols);
        let v = &self.values;
        let top = v[i0][j0] * (1.0 - ty) + v[i0][j0 + 1] * ty;
        let bottom = v[i0 + 1][j0] * (1.0 - ty) + v[i0 + 1][j0 + 1] * ty;
        top * (1.0 - tx) + bottom * tx
    }
}

fn locate(x: f64, len: usize) -> (usize, f64) {
    let s = x.clamp(0.0, 1.0) * (len - 1) as f64;
    let i = (s.floor() as usize).min(len - 2);
    (i, s - i as f64)
}
