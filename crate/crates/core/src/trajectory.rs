use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scale {
    Ibm,
    Ode,
    Ou,
    Kinetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryMeta {
    pub scale: Scale,
    pub seed: Option<u64>,
    pub params_digest: String,
    /// Carrying capacity for IBM paths; abundances are stored as counts/K.
    pub carrying_capacity: Option<u64>,
}

/// Time-stamped abundance vectors `(P_1..P_n, A_1..A_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub m: usize,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(n: usize, m: usize, meta: TrajectoryMeta) -> Self {
        Self { n, m, times: Vec::new(), values: Vec::new(), meta }
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) -> Result<()> {
        if row.len() != self.n + self.m {
            return Err(Error::Internal(format!("row of length {} in a {}+{} trajectory", row.len(), self.n, self.m)));
        }
        if self.times.last().is_some_and(|&last| t <= last) {
            return Err(Error::Internal(format!("trajectory time {t} is not increasing")));
        }
        self.times.push(t);
        self.values.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn plants(&self, k: usize) -> &[f64] {
        &self.values[k][..self.n]
    }

    pub fn pollinators(&self, k: usize) -> &[f64] {
        &self.values[k][self.n..]
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.values.last().map(Vec::as_slice)
    }

    /// Linear interpolation in time, clamped to the first/last sample.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0].clone();
        }
        if k == self.times.len() {
            return self.values[k - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1]
            .iter()
            .zip(&self.values[k])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    pub fn header(&self) -> String {
        let mut h = String::from("t");
        for i in 1..=self.n {
            let _ = write!(h, ",P_{i}");
        }
        for j in 1..=self.m {
            let _ = write!(h, ",A_{j}");
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.values) {
            let _ = write!(out, "{t}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// JSON sidecar with everything except the samples.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "m": self.m,
            "samples": self.times.len(),
            "tStart": self.times.first(),
            "tEnd": self.times.last(),
            "meta": self.meta,
        })
    }
}

/// SHA-256 of the canonical JSON form of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).unwrap_or_default();
    hex::encode(Sha256::digest(&json))
}
