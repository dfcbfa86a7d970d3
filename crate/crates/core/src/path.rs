//! Piecewise-linear MSE paths and rate tuples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Breakpoints x_0 = 1 ... x_n = 0 of a monotone path in [0,1]^K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MsePath {
    breakpoints: Vec<Vec<f64>>,
}

impl MsePath {
    /// Repeated consecutive breakpoints are merged.
    pub fn new(mut breakpoints: Vec<Vec<f64>>) -> Result<Self> {
        validate_path(&breakpoints)?;
        breakpoints.dedup();
        Ok(Self { breakpoints })
    }

    pub fn breakpoints(&self) -> &[Vec<f64>] {
        &self.breakpoints
    }

    pub fn k(&self) -> usize {
        self.breakpoints[0].len()
    }

    pub fn n_segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.breakpoints
            .windows(2)
            .map(|w| (w[0].as_slice(), w[1].as_slice()))
    }

    /// Point at arc parameter t in [0, n_segments].
    pub fn point(&self, t: f64) -> Vec<f64> {
        let n = self.n_segments();
        let t = t.clamp(0.0, n as f64);
        let i = (t.floor() as usize).min(n - 1);
        let s = t - i as f64;
        let (a, b) = (&self.breakpoints[i], &self.breakpoints[i + 1]);
        a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for MsePath {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MsePath> for Vec<Vec<f64>> {
    fn from(p: MsePath) -> Self {
        p.breakpoints
    }
}

fn violation(index: usize, coord: usize, msg: impl Into<String>) -> Error {
    Error::InvalidPath {
        index,
        coord,
        msg: msg.into(),
    }
}

/// Checks endpoints, bounds and coordinate-wise monotonicity. Returns the first
/// violation found.
pub fn validate_path(bps: &[Vec<f64>]) -> Result<()> {
    if bps.len() < 2 {
        return Err(violation(0, 0, "need at least two breakpoints"));
    }
    let k = bps[0].len();
    if k == 0 {
        return Err(violation(0, 0, "zero-dimensional breakpoint"));
    }
    for (i, x) in bps.iter().enumerate() {
        if x.len() != k {
            return Err(violation(
                i,
                0,
                format!("dimension {} differs from {k}", x.len()),
            ));
        }
        for (c, &v) in x.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(violation(i, c, format!("value {v} outside [0,1]")));
            }
        }
    }
    if let Some(c) = bps[0].iter().position(|&v| v != 1.0) {
        return Err(violation(0, c, "first breakpoint must be all ones"));
    }
    let last = bps.len() - 1;
    if let Some(c) = bps[last].iter().position(|&v| v != 0.0) {
        return Err(violation(last, c, "last breakpoint must be all zeros"));
    }
    for i in 1..bps.len() {
        for c in 0..k {
            if bps[i][c] > bps[i - 1][c] {
                return Err(violation(
                    i,
                    c,
                    format!("increases from {} to {}", bps[i - 1][c], bps[i][c]),
                ));
            }
        }
    }
    Ok(())
}

/// Per-user rates in bits per channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTuple {
    pub rates: Vec<f64>,
}

impl RateTuple {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        for (k, &r) in rates.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Domain(format!(
                    "rate[{k}] = {r} must be nonnegative"
                )));
            }
        }
        Ok(Self { rates })
    }

    pub fn sum(&self) -> f64 {
        self.rates.iter().sum()
    }
}
