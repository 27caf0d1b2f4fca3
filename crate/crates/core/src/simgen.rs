//! Two-block Gaussian block model.
//!
//! Rows draw a class `u` from `p`, columns a class `v` from `q`, and entry
//! `(i, j)` is normal with mean `M[u][v]` and standard deviation
//! `Sigma[u][v]`. Three settings shift the means, the variances, or both.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matrix::{DataMatrix, ModelError};
use crate::rng;

/// Mean pattern shared by the mean-shift settings, before scaling by `b`.
pub const MEAN_PATTERN: [[f64; 2]; 2] = [[0.36, 0.90], [-0.58, -0.06]];
pub const DEFAULT_ROW_PROBS: [f64; 2] = [0.3, 0.7];
pub const DEFAULT_COL_PROBS: [f64; 2] = [0.2, 0.8];
const MAX_REGENERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// Different block means, unit variance.
    MeanShift,
    /// Zero means, inflated standard deviation on the diagonal blocks.
    VarianceShift,
    MeanAndVariance,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::MeanShift, Setting::VarianceShift, Setting::MeanAndVariance];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::MeanShift => "mean-shift",
            Setting::VarianceShift => "variance-shift",
            Setting::MeanAndVariance => "mean-and-variance",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean-shift" | "1" => Ok(Setting::MeanShift),
            "variance-shift" | "2" => Ok(Setting::VarianceShift),
            "mean-and-variance" | "3" => Ok(Setting::MeanAndVariance),
            other => Err(SimError::UnknownSetting(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("unknown setting {0:?} (expected mean-shift, variance-shift or mean-and-variance)")]
    UnknownSetting(String),
    #[error("invalid block model: {0}")]
    InvalidSpec(String),
    #[error("a class was missing after {0} regenerations")]
    MissingClass(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Block means and standard deviations for `setting` at signal level `b`.
pub fn block_matrices(setting: Setting, b: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let scaled = MEAN_PATTERN.map(|row| row.map(|v| b * v));
    let zero = [[0.0; 2]; 2];
    let unit = [[1.0; 2]; 2];
    let inflated = [[1.0 + b, 1.0], [1.0, 1.0 + b]];
    match setting {
        Setting::MeanShift => (scaled, unit),
        Setting::VarianceShift => (zero, inflated),
        Setting::MeanAndVariance => (scaled, inflated),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub n: usize,
    /// Aspect ratio; the matrix has `round(a * n)` columns.
    pub a: f64,
    pub b: f64,
    pub setting: Setting,
    pub p: [f64; 2],
    pub q: [f64; 2],
    pub seed: u64,
}

impl BlockModelSpec {
    pub fn new(setting: Setting, n: usize, a: f64, b: f64, seed: u64) -> Self {
        Self {
            n,
            a,
            b,
            setting,
            p: DEFAULT_ROW_PROBS,
            q: DEFAULT_COL_PROBS,
            seed,
        }
    }

    pub fn n_cols(&self) -> usize {
        (self.a * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidSpec(msg));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return bad(format!("a = {} must be positive", self.a));
        }
        if self.n_cols() < 2 {
            return bad(format!("round(a * n) = {} must be at least 2", self.n_cols()));
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return bad(format!("b = {} must be nonnegative", self.b));
        }
        for (name, probs) in [("p", self.p), ("q", self.q)] {
            if probs.iter().any(|&v| v.is_nan() || v <= 0.0) || (probs[0] + probs[1] - 1.0).abs() > 1e-12 {
                return bad(format!("{name} = {probs:?} must be positive and sum to 1"));
            }
        }
        Ok(())
    }
}

/// Generated matrix with its 1-based true row and column classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub x: DataMatrix,
    pub row_classes: Vec<usize>,
    pub col_classes: Vec<usize>,
}

fn draw_classes<R: Rng>(rng: &mut R, len: usize, first: f64) -> Vec<usize> {
    (0..len)
        .map(|_| if rng.random::<f64>() < first { 1 } else { 2 })
        .collect()
}

fn both_present(classes: &[usize]) -> bool {
    classes.contains(&1) && classes.contains(&2)
}

pub fn generate(spec: &BlockModelSpec) -> Result<LabeledMatrix, SimError> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.n_cols());
    let (means, sds) = block_matrices(spec.setting, spec.b);
    for attempt in 0..MAX_REGENERATIONS {
        let mut rng = rng::stream(spec.seed, &[attempt as u64]);
        let rows = draw_classes(&mut rng, n, spec.p[0]);
        let cols = draw_classes(&mut rng, m, spec.q[0]);
        if !(both_present(&rows) && both_present(&cols)) {
            continue;
        }
        let mut values = Vec::with_capacity(n * m);
        for &u in &rows {
            for &v in &cols {
                let z: f64 = rng.sample(StandardNormal);
                values.push(means[u - 1][v - 1] + sds[u - 1][v - 1] * z);
            }
        }
        return Ok(LabeledMatrix {
            x: DataMatrix::new(n, m, values)?,
            row_classes: rows,
            col_classes: cols,
        });
    }
    Err(SimError::MissingClass(MAX_REGENERATIONS))
}
