//! Per-coordinate standardization, fitted on the training split only and
//! pooled over all examples and timesteps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FeatureSequence;

/// Standard deviations below this are treated as constant columns.
pub const STD_FLOOR: f64 = 1e-8;

/// Fitted per-dimension mean and (floored) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Identity transform of dimension `d`.
    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Metadata {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Metadata {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Kahan-compensated accumulator.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Pool every row of every sequence and fit per-dimension mean/std
/// (population). Constant dimensions get the floor; [`apply_standardizer`]
/// maps them to exactly 0.
pub fn fit_standardizer(seqs: &[FeatureSequence]) -> Result<Standardizer> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::Invalid("cannot fit a standardizer on an empty set".into()))?;
    let d = first.matrix.ncols();
    let mut n = 0usize;
    let mut sums = vec![Kahan::default(); d];
    for seq in seqs {
        if seq.matrix.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "sequence `{}` has {} dims, expected {d}",
                seq.cycle_id,
                seq.matrix.ncols()
            )));
        }
        for row in seq.matrix.rows() {
            n += 1;
            for (acc, &x) in sums.iter_mut().zip(row.iter()) {
                acc.add(x);
            }
        }
    }
    if n == 0 {
        return Err(Error::Invalid("no rows to fit a standardizer on".into()));
    }
    let mean: Vec<f64> = sums.iter().map(|k| k.sum / n as f64).collect();

    let mut sq = vec![Kahan::default(); d];
    for seq in seqs {
        for row in seq.matrix.rows() {
            for ((acc, &x), &m) in sq.iter_mut().zip(row.iter()).zip(mean.iter()) {
                let dx = x - m;
                acc.add(dx * dx);
            }
        }
    }
    let std: Vec<f64> = sq
        .iter()
        .map(|k| (k.sum / n as f64).sqrt().max(STD_FLOOR))
        .collect();

    Ok(Standardizer { mean, std })
}

/// Transform one sequence: `(x − mean)/std` per coordinate; constant
/// coordinates (std at the floor) map to exactly 0. Labels and ids pass
/// through unchanged.
pub fn apply_standardizer(s: &Standardizer, seq: &FeatureSequence) -> Result<FeatureSequence> {
    if seq.matrix.ncols() != s.dimension() {
        return Err(Error::ShapeMismatch(format!(
            "sequence `{}` has {} dims, standardizer has {}",
            seq.cycle_id,
            seq.matrix.ncols(),
            s.dimension()
        )));
    }
    let scale: Vec<f64> = s
        .std
        .iter()
        .map(|&sd| if sd <= STD_FLOOR { 0.0 } else { 1.0 / sd })
        .collect();
    let mut matrix = seq.matrix.clone();
    for mut row in matrix.rows_mut() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - s.mean[j]) * scale[j];
        }
    }
    Ok(FeatureSequence {
        matrix,
        ..seq.clone()
    })
}

/// Convenience: apply to a whole set.
pub fn apply_all(s: &Standardizer, seqs: &[FeatureSequence]) -> Result<Vec<FeatureSequence>> {
    seqs.iter().map(|q| apply_standardizer(s, q)).collect()
}
