//! Softmax score matrices, the only model-side input to selection.

use crate::error::{Error, Result};
use crate::labels::{ClassId, ExampleId};

/// Rows whose sum is off by more than this are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// Rows closer to 1 than this are stored untouched, which keeps ingestion idempotent.
const RENORMALIZE_FLOOR: f64 = 1e-6;

/// `n x k` row-major matrix of per-example class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    k: usize,
    data: Vec<f32>,
}

impl ScoreMatrix {
    /// Validates and (if needed) renormalizes `data`.
    ///
    /// Every entry must be finite and within `[0, 1]`, and each row must sum to 1
    /// within [`ROW_SUM_TOLERANCE`].
    pub fn new(n: usize, k: usize, mut data: Vec<f32>) -> Result<Self> {
        if n == 0 {
            return Err(Error::format("score matrix needs at least one row"));
        }
        if k < 2 {
            return Err(Error::format(format!("score matrix needs K >= 2, got {k}")));
        }
        let expected = n
            .checked_mul(k)
            .ok_or_else(|| Error::format("score matrix dimensions overflow"))?;
        if data.len() != expected {
            return Err(Error::format(format!(
                "score matrix has {} values, expected N*K = {expected}",
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact_mut(k).enumerate() {
            let mut sum = 0.0f64;
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::format(format!(
                        "row {i} class {c}: probability {v} outside [0, 1]"
                    )));
                }
                sum += f64::from(v);
            }
            let off = (sum - 1.0).abs();
            if off > ROW_SUM_TOLERANCE {
                return Err(Error::format(format!(
                    "row {i} sums to {sum:.6}, outside 1 +/- {ROW_SUM_TOLERANCE}"
                )));
            }
            if off > RENORMALIZE_FLOOR {
                for v in row.iter_mut() {
                    *v = (f64::from(*v) / sum) as f32;
                }
            }
        }
        Ok(Self { n, k, data })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let k = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * k);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != k {
                return Err(Error::format(format!(
                    "row {i} has {} entries, expected {k}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), k, data)
    }

    /// Binary matrix from out-of-distribution probabilities: column 1 gets `p`, column 0 gets `1 - p`.
    pub fn from_binary_ood(p_ood: &[f32]) -> Result<Self> {
        let mut data = Vec::with_capacity(p_ood.len() * 2);
        for &p in p_ood {
            data.push(1.0 - p);
            data.push(p);
        }
        Self::new(p_ood.len(), 2, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.k)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Predicted class per example; ties go to the smaller class id.
    pub fn argmax(&self) -> Vec<ClassId> {
        self.rows()
            .map(|row| {
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                ClassId(best)
            })
            .collect()
    }

    pub fn prob(&self, id: ExampleId, class: ClassId) -> f32 {
        self.data[id.0 * self.k + class.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rows() {
        assert!(ScoreMatrix::from_rows(&[[0.5f32, 0.6]]).is_err());
        assert!(ScoreMatrix::from_rows(&[[1.2f32, -0.2]]).is_err());
        assert!(ScoreMatrix::from_rows(&[[f32::NAN, 1.0]]).is_err());
        assert!(ScoreMatrix::from_rows(&[[1.0f32]]).is_err());
        assert!(ScoreMatrix::new(0, 2, vec![]).is_err());
        assert!(ScoreMatrix::new(2, 2, vec![0.5; 3]).is_err());
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let s = ScoreMatrix::from_rows(&[[0.50004f32, 0.5]]).unwrap();
        let sum: f64 = s.row(0).iter().map(|&v| f64::from(v)).sum();
        assert!((sum - 1.0).abs() < 1e-6);
        // ingestion is idempotent
        let again = ScoreMatrix::new(1, 2, s.as_slice().to_vec()).unwrap();
        assert_eq!(again.as_slice(), s.as_slice());
    }

    #[test]
    fn argmax_prefers_smaller_class_on_tie() {
        let s = ScoreMatrix::from_rows(&[[0.5f32, 0.5], [0.2, 0.8]]).unwrap();
        assert_eq!(s.argmax(), vec![ClassId(0), ClassId(1)]);
    }
}
