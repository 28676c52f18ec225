//! Per-frame token log-probabilities produced by a CTC acoustic model.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmissionError {
    #[error("emission data holds {got} values, expected {frames} x {vocab_size}")]
    ShapeMismatch {
        frames: usize,
        vocab_size: usize,
        got: usize,
    },
    #[error("non-finite log-probability at frame {frame}, token {token}")]
    NonFinite { frame: usize, token: usize },
    #[error("frame {frame} probabilities sum to {sum:.6}, expected 1 within {tolerance}")]
    Unnormalized {
        frame: usize,
        sum: f64,
        tolerance: f64,
    },
}

/// Row-sum tolerance used by [`EmissionMatrix::check_normalized`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

/// A `frames x vocab_size` row-major matrix of natural-log probabilities.
///
/// Values are kept as `f32` so that binary files round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    frames: usize,
    vocab_size: usize,
    logp: Vec<f32>,
}

impl EmissionMatrix {
    pub fn new(frames: usize, vocab_size: usize, logp: Vec<f32>) -> Result<Self, EmissionError> {
        if frames.checked_mul(vocab_size) != Some(logp.len()) {
            return Err(EmissionError::ShapeMismatch {
                frames,
                vocab_size,
                got: logp.len(),
            });
        }
        Ok(Self {
            frames,
            vocab_size,
            logp,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, EmissionError> {
        let vocab_size = rows.first().map_or(0, Vec::len);
        let mut logp = Vec::with_capacity(rows.len() * vocab_size);
        for row in rows {
            if row.len() != vocab_size {
                return Err(EmissionError::ShapeMismatch {
                    frames: rows.len(),
                    vocab_size,
                    got: row.len(),
                });
            }
            logp.extend_from_slice(row);
        }
        Self::new(rows.len(), vocab_size, logp)
    }

    /// Builds a matrix from f64 rows, rounding to f32.
    pub fn from_rows_f64(rows: &[Vec<f64>]) -> Result<Self, EmissionError> {
        let rows: Vec<Vec<f32>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| x as f32).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.logp[t * self.vocab_size..(t + 1) * self.vocab_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        // chunks_exact panics on a zero chunk size
        self.logp.chunks_exact(self.vocab_size.max(1))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.logp
    }

    pub fn check_finite(&self) -> Result<(), EmissionError> {
        match self.logp.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(EmissionError::NonFinite {
                frame: i / self.vocab_size,
                token: i % self.vocab_size,
            }),
            None => Ok(()),
        }
    }

    /// Checks that every row exponentiates to a distribution.
    pub fn check_normalized(&self) -> Result<(), EmissionError> {
        for (frame, row) in self.rows().enumerate() {
            let sum: f64 = row.iter().map(|&x| (x as f64).exp()).sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(EmissionError::Unnormalized {
                    frame,
                    sum,
                    tolerance: NORMALIZATION_TOLERANCE,
                });
            }
        }
        Ok(())
    }
}

/// Numerically stable `ln(e^a + e^b)`; exact when either side is `-inf`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-softmax of a row of unnormalized scores.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|&s| s - norm).collect()
}
