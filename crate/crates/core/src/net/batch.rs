use ndarray::Array2;

use crate::error::{config, Result};

/// Inputs and regression targets of one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    /// Noised states `x_t`, one row per example.
    pub x: Array2<f64>,
    /// Normalized times in `[0, 1]`.
    pub t: Vec<f64>,
    /// Prior component of each example.
    pub j: Vec<usize>,
    /// The noise `ε` the network should recover.
    pub target: Array2<f64>,
    /// Loss weights `ω_t`.
    pub weights: Vec<f64>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.x.nrows();
        if n == 0 {
            return config("empty training batch");
        }
        if self.target.dim() != self.x.dim() {
            return config(format!("target shape {:?} differs from input shape {:?}", self.target.dim(), self.x.dim()));
        }
        if self.weights.len() != n {
            return config(format!("{} loss weights for {n} examples", self.weights.len()));
        }
        Ok(())
    }
}
