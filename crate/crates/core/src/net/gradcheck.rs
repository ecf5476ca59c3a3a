use rand::Rng as _;

use super::{GradientSet, NoiseModel, TrainingBatch};
use crate::error::{config, Result};
use crate::rng::{self, Stream};

/// Models with at most this many parameters are checked on every coordinate.
const EXHAUSTIVE_LIMIT: usize = 4096;
/// Coordinates drawn when the model is larger than [`EXHAUSTIVE_LIMIT`].
const SAMPLED_COORDS: usize = 256;
/// Denominator floor of the relative error, so that gradients at round-off
/// level compare absolutely.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// `(tensor, offset)` of the worst coordinate.
    pub worst: (usize, usize),
}

/// Compares [`NoiseModel::loss_and_grad`] with central differences.
pub fn grad_check(model: &NoiseModel, batch: &TrainingBatch, h: f64) -> Result<GradCheckReport> {
    let (_, grads) = model.loss_and_grad(batch)?;
    grad_check_with(model, batch, &grads, h)
}

/// Compares a supplied gradient with central differences of the loss.
pub fn grad_check_with(model: &NoiseModel, batch: &TrainingBatch, grads: &GradientSet, h: f64) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return config(format!("finite-difference step must be positive, got {h}"));
    }
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let coords: Vec<(usize, usize)> = if total <= EXHAUSTIVE_LIMIT {
        sizes.iter().enumerate().flat_map(|(k, &n)| (0..n).map(move |i| (k, i))).collect()
    } else {
        let mut rng = rng::substream(0, Stream::Init);
        (0..SAMPLED_COORDS)
            .map(|_| {
                let mut flat = rng.random_range(0..total);
                let mut k = 0;
                while flat >= sizes[k] {
                    flat -= sizes[k];
                    k += 1;
                }
                (k, flat)
            })
            .collect()
    };

    let analytic = grads.tensors();
    let mut probe = model.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, coordinates: coords.len(), worst: (0, 0) };
    for &(k, i) in &coords {
        let orig = probe.tensors()[k][i];
        probe.tensors_mut()[k][i] = orig + h;
        let up = probe.loss(batch)?;
        probe.tensors_mut()[k][i] = orig - h;
        let down = probe.loss(batch)?;
        probe.tensors_mut()[k][i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k][i];
        let diff = (a - numeric).abs();
        let err = if diff == 0.0 { 0.0 } else { diff / a.abs().max(numeric.abs()).max(REL_FLOOR) };
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = (k, i);
        }
    }
    Ok(report)
}
