use serde::{Deserialize, Serialize};

use super::{GradientSet, NoiseModel};
use crate::error::{config, Result};

/// Adaptive-moment optimizer state with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(model: &NoiseModel, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

/// One Adam update of `model` in place.
pub fn optimizer_step(model: &mut NoiseModel, grads: &GradientSet, state: &mut Adam) -> Result<()> {
    let g = grads.tensors();
    if g.len() != state.m.len() || g.iter().zip(&state.m).any(|(a, b)| a.len() != b.len()) {
        return config("gradient shapes do not match optimizer state");
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.eps);
    for (((p, g), m), v) in model.tensors_mut().into_iter().zip(g).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
