//! Training loops for the mixed DDPM and mixed SGM objectives.
//!
//! Each step draws a minibatch, dispatches every `x₀` to its nearest center,
//! noises it towards that center and regresses the network onto the injected
//! noise. A prior with one center at the origin and unit variance is exactly
//! the classical objective, drawing the same random numbers.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::error::{config, Error, Result};
use crate::net::{optimizer_step, Adam, NoiseModel, TrainingBatch};
use crate::prior::{Assignment, MixturePrior};
use crate::rng::{self, Rng, Stream};
use crate::schedules::{DiscreteSchedule, SdeSchedule, T_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    MixDdpm,
    MixSgm,
    /// Mixed SGM whose noise is scaled by the dispatched component's
    /// standard deviation.
    MixSgmVar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Constant loss weight `ω_t`.
    pub omega: f64,
}

impl TrainConfig {
    pub fn new(kind: ModelKind, steps: usize, seed: u64) -> Self {
        Self { kind, steps, batch_size: 32, seed, learning_rate: 1e-3, omega: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return config("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return config(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return config(format!("loss weight must be positive, got {}", self.omega));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub losses: Vec<f64>,
}

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, l).expect("write to string");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Median of `losses[range]`, ignoring an empty range.
    pub fn median(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let mut v = self.losses.get(range)?.to_vec();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
    }
}

/// `√ᾱ_t (x₀ − c_j) + c_j + √(1 − ᾱ_t) ε`, evaluated as
/// `√ᾱ_t x₀ + (1 − √ᾱ_t) c_j + √(1 − ᾱ_t) ε` so both endpoints are exact.
pub fn make_xt_ddpm(x0: &[f64], c_j: &[f64], eps: &[f64], abar_t: f64) -> Vec<f64> {
    let (a, s) = (abar_t.sqrt(), (1.0 - abar_t).sqrt());
    x0.iter().zip(c_j).zip(eps).map(|((x, c), e)| a * x + (1.0 - a) * c + s * e).collect()
}

/// `α_t x₀ + c_j + σ_t σ_j ε`.
pub fn make_xt_sgm(x0: &[f64], c_j: &[f64], eps: &[f64], alpha_t: f64, sigma_t: f64, sigma_j: f64) -> Vec<f64> {
    x0.iter().zip(c_j).zip(eps).map(|((x, c), e)| alpha_t * x + c + sigma_t * sigma_j * e).collect()
}

/// Minibatch indices from successive random permutations of `0..n`; a batch
/// that runs past the end of one permutation continues into the next.
struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        Self { order: (0..n).collect(), pos: n, rng: rng::substream(seed, Stream::Shuffle) }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn check_shapes(data: &SampleSet, prior: &MixturePrior, model: &NoiseModel) -> Result<()> {
    if data.is_empty() {
        return config("training data is empty");
    }
    if prior.dim != data.dim() {
        return config(format!("prior dimension {} differs from data dimension {}", prior.dim, data.dim()));
    }
    let nc = model.config();
    if nc.dim != data.dim() || nc.num_centers != prior.k() {
        return config(format!(
            "model expects dim {} with {} centers, prior has dim {} with {} centers",
            nc.dim,
            nc.num_centers,
            prior.dim,
            prior.k()
        ));
    }
    Ok(())
}

/// Shared loop: `noised(x0, c_j, σ_j, ε, rng_time)` returns `(x_t, τ)`.
fn run_loop<F>(
    data: &SampleSet,
    prior: &MixturePrior,
    mut model: NoiseModel,
    cfg: &TrainConfig,
    mut noised: F,
) -> Result<(NoiseModel, LossTrace)>
where
    F: FnMut(&[f64], &[f64], f64, &[f64], &mut Rng) -> (Vec<f64>, f64),
{
    cfg.validate()?;
    check_shapes(data, prior, &model)?;
    let assignment = Assignment::dispatch_all(data, &prior.centers)?;
    let d = data.dim();
    let mut sampler = BatchSampler::new(data.len(), cfg.seed);
    let mut time_rng = rng::substream(cfg.seed, Stream::Time);
    let mut noise_rng = rng::substream(cfg.seed, Stream::Noise);
    let mut opt = Adam::new(&model, cfg.learning_rate);
    let mut trace = LossTrace { losses: Vec::with_capacity(cfg.steps) };
    let b = cfg.batch_size;

    for step in 1..=cfg.steps {
        let idx = sampler.next_batch(b);
        let mut batch = TrainingBatch {
            x: Array2::zeros((b, d)),
            t: Vec::with_capacity(b),
            j: Vec::with_capacity(b),
            target: Array2::zeros((b, d)),
            weights: vec![cfg.omega; b],
        };
        let mut eps = vec![0.0; d];
        for (row, &i) in idx.iter().enumerate() {
            let j = assignment.indices()[i];
            let x0 = data.point(i).to_vec();
            eps.iter_mut().for_each(|e| *e = StandardNormal.sample(&mut noise_rng));
            let (xt, tau) = noised(&x0, &prior.centers[j], prior.variances[j].sqrt(), &eps, &mut time_rng);
            batch.x.row_mut(row).iter_mut().zip(&xt).for_each(|(dst, v)| *dst = *v);
            batch.target.row_mut(row).iter_mut().zip(&eps).for_each(|(dst, v)| *dst = *v);
            batch.t.push(tau);
            batch.j.push(j);
        }
        let (loss, grads) = model.loss_and_grad(&batch)?;
        if !loss.is_finite() {
            let index = batch.x.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())).unwrap_or(0);
            return Err(Error::NonFinite { step, index });
        }
        optimizer_step(&mut model, &grads, &mut opt)?;
        if model.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { step, index: 0 });
        }
        trace.losses.push(loss);
        if step % 1000 == 0 {
            log::debug!("step {step}: loss {loss:.5}");
        }
    }
    Ok((model, trace))
}

/// Mixed DDPM training with `t ~ U{1..T}` and network time `t/T`.
pub fn train_mixddpm(
    data: &SampleSet,
    prior: &MixturePrior,
    sched: &DiscreteSchedule,
    model: NoiseModel,
    cfg: &TrainConfig,
) -> Result<(NoiseModel, LossTrace)> {
    if cfg.kind != ModelKind::MixDdpm {
        return config(format!("{:?} cannot be trained with the discrete objective", cfg.kind));
    }
    let steps = sched.steps();
    run_loop(data, prior, model, cfg, |x0, c, _, eps, rng| {
        let t = sched.sample_step(rng);
        (make_xt_ddpm(x0, c, eps, sched.alpha_bar(t)), t as f64 / steps as f64)
    })
}

/// Mixed SGM training with `t ~ U(0, 1]` clipped at [`T_MIN`]; the variance
/// kind scales the noise by `σ_j`.
pub fn train_mixsgm(
    data: &SampleSet,
    prior: &MixturePrior,
    sde: &SdeSchedule,
    model: NoiseModel,
    cfg: &TrainConfig,
) -> Result<(NoiseModel, LossTrace)> {
    let with_var = match cfg.kind {
        ModelKind::MixSgm => false,
        ModelKind::MixSgmVar => true,
        ModelKind::MixDdpm => return config("the discrete model cannot be trained with the SDE objective"),
    };
    run_loop(data, prior, model, cfg, |x0, c, sigma_j, eps, rng| {
        let t = sde.sample_time(rng, T_MIN);
        let (alpha, sigma) = sde.vp_coefficients(t);
        let s_j = if with_var { sigma_j } else { 1.0 };
        (make_xt_sgm(x0, c, eps, alpha, sigma, s_j), t / SdeSchedule::T_END)
    })
}
