//! Reverse processes: ancestral sampling of the mixed DDPM and
//! Euler–Maruyama integration of the mixed SGM reverse SDE.
//!
//! Every trajectory owns a random substream selected by its point index. The
//! same stream first draws the component and the starting point from the
//! prior, then supplies the chain noise, so a run of `n` points is the
//! concatenation of any partition of it.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::error::{config, Error, Result};
use crate::net::NoiseModel;
use crate::prior::{draw_from_prior, MixturePrior};
use crate::rng::{self, Rng, Stream};
use crate::schedules::{DiscreteSchedule, SdeSchedule, T_MIN};

/// Anything that predicts the noise of a batch at normalized time `t`.
pub trait NoisePredictor {
    fn dim(&self) -> usize;
    fn num_centers(&self) -> usize;
    fn predict(&self, x: ArrayView2<'_, f64>, t: &[f64], j: &[usize]) -> Result<Array2<f64>>;
}

impl NoisePredictor for NoiseModel {
    fn dim(&self) -> usize {
        self.config().dim
    }

    fn num_centers(&self) -> usize {
        self.config().num_centers
    }

    fn predict(&self, x: ArrayView2<'_, f64>, t: &[f64], j: &[usize]) -> Result<Array2<f64>> {
        self.forward(x, t, j)
    }
}

/// The predictor `ε̂ ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroNoise {
    pub dim: usize,
    pub num_centers: usize,
}

impl NoisePredictor for ZeroNoise {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_centers(&self) -> usize {
        self.num_centers
    }

    fn predict(&self, x: ArrayView2<'_, f64>, _t: &[f64], _j: &[usize]) -> Result<Array2<f64>> {
        Ok(Array2::zeros(x.raw_dim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdeVariant {
    /// Unit-variance components.
    Plain,
    /// Component variances `σ_j²` in the prior, drift and diffusion.
    Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    pub points: Array2<f64>,
    pub components: Vec<usize>,
    /// Reverse steps taken per trajectory.
    pub steps: usize,
    pub seed: u64,
}

impl SampleRun {
    pub fn to_sample_set(&self) -> Result<SampleSet> {
        SampleSet::new(self.points.clone(), None)
    }

    /// One row per point: coordinates then the component index.
    pub fn to_csv(&self) -> String {
        let d = self.points.ncols();
        let mut out = String::new();
        for k in 0..d {
            write!(out, "x{k},").expect("write to string");
        }
        out.push_str("component\n");
        for (row, j) in self.points.rows().into_iter().zip(&self.components) {
            for v in row {
                write!(out, "{v},").expect("write to string");
            }
            writeln!(out, "{j}").expect("write to string");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// `(1/√(1 − β_t)) (x − c_j − (β_t/√(1 − ᾱ_t)) ε̂) + c_j`.
pub fn reverse_mean_mu(x: &[f64], t: usize, c_j: &[f64], eps_hat: &[f64], sched: &DiscreteSchedule) -> Vec<f64> {
    mean_from(x, c_j, eps_hat, sched.beta(t), sched.alpha_bar(t))
}

fn mean_from(x: &[f64], c_j: &[f64], eps_hat: &[f64], beta: f64, abar: f64) -> Vec<f64> {
    let scale = 1.0 / (1.0 - beta).sqrt();
    let k = beta / (1.0 - abar).sqrt();
    x.iter().zip(c_j).zip(eps_hat).map(|((x, c), e)| scale * (x - c - k * e) + c).collect()
}

fn check_predictor(model: &dyn NoisePredictor, prior: &MixturePrior) -> Result<()> {
    prior.validate()?;
    if model.dim() != prior.dim || model.num_centers() != prior.k() {
        return config(format!(
            "model expects dim {} with {} centers, prior has dim {} with {} centers",
            model.dim(),
            model.num_centers(),
            prior.dim,
            prior.k()
        ));
    }
    Ok(())
}

fn unit_variance(prior: &MixturePrior) -> MixturePrior {
    MixturePrior { variances: vec![1.0; prior.k()], ..prior.clone() }
}

/// Prior draws plus the per-point streams positioned after them.
fn start_chains(prior: &MixturePrior, n: usize, seed: u64) -> (Array2<f64>, Vec<usize>, Vec<Rng>) {
    let mut points = Array2::zeros((n, prior.dim));
    let mut components = Vec::with_capacity(n);
    let mut rngs = Vec::with_capacity(n);
    for (i, mut row) in points.rows_mut().into_iter().enumerate() {
        let mut rng = rng::point_stream(seed, Stream::Chain, i);
        components.push(draw_from_prior(prior, &mut rng, row.as_slice_mut().expect("standard layout")));
        rngs.push(rng);
    }
    (points, components, rngs)
}

fn first_non_finite(x: &Array2<f64>) -> Option<usize> {
    x.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite()))
}

/// Ancestral sampling from `N(c_j, I)` down to `x̃₀`. With
/// `final_step_noise` the last transition also draws from `N(μ, β₁ I)`.
pub fn sample_mixddpm(
    model: &dyn NoisePredictor,
    prior: &MixturePrior,
    sched: &DiscreteSchedule,
    n: usize,
    seed: u64,
    final_step_noise: bool,
) -> Result<SampleRun> {
    check_predictor(model, prior)?;
    let prior = unit_variance(prior);
    let (mut x, components, mut rngs) = start_chains(&prior, n, seed);
    let steps = sched.steps();
    for t in (1..=steps).rev() {
        let tau = vec![t as f64 / steps as f64; n];
        let eps_hat = model.predict(x.view(), &tau, &components)?;
        let (beta, abar) = (sched.beta(t), sched.alpha_bar(t));
        let noise_sd = if t > 1 || final_step_noise { beta.sqrt() } else { 0.0 };
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            let c = &prior.centers[components[i]];
            let mu = mean_from(row.as_slice().expect("standard layout"), c, eps_hat.row(i).as_slice().expect("standard layout"), beta, abar);
            for (v, m) in row.iter_mut().zip(mu) {
                let z: f64 = if noise_sd > 0.0 { StandardNormal.sample(&mut rngs[i]) } else { 0.0 };
                *v = m + noise_sd * z;
            }
        }
        if let Some(index) = first_non_finite(&x) {
            return Err(Error::NonFinite { step: t, index });
        }
    }
    Ok(SampleRun { points: x, components, steps, seed })
}

/// Euler–Maruyama on the reverse SDE from `t = 1` down to [`T_MIN`] with
/// `n_steps` uniform steps:
/// `x ← x − Δt (f_t (x − c_j) + g_t² σ_j² ε̂ / σ_t) + g_t σ_j √Δt z`.
pub fn sample_mixsgm_euler(
    model: &dyn NoisePredictor,
    prior: &MixturePrior,
    sde: &SdeSchedule,
    n_steps: usize,
    n: usize,
    seed: u64,
    variant: SdeVariant,
) -> Result<SampleRun> {
    if n_steps < 1 {
        return config("the reverse SDE needs at least one step");
    }
    check_predictor(model, prior)?;
    let prior = match variant {
        SdeVariant::Plain => unit_variance(prior),
        SdeVariant::Var => prior.clone(),
    };
    let sd: Vec<f64> = prior.variances.iter().map(|v| v.sqrt()).collect();
    let (mut x, components, mut rngs) = start_chains(&prior, n, seed);
    let dt = (SdeSchedule::T_END - T_MIN) / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    for k in 0..n_steps {
        let t = SdeSchedule::T_END - k as f64 * dt;
        let (_, sigma) = sde.vp_coefficients(t);
        let (f, g2) = (sde.drift(t), sde.beta(t));
        let g = g2.sqrt();
        let tau = vec![t / SdeSchedule::T_END; n];
        let eps_hat = model.predict(x.view(), &tau, &components)?;
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            let j = components[i];
            let c = &prior.centers[j];
            let s = sd[j];
            for ((v, cv), e) in row.iter_mut().zip(c).zip(eps_hat.row(i)) {
                let drift = f * (*v - cv) + g2 * s * s / sigma * e;
                let z: f64 = StandardNormal.sample(&mut rngs[i]);
                *v += -dt * drift + g * s * sqrt_dt * z;
            }
        }
        if let Some(index) = first_non_finite(&x) {
            return Err(Error::NonFinite { step: n_steps - k, index });
        }
    }
    Ok(SampleRun { points: x, components, steps: n_steps, seed })
}
