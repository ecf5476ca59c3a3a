//! Noise schedules: the discrete β-sequence of the ancestral chain and the
//! linear-β variance-preserving SDE on `[0, 1]`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::rng::Rng;

/// Smallest continuous time used for training draws and as the end of reverse
/// integration; `σ_t → 0` makes the reverse drift singular at `t = 0`.
pub const T_MIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl DiscreteSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return config("schedule needs at least one step");
        }
        if let Some(t) = betas.iter().position(|b| !(*b > 0.0 && *b < 1.0)) {
            return config(format!("beta_{} = {} outside (0, 1)", t + 1, betas[t]));
        }
        let mut acc = 1.0;
        let alpha_bars = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(Self { betas, alpha_bars })
    }

    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `β_t` for `t` in `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// `ᾱ_t = Π_{s≤t} (1 − β_s)` for `t` in `1..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Uniform draw from `{1, …, T}`.
    pub fn sample_step(&self, rng: &mut Rng) -> usize {
        rng.random_range(1..=self.steps())
    }
}

/// Linearly interpolated `β_1..β_T` (`T = 1` uses `beta_first`).
pub fn linear_ddpm_schedule(steps: usize, beta_first: f64, beta_last: f64) -> Result<DiscreteSchedule> {
    if steps == 0 {
        return config("schedule needs T >= 1");
    }
    if !(0.0 < beta_first && beta_first <= beta_last && beta_last < 1.0) {
        return config(format!("need 0 < beta_first <= beta_last < 1, got {beta_first}, {beta_last}"));
    }
    let betas = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_first
            } else {
                beta_first + (beta_last - beta_first) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    DiscreteSchedule::from_betas(betas)
}

/// `dx = −½β_t x dt + √β_t dw` with `β_t = β₀ + (β₁ − β₀) t` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeSchedule {
    pub beta0: f64,
    pub beta1: f64,
}

impl SdeSchedule {
    pub const T_END: f64 = 1.0;

    pub fn new(beta0: f64, beta1: f64) -> Result<Self> {
        if !(beta0 >= 0.0 && beta1 >= 0.0 && beta0.is_finite() && beta1.is_finite()) {
            return config(format!("SDE betas must be nonnegative, got {beta0}, {beta1}"));
        }
        if beta0 == 0.0 && beta1 == 0.0 {
            return config("SDE betas cannot both be zero");
        }
        Ok(Self { beta0, beta1 })
    }

    /// `β₀ = 0.1`, `β₁ = 40`.
    pub fn paper_default() -> Self {
        Self { beta0: 0.1, beta1: 40.0 }
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta0 + (self.beta1 - self.beta0) * t
    }

    /// `∫₀ᵗ β_s ds`.
    pub fn beta_integral(&self, t: f64) -> f64 {
        self.beta0 * t + 0.5 * (self.beta1 - self.beta0) * t * t
    }

    /// Drift scalar `f_t = −½β_t`.
    pub fn drift(&self, t: f64) -> f64 {
        -0.5 * self.beta(t)
    }

    /// Diffusion scalar `g_t = √β_t`.
    pub fn diffusion(&self, t: f64) -> f64 {
        self.beta(t).sqrt()
    }

    /// `(α_t, σ_t)` of the marginal `N(α_t x₀, σ_t² I)`.
    pub fn vp_coefficients(&self, t: f64) -> (f64, f64) {
        let integral = self.beta_integral(t);
        let alpha = (-0.5 * integral).exp();
        let sigma = (-(-integral).exp_m1()).max(0.0).sqrt();
        (alpha, sigma)
    }

    /// `σ_T` at the terminal time.
    pub fn sigma_terminal(&self) -> f64 {
        self.vp_coefficients(Self::T_END).1
    }

    /// Uniform draw on `(0, T]`, clipped below at `t_min`.
    pub fn sample_time(&self, rng: &mut Rng, t_min: f64) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        (u * Self::T_END).max(t_min)
    }
}

/// Checked wrapper over [`SdeSchedule::vp_coefficients`].
pub fn vp_coefficients(sched: &SdeSchedule, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=SdeSchedule::T_END).contains(&t) {
        return config(format!("time {t} outside [0, {}]", SdeSchedule::T_END));
    }
    Ok(sched.vp_coefficients(t))
}
