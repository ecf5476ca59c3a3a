//! Reverse effort, one-dimensional distributional distances and the
//! comparison ratios used to report experiments.

use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::error::{config, Result};
use crate::prior::{draw_from_prior, sq_dist, Assignment, MixturePrior};
use crate::rng::{self, Stream};

/// Tolerance of the check that every center is the mean of its cell.
pub const CELL_MEAN_TOL: f64 = 1e-8;

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// `E‖x₀ − x̃_T‖²` by simulation. Uncoupled draws `x̃_T` from the prior
/// independently of `x₀`; coupled draws it from the component `x₀` is
/// dispatched to.
pub fn reverse_effort_mc(data: &SampleSet, prior: &MixturePrior, coupled: bool, draws: usize, seed: u64) -> Result<Estimate> {
    prior.validate()?;
    if data.is_empty() || data.dim() != prior.dim {
        return config("effort needs non-empty data matching the prior dimension");
    }
    if draws < 2 {
        return config("effort estimate needs at least two draws");
    }
    let assignment = Assignment::dispatch_all(data, &prior.centers)?;
    let mut rng = rng::substream(seed, Stream::Effort);
    let mut z = vec![0.0; prior.dim];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let i = rng.random_range(0..data.len());
        let x0 = data.point(i);
        if coupled {
            let j = assignment.indices()[i];
            let sd = prior.variances[j].sqrt();
            for (zk, c) in z.iter_mut().zip(&prior.centers[j]) {
                let e: f64 = StandardNormal.sample(&mut rng);
                *zk = c + sd * e;
            }
        } else {
            draw_from_prior(prior, &mut rng, &mut z);
        }
        let v: f64 = x0.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        sum += v;
        sum_sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Estimate { mean, stderr: (var / n).sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortReport {
    pub dim: usize,
    pub sigma_t: f64,
    /// `E‖x₀‖²` over the data.
    pub data_energy: f64,
    /// `Σ p_i ‖c_i‖²` with `p_i` the dispatch frequencies.
    pub reduction: f64,
    /// `E‖x₀‖² + σ_T² d`.
    pub closed_form_classical: f64,
    /// `E‖x₀‖² + σ_T² d − Σ p_i ‖c_i‖²`.
    pub closed_form_mixed: f64,
    /// `Σ p_i (E_i‖x₀ − c_i‖² + σ_i² d)` with the prior's own variances.
    pub closed_form_mixed_var: f64,
    pub centers_are_cell_means: bool,
    pub reeff_classical: f64,
    pub reeff_classical_stderr: f64,
    pub reeff_mixed: f64,
    pub reeff_mixed_stderr: f64,
    pub reeff_mixed_var: f64,
    pub reeff_mixed_var_stderr: f64,
}

impl EffortReport {
    /// Residual of the mixed identity against the classical estimate.
    pub fn identity_residual(&self) -> f64 {
        self.reeff_mixed - (self.reeff_classical - self.reduction)
    }

    pub fn identity_stderr(&self) -> f64 {
        self.reeff_mixed_stderr.hypot(self.reeff_classical_stderr)
    }
}

fn closed_parts(data: &SampleSet, prior: &MixturePrior, sigma_t: f64) -> Result<EffortReport> {
    prior.validate()?;
    if data.is_empty() || data.dim() != prior.dim {
        return config("effort needs non-empty data matching the prior dimension");
    }
    if !(sigma_t >= 0.0 && sigma_t.is_finite()) {
        return config(format!("sigma_T must be a nonnegative number, got {sigma_t}"));
    }
    let d = data.dim();
    let n = data.len() as f64;
    let assignment = Assignment::dispatch_all(data, &prior.centers)?;
    let counts = assignment.counts();
    let mut cell_sums = vec![vec![0.0; d]; prior.k()];
    let mut spread = 0.0;
    for (i, &j) in assignment.indices().iter().enumerate() {
        let x = data.point(i);
        cell_sums[j].iter_mut().zip(x.iter()).for_each(|(s, v)| *s += v);
        spread += sq_dist(x.as_slice().expect("standard layout"), &prior.centers[j]) + prior.variances[j] * d as f64;
    }
    let centers_are_cell_means = cell_sums.iter().zip(&counts).zip(&prior.centers).all(|((s, &c), center)| {
        c == 0 || s.iter().zip(center).all(|(s, m)| (s / c as f64 - m).abs() <= CELL_MEAN_TOL)
    });
    if !centers_are_cell_means {
        log::warn!("centers are not the arithmetic means of their cells; the mixed effort identity does not apply");
    }
    let reduction: f64 =
        counts.iter().zip(&prior.centers).map(|(&c, center)| c as f64 / n * center.iter().map(|v| v * v).sum::<f64>()).sum();
    let data_energy = data.mean_sq_norm();
    let classical = data_energy + sigma_t * sigma_t * d as f64;
    Ok(EffortReport {
        dim: d,
        sigma_t,
        data_energy,
        reduction,
        closed_form_classical: classical,
        closed_form_mixed: classical - reduction,
        closed_form_mixed_var: spread / n,
        centers_are_cell_means,
        reeff_classical: classical,
        reeff_classical_stderr: 0.0,
        reeff_mixed: classical - reduction,
        reeff_mixed_stderr: 0.0,
        reeff_mixed_var: spread / n,
        reeff_mixed_var_stderr: 0.0,
    })
}

/// Exact efforts over the empirical data; the `reeff_*` fields carry the
/// closed forms with zero standard error.
pub fn reverse_effort_closed(data: &SampleSet, prior: &MixturePrior, sigma_t: f64) -> Result<EffortReport> {
    closed_parts(data, prior, sigma_t)
}

/// Closed forms plus Monte-Carlo estimates: classical against
/// `N(0, σ_T² I)`, mixed against the prior's centers with variance `σ_T²`,
/// and the variance extension against the prior as given.
pub fn reverse_effort_report(data: &SampleSet, prior: &MixturePrior, sigma_t: f64, draws: usize, seed: u64) -> Result<EffortReport> {
    let mut report = closed_parts(data, prior, sigma_t)?;
    let var_t = sigma_t * sigma_t;
    let classical_prior = MixturePrior::standard(prior.dim, var_t)?;
    let mixed_prior = MixturePrior { variances: vec![var_t; prior.k()], ..prior.clone() };
    let c = reverse_effort_mc(data, &classical_prior, false, draws, seed)?;
    let m = reverse_effort_mc(data, &mixed_prior, true, draws, seed.wrapping_add(1))?;
    let v = reverse_effort_mc(data, prior, true, draws, seed.wrapping_add(2))?;
    report.reeff_classical = c.mean;
    report.reeff_classical_stderr = c.stderr;
    report.reeff_mixed = m.mean;
    report.reeff_mixed_stderr = m.stderr;
    report.reeff_mixed_var = v.mean;
    report.reeff_mixed_var_stderr = v.stderr;
    Ok(report)
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return config("distance needs non-empty samples");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return config("distance needs finite samples");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `∫₀¹ |Q_a(u) − Q_b(u)| du` over the empirical quantile functions.
pub fn w1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (n, m) = (a.len() as u64, b.len() as u64);
    // Each a-atom holds m units and each b-atom n units of mass n·m.
    let (mut i, mut j) = (0usize, 0usize);
    let (mut left_a, mut left_b) = (m, n);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let step = left_a.min(left_b);
        total += (a[i] - b[j]).abs() * step as f64;
        left_a -= step;
        left_b -= step;
        if left_a == 0 {
            i += 1;
            left_a = m;
        }
        if left_b == 0 {
            j += 1;
            left_b = n;
        }
    }
    Ok(total / (n * m) as f64)
}

/// `sup_x |F̂_a(x) − F̂_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        best = best.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(best)
}

/// `sup_x |F̂(x) − F(x)|`, checking both sides of every jump.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let a = sorted(a)?;
    let n = a.len() as f64;
    Ok(a.iter().enumerate().fold(0.0, |best: f64, (i, &x)| {
        let f = cdf(x);
        best.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    }))
}

/// `(model − benchmark) / benchmark`.
pub fn relative_error(benchmark: f64, model: f64) -> f64 {
    (model - benchmark) / benchmark
}

/// `(base − mixed) / base`.
pub fn improvement_ratio(base: f64, mixed: f64) -> f64 {
    (base - mixed) / base
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub w1: f64,
    pub ks: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1_relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_relative_error: Option<f64>,
}

/// Counts of two samples over shared uniform bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub generated: Vec<usize>,
    pub reference: Vec<usize>,
}

impl Histogram {
    /// `bins` uniform bins over the pooled range of both samples.
    pub fn pooled(generated: &[f64], reference: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return config("histogram needs at least one bin");
        }
        let all: Vec<f64> = generated.iter().chain(reference).copied().collect();
        let s = sorted(&all)?;
        let (mut lo, mut hi) = (s[0], s[s.len() - 1]);
        if hi == lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + width * k as f64 }).collect();
        let count = |xs: &[f64]| {
            let mut c = vec![0usize; bins];
            for &x in xs {
                let k = (((x - lo) / width) as usize).min(bins - 1);
                c[k] += 1;
            }
            c
        };
        Ok(Self { generated: count(generated), reference: count(reference), edges })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,generated,reference\n");
        for k in 0..self.generated.len() {
            writeln!(out, "{},{},{},{}", self.edges[k], self.edges[k + 1], self.generated[k], self.reference[k])
                .expect("write to string");
        }
        out
    }
}
