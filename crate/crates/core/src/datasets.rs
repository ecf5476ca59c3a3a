//! Synthetic data laws, series ingestion and detrend/normalize preprocessing.

use std::fs;
use std::io::Write;
use std::path::Path;

use libm::erfc;
use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{config, Error, Result};
use crate::rng::{self, Rng, Stream};

const WEIGHT_TOL: f64 = 1e-12;

/// A finite point cloud in R^d with optional per-point integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl SampleSet {
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return config(format!("sample set must be non-empty, got {n}x{d}"));
        }
        if let Some(row) = points.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Degenerate(format!("row {row} is not finite")));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return config(format!("{} labels for {n} points", l.len()));
            }
        }
        Ok(Self { points, labels })
    }

    /// One-dimensional sample set from a list of values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let points = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::new(points, None)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return config(format!("{} labels for {} points", labels.len(), self.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// First coordinate of every point.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.points.column(k).to_vec()
    }

    /// Mean of the squared Euclidean norm over points.
    pub fn mean_sq_norm(&self) -> f64 {
        self.points
            .rows()
            .into_iter()
            .map(|r| r.dot(&r))
            .sum::<f64>()
            / self.len() as f64
    }

    /// Writes `x0..x{d-1}` columns plus a `label` column when labels exist.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let header: Vec<String> = (0..self.dim()).map(|k| format!("x{k}")).collect();
        write!(out, "{}", header.join(","))?;
        if self.labels.is_some() {
            write!(out, ",label")?;
        }
        writeln!(out)?;
        for (i, row) in self.points.rows().into_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            write!(out, "{}", cells.join(","))?;
            if let Some(l) = &self.labels {
                write!(out, ",{}", l[i])?;
            }
            writeln!(out)?;
        }
        fs::write(path, out)?;
        Ok(())
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return config("mixture needs at least one component");
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return config(format!("weights must be nonnegative, got {weights:?}"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return config(format!("weights sum to {total}, expected 1"));
    }
    Ok(())
}

/// Component index from one uniform draw by inverting the weight CDF.
pub(crate) fn pick_component(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last partial sum; take the last
    // component with positive weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussian mixture with diagonal component covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    /// `means[i][k]`: mean of component `i` along dimension `k`.
    pub means: Vec<Vec<f64>>,
    /// `variances[i][k]`: variance of component `i` along dimension `k`.
    pub variances: Vec<Vec<f64>>,
}

impl GmmParams {
    /// The symmetric bimodal law ½N(−0.9, 0.19) + ½N(0.9, 0.19).
    pub fn paper_bimodal() -> Self {
        Self {
            weights: vec![0.5, 0.5],
            means: vec![vec![-0.9], vec![0.9]],
            variances: vec![vec![0.19], vec![0.19]],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        validate_weights(&self.weights)?;
        let k = self.weights.len();
        if self.means.len() != k || self.variances.len() != k {
            return config("weights, means and variances must have one entry per component");
        }
        let d = self.dim();
        if d == 0 {
            return config("components must have at least one dimension");
        }
        for (i, (m, v)) in self.means.iter().zip(&self.variances).enumerate() {
            if m.len() != d || v.len() != d {
                return config(format!("component {i} has inconsistent dimension"));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return config(format!("component {i} has a non-finite mean"));
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return config(format!("component {i} has a non-positive variance"));
            }
        }
        Ok(())
    }

    /// Analytic mean and variance of the first coordinate.
    pub fn moments_1d(&self) -> (f64, f64) {
        let mean: f64 = self.weights.iter().zip(&self.means).map(|(w, m)| w * m[0]).sum();
        let second: f64 = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(w, (m, v))| w * (v[0] + m[0] * m[0]))
            .sum();
        (mean, second - mean * mean)
    }
}

/// Draws `n` labelled points from a Gaussian mixture.
pub fn sample_gmm(params: &GmmParams, n: usize, seed: u64) -> Result<SampleSet> {
    sample_gmm_from(params, n, &mut rng::substream(seed, Stream::Data))
}

fn sample_gmm_from(params: &GmmParams, n: usize, rng: &mut Rng) -> Result<SampleSet> {
    params.validate()?;
    if n == 0 {
        return config("sample count must be at least 1");
    }
    let d = params.dim();
    let mut points = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for mut row in points.rows_mut() {
        let i = pick_component(&params.weights, rng.random::<f64>());
        for k in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            row[k] = params.means[i][k] + params.variances[i][k].sqrt() * z;
        }
        labels.push(i);
    }
    SampleSet::new(points, Some(labels))
}

/// `shift + sign * Gamma(shape, scale)` with `sign = -1` when reflected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaComponent {
    pub shape: f64,
    pub scale: f64,
    pub shift: f64,
    pub reflect: bool,
}

impl GammaComponent {
    /// Component with the given mean and variance at a fixed shape; negative
    /// means use the reflected orientation.
    pub fn matching_moments(mean: f64, variance: f64, shape: f64) -> Result<Self> {
        if !(shape > 0.0 && variance > 0.0) {
            return config("shape and variance must be positive");
        }
        let scale = (variance / shape).sqrt();
        let reflect = mean < 0.0;
        let sign = if reflect { -1.0 } else { 1.0 };
        Ok(Self { shape, scale, shift: mean - sign * shape * scale, reflect })
    }

    fn sign(&self) -> f64 {
        if self.reflect {
            -1.0
        } else {
            1.0
        }
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.sign() * self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let g = |y: f64| if y <= 0.0 { 0.0 } else { gamma_lr(self.shape, y / self.scale) };
        if self.reflect {
            1.0 - g(self.shift - x)
        } else {
            g(x - self.shift)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMixtureParams {
    pub weights: Vec<f64>,
    pub components: Vec<GammaComponent>,
}

impl GammaMixtureParams {
    /// Gamma counterpart of [`GmmParams::paper_bimodal`]: same cluster means
    /// (±0.9) and variances (0.19), shape 4.
    pub fn paper_bimodal() -> Self {
        Self::matching(&GmmParams::paper_bimodal(), 4.0).expect("valid constants")
    }

    /// Moment-matched Gamma mixture for a 1-D Gaussian mixture.
    pub fn matching(gmm: &GmmParams, shape: f64) -> Result<Self> {
        gmm.validate()?;
        if gmm.dim() != 1 {
            return config("gamma mixtures are one-dimensional");
        }
        let components = gmm
            .means
            .iter()
            .zip(&gmm.variances)
            .map(|(m, v)| GammaComponent::matching_moments(m[0], v[0], shape))
            .collect::<Result<_>>()?;
        Ok(Self { weights: gmm.weights.clone(), components })
    }

    pub fn validate(&self) -> Result<()> {
        validate_weights(&self.weights)?;
        if self.components.len() != self.weights.len() {
            return config("one gamma component per weight required");
        }
        for (i, c) in self.components.iter().enumerate() {
            if !(c.shape > 0.0 && c.scale > 0.0) || !c.shift.is_finite() {
                return config(format!("gamma component {i} needs positive shape and scale"));
            }
        }
        Ok(())
    }

    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.weights.iter().zip(&self.components).map(|(w, c)| w * c.mean()).sum();
        let second: f64 = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * (c.variance() + c.mean() * c.mean()))
            .sum();
        (mean, second - mean * mean)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| w * c.cdf(x)).sum()
    }
}

/// Draws `n` labelled 1-D points from a (possibly reflected) Gamma mixture.
pub fn sample_gamma_mixture(params: &GammaMixtureParams, n: usize, seed: u64) -> Result<SampleSet> {
    sample_gamma_mixture_from(params, n, &mut rng::substream(seed, Stream::Data))
}

fn sample_gamma_mixture_from(params: &GammaMixtureParams, n: usize, rng: &mut Rng) -> Result<SampleSet> {
    params.validate()?;
    if n == 0 {
        return config("sample count must be at least 1");
    }
    let dists = params
        .components
        .iter()
        .map(|c| rand_distr::Gamma::new(c.shape, c.scale).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let i = pick_component(&params.weights, rng.random::<f64>());
        let c = &params.components[i];
        values.push(c.shift + c.sign() * dists[i].sample(rng));
        labels.push(i);
    }
    SampleSet::from_values(&values)?.with_labels(labels)
}

/// 1-D Gaussian-mixture CDF `Σ w_i Φ((x − μ_i)/σ_i)`.
pub fn true_cdf_gmm(x: f64, params: &GmmParams) -> f64 {
    params
        .weights
        .iter()
        .zip(params.means.iter().zip(&params.variances))
        .map(|(w, (m, v))| w * normal_cdf((x - m[0]) / v[0].sqrt()))
        .sum()
}

/// A synthetic data law the harness can sample from and evaluate against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum DataLaw {
    Gmm(GmmParams),
    GammaMixture(GammaMixtureParams),
}

impl DataLaw {
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleSet> {
        match self {
            DataLaw::Gmm(p) => sample_gmm(p, n, seed),
            DataLaw::GammaMixture(p) => sample_gamma_mixture(p, n, seed),
        }
    }

    /// Like [`DataLaw::sample`] but on an independent stream, for evaluation
    /// samples that must not share draws with the training data.
    pub fn sample_reference(&self, n: usize, seed: u64) -> Result<SampleSet> {
        let mut rng = rng::substream(seed, Stream::Reference);
        match self {
            DataLaw::Gmm(p) => sample_gmm_from(p, n, &mut rng),
            DataLaw::GammaMixture(p) => sample_gamma_mixture_from(p, n, &mut rng),
        }
    }

    /// CDF of the first coordinate.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DataLaw::Gmm(p) => true_cdf_gmm(x, p),
            DataLaw::GammaMixture(p) => p.cdf(x),
        }
    }
}

/// Reads a chronological series, one value per line (first CSV field).
/// A non-numeric first record is treated as a header.
pub fn load_series_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut record = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if record == 0 => {}
            _ => {
                return Err(Error::Ingest {
                    index: record,
                    message: format!("non-numeric record {field:?}"),
                })
            }
        }
        record += 1;
    }
    if values.is_empty() {
        return Err(Error::Ingest { index: record, message: "no numeric records".into() });
    }
    Ok(values)
}

/// Linear trend fitted on a training window plus residual standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendModel {
    pub slope: f64,
    pub intercept: f64,
    pub residual_mean: f64,
    pub residual_std: f64,
}

impl TrendModel {
    /// Standardized residual of `value` observed at series index `index`.
    pub fn transform(&self, index: usize, value: f64) -> f64 {
        let residual = value - (self.intercept + self.slope * index as f64);
        (residual - self.residual_mean) / self.residual_std
    }

    pub fn inverse(&self, index: usize, z: f64) -> f64 {
        z * self.residual_std + self.residual_mean + self.intercept + self.slope * index as f64
    }
}

/// Fits an OLS line on `series[..train_len]`, standardizes the training
/// residuals, and applies the same transform to the following `test_len`
/// values (`None` when `test_len` is zero).
pub fn detrend_normalize(
    series: &[f64],
    train_len: usize,
    test_len: usize,
) -> Result<(SampleSet, Option<SampleSet>, TrendModel)> {
    if train_len < 2 {
        return config("training window needs at least two values");
    }
    if train_len + test_len > series.len() {
        return config(format!(
            "train_len + test_len = {} exceeds series length {}",
            train_len + test_len,
            series.len()
        ));
    }
    let train = &series[..train_len];
    let n = train_len as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = train.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in train.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let residuals: Vec<f64> =
        train.iter().enumerate().map(|(i, y)| y - (intercept + slope * i as f64)).collect();
    let residual_mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - residual_mean).powi(2)).sum::<f64>() / n;
    let residual_std = var.sqrt();
    let scale = train.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    if !(residual_std > 1e-12 * scale) {
        return Err(Error::Degenerate("training residuals have zero variance".into()));
    }
    let trend = TrendModel { slope, intercept, residual_mean, residual_std };
    let train_z: Vec<f64> = residuals.iter().map(|r| (r - residual_mean) / residual_std).collect();
    let test_z: Vec<f64> = (train_len..train_len + test_len)
        .map(|i| trend.transform(i, series[i]))
        .collect();
    let test = if test_z.is_empty() { None } else { Some(SampleSet::from_values(&test_z)?) };
    Ok((SampleSet::from_values(&train_z)?, test, trend))
}
