//! The noise-prediction network `ε_θ(x, t, j)`.
//!
//! A fully connected network over `concat(x, time features, center embedding)`
//! with SiLU hidden activations and a linear output. The time features are
//! fixed sinusoids of the normalized time `t/T`; the center embedding is a
//! learned table with one row per prior component. Gradients are computed by
//! hand-written reverse mode over the batch.

mod batch;
mod checkpoint;
mod gradcheck;
mod optim;

pub use batch::TrainingBatch;
pub use checkpoint::{fingerprint, Checkpoint};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use optim::{optimizer_step, Adam};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub dim: usize,
    pub hidden: Vec<usize>,
    pub time_embed_dim: usize,
    pub center_embed_dim: usize,
    pub num_centers: usize,
    pub zero_init_output: bool,
}

impl NetConfig {
    /// Three SiLU layers of width 128, 32 time features, 32-wide center
    /// embedding, zero-initialized output layer.
    pub fn standard(dim: usize, num_centers: usize) -> Self {
        Self {
            dim,
            hidden: vec![128, 128, 128],
            time_embed_dim: 32,
            center_embed_dim: 32,
            num_centers,
            zero_init_output: true,
        }
    }

    pub fn input_width(&self) -> usize {
        self.dim + self.time_embed_dim + self.center_embed_dim
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.num_centers == 0 {
            return config("network needs dim >= 1 and at least one center");
        }
        if !self.time_embed_dim.is_multiple_of(2) {
            return config("time embedding width must be even");
        }
        if self.hidden.contains(&0) {
            return config("hidden layers must be non-empty");
        }
        Ok(())
    }
}

/// Writes `[sin(f_k τ)…, cos(f_k τ)…]` with frequencies geometrically spaced
/// over `10⁰..10⁴`.
pub fn time_embedding(tau: f64, out: &mut [f64]) {
    let half = out.len() / 2;
    for k in 0..half {
        let freq = if half > 1 { 10f64.powf(4.0 * k as f64 / (half - 1) as f64) } else { 1.0 };
        let (s, c) = (freq * tau).sin_cos();
        out[k] = s;
        out[half + k] = c;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in × out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weight: Array2::zeros((fan_in, fan_out)), bias: Array1::zeros(fan_out) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    config: NetConfig,
    layers: Vec<Dense>,
    center_table: Array2<f64>,
}

/// One buffer per parameter tensor of a [`NoiseModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Dense>,
    pub center_table: Array2<f64>,
}

impl GradientSet {
    pub fn tensors(&self) -> Vec<&[f64]> {
        flat_views(&self.layers, &self.center_table)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        flat_views_mut(&mut self.layers, &mut self.center_table)
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn flat_views<'a>(layers: &'a [Dense], table: &'a Array2<f64>) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(2 * layers.len() + 1);
    for l in layers {
        out.push(l.weight.as_slice().expect("standard layout"));
        out.push(l.bias.as_slice().expect("standard layout"));
    }
    out.push(table.as_slice().expect("standard layout"));
    out
}

fn flat_views_mut<'a>(layers: &'a mut [Dense], table: &'a mut Array2<f64>) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(2 * layers.len() + 1);
    for l in layers {
        out.push(l.weight.as_slice_mut().expect("standard layout"));
        out.push(l.bias.as_slice_mut().expect("standard layout"));
    }
    out.push(table.as_slice_mut().expect("standard layout"));
    out
}

struct Trace {
    /// Input of each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation and its logistic value for each hidden layer.
    pre: Vec<Array2<f64>>,
    sig: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl NoiseModel {
    /// Uniform `±1/√fan_in` weights and biases, standard-normal center
    /// embeddings; the output layer is zero when `zero_init_output` is set.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::substream(seed, Stream::Init);
        let mut widths = vec![config.input_width()];
        widths.extend(&config.hidden);
        widths.push(config.dim);
        let n_layers = widths.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for (l, w) in widths.windows(2).enumerate() {
            let mut layer = Dense::zeros(w[0], w[1]);
            if !(config.zero_init_output && l == n_layers - 1) {
                let bound = 1.0 / (w[0] as f64).sqrt();
                layer.weight.mapv_inplace(|_| rng.random_range(-bound..bound));
                layer.bias.mapv_inplace(|_| rng.random_range(-bound..bound));
            }
            layers.push(layer);
        }
        let center_table =
            Array2::from_shape_fn((config.num_centers, config.center_embed_dim), |_| StandardNormal.sample(&mut rng));
        Ok(Self { config, layers, center_table })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn center_table(&self) -> &Array2<f64> {
        &self.center_table
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Parameter tensors in a fixed order: per layer weight then bias, then
    /// the center table.
    pub fn tensors(&self) -> Vec<&[f64]> {
        flat_views(&self.layers, &self.center_table)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        flat_views_mut(&mut self.layers, &mut self.center_table)
    }

    pub(crate) fn tensor_names(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.weight"), l.weight.shape().to_vec()));
            out.push((format!("layer{i}.bias"), l.bias.shape().to_vec()));
        }
        out.push(("center_table".into(), self.center_table.shape().to_vec()));
        out
    }

    pub fn zero_gradients(&self) -> GradientSet {
        GradientSet {
            layers: self.layers.iter().map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols())).collect(),
            center_table: Array2::zeros(self.center_table.raw_dim()),
        }
    }

    fn check_batch(&self, x: ArrayView2<'_, f64>, t: &[f64], j: &[usize]) -> Result<()> {
        let n = x.nrows();
        if x.ncols() != self.config.dim {
            return config(format!("input has {} columns, model dimension is {}", x.ncols(), self.config.dim));
        }
        if t.len() != n || j.len() != n {
            return config(format!("batch of {n} points with {} times and {} center indices", t.len(), j.len()));
        }
        if let Some(bad) = j.iter().find(|&&c| c >= self.config.num_centers) {
            return config(format!("center index {bad} out of range for {} centers", self.config.num_centers));
        }
        Ok(())
    }

    fn build_input(&self, x: ArrayView2<'_, f64>, t: &[f64], j: &[usize]) -> Array2<f64> {
        let (d, te) = (self.config.dim, self.config.time_embed_dim);
        let mut input = Array2::zeros((x.nrows(), self.config.input_width()));
        let mut emb = vec![0.0; te];
        let mut cached: Option<u64> = None;
        for (i, mut row) in input.rows_mut().into_iter().enumerate() {
            row.slice_mut(s![..d]).assign(&x.row(i));
            if cached != Some(t[i].to_bits()) {
                time_embedding(t[i], &mut emb);
                cached = Some(t[i].to_bits());
            }
            row.slice_mut(s![d..d + te]).assign(&ArrayView1::from(&emb[..]));
            row.slice_mut(s![d + te..]).assign(&self.center_table.row(j[i]));
        }
        input
    }

    fn run(&self, x: ArrayView2<'_, f64>, t: &[f64], j: &[usize], keep: bool) -> Trace {
        let mut a = self.build_input(x, t, j);
        let mut trace = Trace { inputs: Vec::new(), pre: Vec::new(), sig: Vec::new(), output: Array2::zeros((0, 0)) };
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight);
            z += &layer.bias;
            if l == last {
                if keep {
                    trace.inputs.push(a);
                }
                trace.output = z;
                break;
            }
            let sig = z.mapv(|v| 1.0 / (1.0 + (-v).exp()));
            let next = &z * &sig;
            if keep {
                trace.inputs.push(std::mem::replace(&mut a, next));
                trace.pre.push(z);
                trace.sig.push(sig);
            } else {
                a = next;
            }
        }
        trace
    }

    /// Predicted noise for a batch; `t` is normalized time in `[0, 1]`.
    pub fn forward(&self, x: ArrayView2<'_, f64>, t: &[f64], j: &[usize]) -> Result<Array2<f64>> {
        self.check_batch(x, t, j)?;
        let out = self.run(x, t, j, false).output;
        if let Some(row) = out.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { step: 0, index: row });
        }
        Ok(out)
    }

    /// `mean_i ω_i ‖ε_i − ε̂_i‖²` without gradients.
    pub fn loss(&self, batch: &TrainingBatch) -> Result<f64> {
        batch.check()?;
        self.check_batch(batch.x.view(), &batch.t, &batch.j)?;
        let out = self.run(batch.x.view(), &batch.t, &batch.j, false).output;
        Ok(weighted_mse(&out, &batch.target, &batch.weights))
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &TrainingBatch) -> Result<(f64, GradientSet)> {
        batch.check()?;
        self.check_batch(batch.x.view(), &batch.t, &batch.j)?;
        let n = batch.x.nrows();
        let trace = self.run(batch.x.view(), &batch.t, &batch.j, true);
        let loss = weighted_mse(&trace.output, &batch.target, &batch.weights);

        let mut delta = &trace.output - &batch.target;
        for (mut row, w) in delta.rows_mut().into_iter().zip(&batch.weights) {
            row *= 2.0 * w / n as f64;
        }
        let mut grads = self.zero_gradients();
        let (d, te) = (self.config.dim, self.config.time_embed_dim);
        for l in (0..self.layers.len()).rev() {
            grads.layers[l].weight.assign(&trace.inputs[l].t().dot(&delta));
            grads.layers[l].bias.assign(&delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut da = delta.dot(&self.layers[l].weight.t());
                Zip::from(&mut da).and(&trace.pre[l - 1]).and(&trace.sig[l - 1]).for_each(|g, &z, &s| {
                    *g *= s * (1.0 + z * (1.0 - s));
                });
                delta = da;
            } else {
                let w_center = self.layers[0].weight.slice(s![d + te.., ..]);
                let d_embed = delta.dot(&w_center.t());
                for (row, &c) in d_embed.rows().into_iter().zip(&batch.j) {
                    let mut g = grads.center_table.row_mut(c);
                    g += &row;
                }
            }
        }
        Ok((loss, grads))
    }
}

fn weighted_mse(pred: &Array2<f64>, target: &Array2<f64>, weights: &[f64]) -> f64 {
    let n = pred.nrows();
    let total: f64 = pred
        .rows()
        .into_iter()
        .zip(target.rows())
        .zip(weights)
        .map(|((p, e), w)| w * p.iter().zip(e).map(|(a, b)| (b - a) * (b - a)).sum::<f64>())
        .sum();
    total / n as f64
}
