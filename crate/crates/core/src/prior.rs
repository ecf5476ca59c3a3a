//! The structured Gaussian-mixture prior: nearest-center dispatch, k-means
//! center selection with silhouette model choice, label-based centers, and
//! dispatcher-based weight and variance estimates.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::{pick_component, SampleSet};
use crate::error::{config, Error, Result};
use crate::rng::{self, Rng, Stream};

/// Lower clamp applied to estimated component variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Default Lloyd iteration cap used by automatic center selection.
pub const KMEANS_MAX_ITER: usize = 300;

/// `Σ p_i N(c_i, σ_i² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePrior {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
}

impl MixturePrior {
    pub fn new(centers: Vec<Vec<f64>>, weights: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let dim = centers.first().map_or(0, Vec::len);
        let prior = Self { dim, centers, weights, variances };
        prior.validate()?;
        Ok(prior)
    }

    /// Single component at the origin: the classical prior `N(0, σ² I)`.
    pub fn standard(dim: usize, variance: f64) -> Result<Self> {
        Self::new(vec![vec![0.0; dim]], vec![1.0], vec![variance])
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.centers.len();
        if k == 0 {
            return config("prior needs at least one center");
        }
        if self.dim == 0 {
            return config("prior dimension must be at least 1");
        }
        if self.weights.len() != k || self.variances.len() != k {
            return config(format!(
                "prior has {k} centers, {} weights, {} variances",
                self.weights.len(),
                self.variances.len()
            ));
        }
        for (i, c) in self.centers.iter().enumerate() {
            if c.len() != self.dim {
                return config(format!("center {i} has dimension {}, expected {}", c.len(), self.dim));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return config(format!("center {i} is not finite"));
            }
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return config("prior weights must be nonnegative");
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return config(format!("prior weights sum to {total}"));
        }
        if self.variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return config("prior variances must be positive");
        }
        Ok(())
    }

    /// `Σ p_i ‖c_i‖²` under the prior's own weights.
    pub fn weighted_center_norm(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(p, c)| p * c.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let prior: Self = serde_json::from_str(text)?;
        prior.validate()?;
        Ok(prior)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sq_dist_view(a: ArrayView1<'_, f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: ArrayView1<'_, f64>, centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist_view(x, c);
        // strict comparison keeps the lowest index on ties
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn check_centers(centers: &[Vec<f64>], dim: usize) -> Result<()> {
    if centers.is_empty() {
        return config("empty center list");
    }
    if let Some(i) = centers.iter().position(|c| c.len() != dim) {
        return config(format!("center {i} has dimension {}, expected {dim}", centers[i].len()));
    }
    Ok(())
}

/// Index of the nearest center under ℓ₂ distance; ties go to the lowest index.
pub fn dispatch(x: &[f64], centers: &[Vec<f64>]) -> Result<usize> {
    check_centers(centers, x.len())?;
    Ok(nearest(ArrayView1::from(x), centers))
}

/// Component index per data point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    indices: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(indices: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|&&j| j >= k) {
            return config(format!("assignment index {bad} out of range for {k} components"));
        }
        Ok(Self { indices, k })
    }

    /// Dispatches every sample to its nearest center.
    pub fn dispatch_all(samples: &SampleSet, centers: &[Vec<f64>]) -> Result<Self> {
        check_centers(centers, samples.dim())?;
        let indices = samples.points().rows().into_iter().map(|r| nearest(r, centers)).collect();
        Ok(Self { indices, k: centers.len() })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &j in &self.indices {
            counts[j] += 1;
        }
        counts
    }
}

/// Result of a Lloyd run.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Assignment,
    /// Within-cluster sum of squares after each center update.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn kmeans_pp_init(samples: &SampleSet, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut chosen = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    chosen.push(first);
    let c0 = samples.point(first).to_vec();
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist_view(samples.point(i), &c0)).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && target < acc {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).expect("positive total"))
        } else {
            // every point coincides with a chosen center; pick any unchosen index
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        let c = samples.point(next).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist_view(samples.point(i), &c));
        }
    }
    chosen.into_iter().map(|i| samples.point(i).to_vec()).collect()
}

fn wcss(samples: &SampleSet, centers: &[Vec<f64>], assign: &[usize]) -> f64 {
    assign.iter().enumerate().map(|(i, &j)| sq_dist_view(samples.point(i), &centers[j])).sum()
}

/// Lloyd's algorithm from k-means++ seeding, keeping the objective trace.
pub fn kmeans_fit(samples: &SampleSet, k: usize, seed: u64, max_iter: usize) -> Result<KMeansFit> {
    let n = samples.len();
    if k == 0 || k > n {
        return config(format!("k-means needs 1 <= K <= n, got K={k}, n={n}"));
    }
    let d = samples.dim();
    let mut rng = rng::substream(seed, Stream::Cluster);
    let mut centers = kmeans_pp_init(samples, k, &mut rng);
    let mut assign: Vec<usize> = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let next: Vec<usize> = samples.points().rows().into_iter().map(|r| nearest(r, &centers)).collect();
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
        iterations += 1;

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &j) in assign.iter().enumerate() {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(samples.point(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // repair: move the empty center onto the worst-served point
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist_view(samples.point(a), &centers[assign[a]]);
                        let db = sq_dist_view(samples.point(b), &centers[assign[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty sample set");
                centers[j] = samples.point(far).to_vec();
            }
        }
        objective.push(wcss(samples, &centers, &assign));
    }
    if !converged {
        log::debug!("k-means stopped at max_iter={max_iter} without reaching a fixpoint");
        assign = samples.points().rows().into_iter().map(|r| nearest(r, &centers)).collect();
    }
    Ok(KMeansFit { centers, assignment: Assignment { indices: assign, k }, objective, iterations, converged })
}

/// Cluster centers from Lloyd's algorithm.
pub fn kmeans(samples: &SampleSet, k: usize, seed: u64, max_iter: usize) -> Result<Vec<Vec<f64>>> {
    Ok(kmeans_fit(samples, k, seed, max_iter)?.centers)
}

/// Mean silhouette coefficient. Points in singleton clusters score 0, as do
/// points with `a = b = 0`.
pub fn silhouette_mean(samples: &SampleSet, assignment: &Assignment) -> Result<f64> {
    let n = samples.len();
    let idx = assignment.indices();
    if idx.len() != n {
        return config(format!("assignment has {} entries for {n} points", idx.len()));
    }
    let counts = assignment.counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return config("silhouette needs at least two non-empty clusters");
    }
    let k = assignment.k();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let xi = samples.point(i);
        for j in 0..n {
            if i != j {
                let dij: f64 = xi.iter().zip(samples.point(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                sums[idx[j]] += dij;
            }
        }
        let own = idx[i];
        if counts[own] <= 1 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Chooses K in `2..=k_max` by the best mean silhouette of the k-means fit
/// (ties go to the smaller K) and returns it with its centers.
pub fn select_centers_auto(samples: &SampleSet, k_max: usize, seed: u64) -> Result<(usize, Vec<Vec<f64>>)> {
    if k_max < 2 {
        return config(format!("k_max must be at least 2, got {k_max}"));
    }
    let top = k_max.min(samples.len());
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    for k in 2..=top {
        let centers = kmeans(samples, k, seed, KMEANS_MAX_ITER)?;
        let assignment = Assignment::dispatch_all(samples, &centers)?;
        let score = match silhouette_mean(samples, &assignment) {
            Ok(s) => s,
            Err(_) => continue,
        };
        log::debug!("k={k}: mean silhouette {score:.4}");
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, k, centers));
        }
    }
    best.map(|(_, k, c)| (k, c))
        .ok_or_else(|| Error::Degenerate("no K produced two non-empty clusters".into()))
}

/// Per-label arithmetic means and label frequencies; labels must cover
/// `0..=max_label` without gaps.
pub fn centers_from_labels(samples: &SampleSet, labels: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = samples.len();
    if labels.len() != n {
        return config(format!("{} labels for {n} points", labels.len()));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let d = samples.dim();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(samples.point(i)) {
            *s += v;
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCell(empty));
    }
    let centers = sums.iter().zip(&counts).map(|(s, &c)| s.iter().map(|v| v / c as f64).collect()).collect();
    let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok((centers, weights))
}

/// Fraction of samples dispatched to each center.
pub fn estimate_weights(samples: &SampleSet, centers: &[Vec<f64>]) -> Result<Vec<f64>> {
    let counts = Assignment::dispatch_all(samples, centers)?.counts();
    let n = samples.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / n).collect())
}

/// Per-component `(1/|X_i|) Σ ‖x − c_i‖² / d` over the dispatcher cells.
/// Unfloored: an all-identical cell yields 0.
pub fn estimate_variances(samples: &SampleSet, centers: &[Vec<f64>]) -> Result<Vec<f64>> {
    let assignment = Assignment::dispatch_all(samples, centers)?;
    let d = samples.dim() as f64;
    let mut sums = vec![0.0; centers.len()];
    for (i, &j) in assignment.indices().iter().enumerate() {
        sums[j] += sq_dist_view(samples.point(i), &centers[j]);
    }
    let counts = assignment.counts();
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (s, &c))| if c == 0 { Err(Error::EmptyCell(i)) } else { Ok(s / c as f64 / d) })
        .collect()
}

/// Draws the component index (skipped for K = 1) and then `x ~ N(c_j, σ_j² I)`.
pub(crate) fn draw_from_prior(prior: &MixturePrior, rng: &mut Rng, out: &mut [f64]) -> usize {
    let j = if prior.k() == 1 { 0 } else { pick_component(&prior.weights, rng.random::<f64>()) };
    let sd = prior.variances[j].sqrt();
    for (o, c) in out.iter_mut().zip(&prior.centers[j]) {
        let z: f64 = StandardNormal.sample(rng);
        *o = c + sd * z;
    }
    j
}

/// `n` prior draws with their component indices. Point `i` uses its own
/// substream, the same one the reverse samplers continue from.
pub fn sample_prior(prior: &MixturePrior, n: usize, seed: u64) -> Result<(Array2<f64>, Vec<usize>)> {
    prior.validate()?;
    let mut points = Array2::zeros((n, prior.dim));
    let mut indices = Vec::with_capacity(n);
    for (i, mut row) in points.rows_mut().into_iter().enumerate() {
        let mut rng = rng::point_stream(seed, Stream::Chain, i);
        let slice = row.as_slice_mut().expect("standard layout");
        indices.push(draw_from_prior(prior, &mut rng, slice));
    }
    Ok((points, indices))
}
