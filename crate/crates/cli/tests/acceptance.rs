//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use mixdiff_cli::experiment::cmd_run;
use mixdiff_cli::{DataSource, RunConfig};
use mixdiff_core::datasets::{sample_gmm, GmmParams, SampleSet};
use mixdiff_core::metrics::{ks_one_sample, ks_two_sample, reverse_effort_mc, w1_distance};
use mixdiff_core::net::{grad_check, grad_check_with, optimizer_step, Adam, NetConfig, NoiseModel, TrainingBatch};
use mixdiff_core::prior::{estimate_weights, kmeans, MixturePrior, KMEANS_MAX_ITER};
use mixdiff_core::rng::{point_stream, substream, Stream};
use mixdiff_core::sample::{sample_mixddpm, sample_mixsgm_euler, SdeVariant, ZeroNoise};
use mixdiff_core::schedules::{linear_ddpm_schedule, DiscreteSchedule, SdeSchedule, T_MIN};
use mixdiff_core::train::{train_mixddpm, train_mixsgm, ModelKind, TrainConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 effort identity, sigma_T = 1", criterion_1),
        ("2 effort identity, sigma_T in {0.5, 1, 5}", criterion_2),
        ("3 GMM: mixDDPM vs DDPM over 3 seeds", criterion_3),
        ("4 Gamma mixture: mixDDPM vs DDPM over 3 seeds", criterion_4),
        ("5 single-center reduction is bit-identical", criterion_5),
        ("6 gradient check", criterion_6),
        ("7 forward chain matches closed-form marginal", criterion_7),
        ("8 W1 and K-S against exhaustive oracles", criterion_8),
        ("9 Euler-Maruyama backward OU variance", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        let id = name.split(' ').next().unwrap_or_default();
        if !filter.is_empty() && !filter.iter().any(|a| a == id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {name}: {} [{secs:.1}s]", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    if filter.is_empty() {
        println!("SKIP criterion 10 image-scale results: out of scope at desk scale");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// Criteria 1 and 2 --------------------------------------------------------

struct EffortCase {
    data: SampleSet,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    energy: f64,
    reduction: f64,
}

fn effort_case() -> EffortCase {
    let data = sample_gmm(&GmmParams::paper_bimodal(), 256, 0).unwrap();
    let centers = kmeans(&data, 2, 0, KMEANS_MAX_ITER).unwrap();
    let weights = estimate_weights(&data, &centers).unwrap();
    let xs = data.column(0);
    let energy = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    // dispatch frequencies by direct nearest-center counting
    let mut counts = vec![0usize; centers.len()];
    for x in &xs {
        let j = if (x - centers[0][0]).abs() <= (x - centers[1][0]).abs() { 0 } else { 1 };
        counts[j] += 1;
    }
    let reduction = counts.iter().zip(&centers).map(|(&c, m)| c as f64 / xs.len() as f64 * m[0] * m[0]).sum();
    EffortCase { data, centers, weights, energy, reduction }
}

/// Returns (identity z, classical z, mixed z, reduction / classical).
fn effort_identity(case: &EffortCase, sigma: f64, seed: u64) -> (f64, f64, f64, f64) {
    let var = sigma * sigma;
    let classical_prior = MixturePrior::standard(1, var).unwrap();
    let mixed_prior = MixturePrior::new(case.centers.clone(), case.weights.clone(), vec![var; 2]).unwrap();
    let c = reverse_effort_mc(&case.data, &classical_prior, false, 100_000, seed).unwrap();
    let m = reverse_effort_mc(&case.data, &mixed_prior, true, 100_000, seed + 1).unwrap();
    let closed_c = case.energy + var;
    let closed_m = closed_c - case.reduction;
    let z_identity = (m.mean - (c.mean - case.reduction)) / c.stderr.hypot(m.stderr);
    (z_identity, (c.mean - closed_c) / c.stderr, (m.mean - closed_m) / m.stderr, case.reduction / closed_c)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let case = effort_case();
    let (zi, zc, zm, _) = effort_identity(&case, 1.0, 11);
    let secs = start.elapsed().as_secs_f64();
    let ok = zi.abs() <= 5.0 && zc.abs() <= 5.0 && zm.abs() <= 5.0 && secs < 5.0;
    outcome(
        ok,
        format!("identity {zi:+.2} se, classical closed form {zc:+.2} se, mixed closed form {zm:+.2} se, {secs:.2}s (< 5s)"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let case = effort_case();
    let mut ok = true;
    let mut ratios = Vec::new();
    let mut parts = Vec::new();
    for (k, sigma) in [0.5, 1.0, 5.0].into_iter().enumerate() {
        let (zi, zc, zm, ratio) = effort_identity(&case, sigma, 20 + 2 * k as u64);
        ok &= zi.abs() <= 5.0 && zc.abs() <= 5.0 && zm.abs() <= 5.0;
        ratios.push(ratio);
        parts.push(format!("sigma {sigma}: identity {zi:+.2} se, ratio {ratio:.4}"));
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && decreasing && secs < 10.0, format!("{}; decreasing {decreasing}; {secs:.2}s (< 10s)", parts.join("; ")))
}

// Criteria 3 and 4 --------------------------------------------------------

fn table_config(data: DataSource, dir: &std::path::Path) -> RunConfig {
    RunConfig { name: "acceptance".into(), data, out_dir: dir.to_path_buf(), ..RunConfig::default() }
}

fn criterion_3() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_run(&table_config(DataSource::Gmm, dir.path())).unwrap();
    let (m, b) = (s.median_mixed, s.median_baseline);
    let ok = m.w1 <= 0.8 * b.w1 && m.ks <= 0.8 * b.ks && m.w1 <= 0.18 && m.ks <= 0.15;
    outcome(
        ok,
        format!(
            "median W1 {:.4} vs {:.4} (ratio {:.3}, need <= 0.8), median K-S {:.4} vs {:.4} (ratio {:.3}, need <= 0.8), bands W1 <= 0.18, K-S <= 0.15",
            m.w1, b.w1, s.w1_ratio, m.ks, b.ks, s.ks_ratio
        ),
    )
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_run(&table_config(DataSource::GammaMixture, dir.path())).unwrap();
    let (m, b) = (s.median_mixed, s.median_baseline);
    let ok = m.w1 <= 0.9 * b.w1 && m.ks <= 0.9 * b.ks;
    outcome(
        ok,
        format!(
            "median W1 {:.4} vs {:.4} (ratio {:.3}, need <= 0.9), median K-S {:.4} vs {:.4} (ratio {:.3}, need <= 0.9)",
            m.w1, b.w1, s.w1_ratio, m.ks, b.ks, s.ks_ratio
        ),
    )
}

// Criterion 5 -------------------------------------------------------------

/// Classical training loop written directly from the unmixed objective:
/// `x_t = a x₀ + s ε` with `(a, s)` from `noise(t)`, regressing onto `ε`.
fn classical_training(
    data: &[f64],
    mut model: NoiseModel,
    steps: usize,
    seed: u64,
    mut draw_time: impl FnMut(&mut mixdiff_core::rng::Rng) -> (f64, f64, f64),
) -> (NoiseModel, Vec<f64>) {
    let batch = 32;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut pos = order.len();
    let mut shuffle = substream(seed, Stream::Shuffle);
    let mut time = substream(seed, Stream::Time);
    let mut noise = substream(seed, Stream::Noise);
    let mut opt = Adam::new(&model, 1e-3);
    let mut losses = Vec::new();
    for _ in 0..steps {
        let mut x = Array2::zeros((batch, 1));
        let mut target = Array2::zeros((batch, 1));
        let mut t = Vec::new();
        for r in 0..batch {
            if pos == order.len() {
                order.shuffle(&mut shuffle);
                pos = 0;
            }
            let x0 = data[order[pos]];
            pos += 1;
            let eps: f64 = StandardNormal.sample(&mut noise);
            let (a, s, tau) = draw_time(&mut time);
            x[[r, 0]] = a * x0 + s * eps;
            target[[r, 0]] = eps;
            t.push(tau);
        }
        let b = TrainingBatch { x, t, j: vec![0; batch], target, weights: vec![1.0; batch] };
        let (loss, grads) = model.loss_and_grad(&b).unwrap();
        optimizer_step(&mut model, &grads, &mut opt).unwrap();
        losses.push(loss);
    }
    (model, losses)
}

/// Ancestral sampler from `N(0, 1)` with the classical mean
/// `(1/√(1−β))(x − (β/√(1−ᾱ)) ε̂)`.
fn classical_ddpm_sampling(model: &NoiseModel, sched: &DiscreteSchedule, n: usize, seed: u64) -> Vec<f64> {
    let mut rngs: Vec<_> = (0..n).map(|i| point_stream(seed, Stream::Chain, i)).collect();
    let mut x: Vec<f64> = rngs.iter_mut().map(|r| StandardNormal.sample(r)).collect();
    let steps = sched.steps();
    for t in (1..=steps).rev() {
        let xa = Array2::from_shape_vec((n, 1), x.clone()).unwrap();
        let eps = model.forward(xa.view(), &vec![t as f64 / steps as f64; n], &vec![0; n]).unwrap();
        let (beta, abar) = (sched.beta(t), sched.alpha_bar(t));
        for i in 0..n {
            let mean = 1.0 / (1.0 - beta).sqrt() * (x[i] - beta / (1.0 - abar).sqrt() * eps[[i, 0]]);
            let z: f64 = StandardNormal.sample(&mut rngs[i]);
            x[i] = mean + beta.sqrt() * z;
        }
    }
    x
}

/// Euler–Maruyama on `dx = (f x + (g²/σ) ε̂) dt + g dw` backwards from 1.
fn classical_sgm_sampling(model: &NoiseModel, sde: &SdeSchedule, steps: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rngs: Vec<_> = (0..n).map(|i| point_stream(seed, Stream::Chain, i)).collect();
    let mut x: Vec<f64> = rngs.iter_mut().map(|r| StandardNormal.sample(r)).collect();
    let dt = (1.0 - T_MIN) / steps as f64;
    for k in 0..steps {
        let t = 1.0 - k as f64 * dt;
        let integral = sde.beta0 * t + 0.5 * (sde.beta1 - sde.beta0) * t * t;
        let sigma = (-(-integral).exp_m1()).sqrt();
        let beta = sde.beta0 + (sde.beta1 - sde.beta0) * t;
        let f = -0.5 * beta;
        let xa = Array2::from_shape_vec((n, 1), x.clone()).unwrap();
        let eps = model.forward(xa.view(), &vec![t; n], &vec![0; n]).unwrap();
        for i in 0..n {
            let z: f64 = StandardNormal.sample(&mut rngs[i]);
            x[i] += -dt * (f * x[i] + beta / sigma * eps[[i, 0]]) + beta.sqrt() * dt.sqrt() * z;
        }
    }
    x
}

fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

fn criterion_5() -> Outcome {
    let seed = 5;
    let data = sample_gmm(&GmmParams::paper_bimodal(), 96, seed).unwrap();
    let values = data.column(0);
    let prior = MixturePrior::standard(1, 1.0).unwrap();
    let net = NetConfig { hidden: vec![32, 32], ..NetConfig::standard(1, 1) };
    let steps = 300;
    let mut details = Vec::new();
    let mut ok = true;

    let sched = linear_ddpm_schedule(100, 1e-3, 0.2).unwrap();
    let init = NoiseModel::new(net.clone(), seed).unwrap();
    let cfg = TrainConfig::new(ModelKind::MixDdpm, steps, seed);
    let (mixed, mixed_losses) = train_mixddpm(&data, &prior, &sched, init.clone(), &cfg).unwrap();
    let (classical, classical_losses) = classical_training(&values, init, steps, seed, |rng| {
        let t = rng.random_range(1..=sched.steps());
        let abar = sched.alpha_bar(t);
        (abar.sqrt(), (1.0 - abar).sqrt(), t as f64 / sched.steps() as f64)
    });
    let samples_mixed = sample_mixddpm(&mixed, &prior, &sched, 200, seed, true).unwrap().points.column(0).to_vec();
    let samples_classical = classical_ddpm_sampling(&classical, &sched, 200, seed);
    let same = bits(&mixed_losses.losses) == bits(&classical_losses)
        && mixed.tensors() == classical.tensors()
        && bits(&samples_mixed) == bits(&samples_classical);
    ok &= same;
    details.push(format!("DDPM losses/parameters/samples identical: {same}"));

    let sde = SdeSchedule::paper_default();
    let init = NoiseModel::new(net, seed).unwrap();
    let cfg = TrainConfig::new(ModelKind::MixSgm, steps, seed);
    let (mixed, mixed_losses) = train_mixsgm(&data, &prior, &sde, init.clone(), &cfg).unwrap();
    let (classical, classical_losses) = classical_training(&values, init, steps, seed, |rng| {
        let t = (1.0 - rng.random::<f64>()).max(T_MIN);
        let integral = sde.beta0 * t + 0.5 * (sde.beta1 - sde.beta0) * t * t;
        ((-0.5 * integral).exp(), (-(-integral).exp_m1()).sqrt(), t)
    });
    let samples_mixed =
        sample_mixsgm_euler(&mixed, &prior, &sde, 50, 200, seed, SdeVariant::Plain).unwrap().points.column(0).to_vec();
    let samples_classical = classical_sgm_sampling(&classical, &sde, 50, 200, seed);
    let same = bits(&mixed_losses.losses) == bits(&classical_losses)
        && mixed.tensors() == classical.tensors()
        && bits(&samples_mixed) == bits(&samples_classical);
    ok &= same;
    details.push(format!("SGM losses/parameters/samples identical: {same}"));
    outcome(ok, details.join("; "))
}

// Criterion 6 -------------------------------------------------------------

fn criterion_6() -> Outcome {
    let mut rng = substream(606, Stream::Init);
    let mut worst: f64 = 0.0;
    let mut coords = 0;
    for _ in 0..5 {
        let dim = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let cfg = NetConfig {
            dim,
            hidden: vec![rng.random_range(4..=16), rng.random_range(4..=16), rng.random_range(4..=16)],
            time_embed_dim: 8,
            center_embed_dim: 4,
            num_centers: k,
            zero_init_output: false,
        };
        let model = NoiseModel::new(cfg, rng.random()).unwrap();
        let n = 16;
        let batch = TrainingBatch {
            x: Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(&mut rng)),
            t: (0..n).map(|_| rng.random::<f64>()).collect(),
            j: (0..n).map(|_| rng.random_range(0..k)).collect(),
            target: Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(&mut rng)),
            weights: vec![1.0; n],
        };
        let r = grad_check(&model, &batch, 1e-4).unwrap();
        worst = worst.max(r.max_rel_error);
        coords += r.coordinates;
        if worst > 1e-4 {
            break;
        }
    }
    let cfg = NetConfig { hidden: vec![8, 8], time_embed_dim: 8, center_embed_dim: 4, ..NetConfig::standard(2, 2) };
    let model = NoiseModel::new(NetConfig { zero_init_output: false, ..cfg }, 1).unwrap();
    let batch = TrainingBatch {
        x: Array2::from_shape_fn((8, 2), |_| StandardNormal.sample(&mut rng)),
        t: (0..8).map(|_| rng.random::<f64>()).collect(),
        j: (0..8).map(|i| i % 2).collect(),
        target: Array2::from_shape_fn((8, 2), |_| StandardNormal.sample(&mut rng)),
        weights: vec![1.0; 8],
    };
    let (_, mut grads) = model.loss_and_grad(&batch).unwrap();
    grads.layers[1].weight[[3, 5]] *= 1.5;
    grads.layers[1].weight[[3, 5]] += 1e-3;
    let corrupted = grad_check_with(&model, &batch, &grads, 1e-4).unwrap().max_rel_error;
    outcome(
        worst <= 1e-4 && corrupted > 1e-2,
        format!("max relative error {worst:.2e} over {coords} coordinates (need <= 1e-4); corrupted gradient {corrupted:.2e} (need > 1e-2)"),
    )
}

// Criterion 7 -------------------------------------------------------------

fn criterion_7() -> Outcome {
    let sched = linear_ddpm_schedule(50, 1e-3, 0.1).unwrap();
    let (x0, c) = (1.3, -0.7);
    let chains = 100_000;
    let mut rng = substream(7, Stream::Noise);
    let mut finals = Vec::with_capacity(chains);
    for _ in 0..chains {
        let mut x = x0;
        for t in 1..=sched.steps() {
            let beta = sched.beta(t);
            let z: f64 = StandardNormal.sample(&mut rng);
            x = (1.0 - beta).sqrt() * (x - c) + c + beta.sqrt() * z;
        }
        finals.push(x);
    }
    let n = chains as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let m4 = finals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let abar: f64 = (1..=sched.steps()).map(|t| 1.0 - sched.beta(t)).product();
    let expected_mean = abar.sqrt() * (x0 - c) + c;
    let expected_var = 1.0 - abar;
    let z_mean = (mean - expected_mean) / (var / n).sqrt();
    let z_var = (var - expected_var) / ((m4 - var * var) / n).sqrt();
    outcome(
        z_mean.abs() <= 5.0 && z_var.abs() <= 5.0,
        format!(
            "mean {mean:.5} vs {expected_mean:.5} ({z_mean:+.2} se), variance {var:.5} vs {expected_var:.5} ({z_var:+.2} se)"
        ),
    )
}

// Criterion 8 -------------------------------------------------------------

/// All multisets of size 1..=6 over {0..4}, as sorted vectors.
fn multisets() -> Vec<Vec<u32>> {
    fn extend(prefix: &mut Vec<u32>, min: u32, left: usize, out: &mut Vec<Vec<u32>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for v in min..=4 {
            prefix.push(v);
            extend(prefix, v, left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for size in 1..=6 {
        extend(&mut Vec::new(), 0, size, &mut out);
    }
    out
}

/// Minimum-cost transport between integer supplies and demands on grid
/// points 0..=4 with cost |i − j|, by successive shortest paths on the
/// residual graph of the complete bipartite network.
fn min_cost_transport(supply: &[i64; 5], demand: &[i64; 5]) -> i64 {
    // nodes: 0 source, 1..=5 supply, 6..=10 demand, 11 sink
    const N: usize = 12;
    let mut cap = [[0i64; N]; N];
    let mut cost = [[0i64; N]; N];
    for i in 0..5 {
        cap[0][1 + i] = supply[i];
        cap[6 + i][11] = demand[i];
        for j in 0..5 {
            cap[1 + i][6 + j] = i64::MAX / 4;
            let c = (i as i64 - j as i64).abs();
            cost[1 + i][6 + j] = c;
            cost[6 + j][1 + i] = -c;
        }
    }
    let mut total = 0;
    loop {
        let mut dist = [i64::MAX; N];
        let mut prev = [usize::MAX; N];
        dist[0] = 0;
        for _ in 0..N {
            let mut changed = false;
            for u in 0..N {
                if dist[u] == i64::MAX {
                    continue;
                }
                for v in 0..N {
                    if cap[u][v] > 0 && dist[u] + cost[u][v] < dist[v] {
                        dist[v] = dist[u] + cost[u][v];
                        prev[v] = u;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[11] == i64::MAX {
            return total;
        }
        let mut push = i64::MAX;
        let mut v = 11;
        while v != 0 {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = 11;
        while v != 0 {
            let u = prev[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
        total += push * dist[11];
    }
}

fn counts(sample: &[u32]) -> [i64; 5] {
    let mut c = [0i64; 5];
    for &v in sample {
        c[v as usize] += 1;
    }
    c
}

fn criterion_8() -> Outcome {
    let sets = multisets();
    let floats: Vec<Vec<f64>> = sets.iter().map(|s| s.iter().map(|&v| v as f64).collect()).collect();
    let (mut w1_err, mut ks2_err, mut ks1_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut pairs = 0usize;
    // one-sample reference: uniform on [-0.5, 4.5]
    let uniform = |x: f64| ((x + 0.5) / 5.0).clamp(0.0, 1.0);
    for (a, fa) in sets.iter().zip(&floats) {
        let ca = counts(a);
        let n = a.len() as i64;
        let mut d1: f64 = 0.0;
        for v in 0..5 {
            let below: i64 = ca[..v].iter().sum();
            let upto = below + ca[v];
            let f = uniform(v as f64);
            d1 = d1.max((upto as f64 / n as f64 - f).abs()).max((below as f64 / n as f64 - f).abs());
        }
        ks1_err = ks1_err.max((ks_one_sample(fa, uniform).unwrap() - d1).abs());
        for (b, fb) in sets.iter().zip(&floats) {
            let cb = counts(b);
            let m = b.len() as i64;
            let supply = ca.map(|c| c * m);
            let demand = cb.map(|c| c * n);
            let lp = min_cost_transport(&supply, &demand) as f64 / (n * m) as f64;
            w1_err = w1_err.max((w1_distance(fa, fb).unwrap() - lp).abs());
            let mut d2: f64 = 0.0;
            let (mut sa, mut sb) = (0, 0);
            for v in 0..5 {
                sa += ca[v];
                sb += cb[v];
                d2 = d2.max((sa as f64 / n as f64 - sb as f64 / m as f64).abs());
            }
            ks2_err = ks2_err.max((ks_two_sample(fa, fb).unwrap() - d2).abs());
            pairs += 1;
        }
    }
    let ok = w1_err <= 1e-12 && ks2_err <= 1e-12 && ks1_err <= 1e-12;
    outcome(
        ok,
        format!(
            "{} samples, {pairs} pairs: max |W1 - LP| {w1_err:.1e}, max two-sample K-S error {ks2_err:.1e}, max one-sample K-S error {ks1_err:.1e}",
            sets.len()
        ),
    )
}

// Criterion 9 -------------------------------------------------------------

fn criterion_9() -> Outcome {
    let sde = SdeSchedule::paper_default();
    let steps = 400;
    let n = 10_000;
    let prior = MixturePrior::standard(1, 1.0).unwrap();
    let run = sample_mixsgm_euler(&ZeroNoise { dim: 1, num_centers: 1 }, &prior, &sde, steps, n, 9, SdeVariant::Plain).unwrap();
    let xs = run.points.column(0).to_vec();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);

    // Covariance of the simulated backward OU chain:
    // x ← (1 + ½β_t Δ) x + √(β_t Δ) z, started from unit variance.
    let dt = (1.0 - T_MIN) / steps as f64;
    let mut v_chain = 1.0;
    for k in 0..steps {
        let t = 1.0 - k as f64 * dt;
        let beta = sde.beta0 + (sde.beta1 - sde.beta0) * t;
        v_chain = (1.0 + 0.5 * beta * dt).powi(2) * v_chain + beta * dt;
    }
    // Continuous-time backward OU from t = 1 to T_MIN: 2 exp(∫β) − 1.
    let integral = |t: f64| sde.beta0 * t + 0.5 * (sde.beta1 - sde.beta0) * t * t;
    let v_continuous = 2.0 * (integral(1.0) - integral(T_MIN)).exp() - 1.0;
    let rel = var / v_chain - 1.0;
    outcome(
        rel.abs() <= 0.05,
        format!(
            "terminal variance {var:.4e} vs chain covariance {v_chain:.4e} (relative {rel:+.4}, need |.| <= 0.05); continuous-time OU {v_continuous:.4e}, ratio {:.3}",
            var / v_continuous
        ),
    )
}
