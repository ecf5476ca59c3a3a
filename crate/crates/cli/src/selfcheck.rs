//! Quick built-in consistency checks.

use anyhow::Result;
use ndarray::{array, Array2};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use mixdiff_core::datasets::{normal_cdf, SampleSet};
use mixdiff_core::metrics::{ks_one_sample, ks_two_sample, reverse_effort_report, w1_distance};
use mixdiff_core::net::{grad_check, grad_check_with, NetConfig, NoiseModel, TrainingBatch};
use mixdiff_core::prior::MixturePrior;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn random_case(rng: &mut ChaCha8Rng) -> Result<(NoiseModel, TrainingBatch)> {
    let dim = rng.random_range(1..=4);
    let k = rng.random_range(1..=3);
    let width = rng.random_range(4..=16);
    let cfg = NetConfig {
        dim,
        hidden: vec![width, rng.random_range(4..=16)],
        time_embed_dim: 8,
        center_embed_dim: 4,
        num_centers: k,
        zero_init_output: false,
    };
    let model = NoiseModel::new(cfg, rng.random())?;
    let n = 8;
    let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };
    let x = Array2::from_shape_fn((n, dim), |_| normal());
    let target = Array2::from_shape_fn((n, dim), |_| normal());
    let t = (0..n).map(|_| rng.random::<f64>()).collect();
    let j = (0..n).map(|_| rng.random_range(0..k)).collect();
    Ok((model, TrainingBatch { x, t, j, target, weights: vec![1.0; n] }))
}

pub fn run_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (model, batch) = random_case(&mut rng)?;
        worst = worst.max(grad_check(&model, &batch, 1e-4)?.max_rel_error);
    }
    out.push(check("gradient check", worst <= 1e-4, format!("max relative error {worst:.2e}")));

    let (model, batch) = random_case(&mut rng)?;
    let (_, mut grads) = model.loss_and_grad(&batch)?;
    grads.layers[0].weight[[0, 0]] += 0.5;
    let corrupted = grad_check_with(&model, &batch, &grads, 1e-4)?.max_rel_error;
    out.push(check("corrupted gradient detected", corrupted > 1e-2, format!("max relative error {corrupted:.2e}")));

    let data = SampleSet::new(array![[1.0, 0.0], [-1.0, 0.0], [1.2, 0.3], [-0.8, -0.3]], None)?;
    let prior = MixturePrior::new(vec![vec![1.1, 0.15], vec![-0.9, -0.15]], vec![0.5, 0.5], vec![1.0, 1.0])?;
    for sigma in [0.5, 1.0, 5.0] {
        let r = reverse_effort_report(&data, &prior, sigma, 100_000, 3)?;
        let z = r.identity_residual() / r.identity_stderr();
        out.push(check(
            &format!("effort identity, sigma_T = {sigma}"),
            z.abs() <= 5.0 && r.centers_are_cell_means,
            format!("residual {:.4} ({z:.2} standard errors), reduction {:.4}", r.identity_residual(), r.reduction),
        ));
    }

    let w1 = w1_distance(&[0.0, 2.0], &[1.0, 3.0])?;
    let ks2 = ks_two_sample(&[0.0], &[1.0])?;
    let ks1 = ks_one_sample(&[-1.0, 1.0], normal_cdf)?;
    let expected_ks1 = normal_cdf(1.0) - 0.5;
    out.push(check(
        "metric oracles",
        w1 == 1.0 && ks2 == 1.0 && (ks1 - expected_ks1).abs() < 1e-15,
        format!("W1 {w1}, two-sample K-S {ks2}, one-sample K-S {ks1:.6}"),
    ));
    Ok(out)
}
