use ndarray::Array2;

use mixdiff_core::datasets::{sample_gmm, GmmParams};
use mixdiff_core::net::{optimizer_step, Adam, NetConfig, NoiseModel, TrainingBatch};
use mixdiff_core::prior::{estimate_variances, estimate_weights, kmeans, MixturePrior, KMEANS_MAX_ITER, VARIANCE_FLOOR};
use mixdiff_core::rng::{substream, Stream};
use mixdiff_core::schedules::SdeSchedule;
use mixdiff_core::train::{make_xt_ddpm, train_mixsgm, ModelKind, TrainConfig};
use rand_distr::{Distribution, StandardNormal};

fn small_net(k: usize) -> NetConfig {
    NetConfig { dim: 1, hidden: vec![32, 32], time_embed_dim: 8, center_embed_dim: 4, num_centers: k, zero_init_output: true }
}

#[test]
fn ddpm_marginal_matches_closed_form() {
    let (x0, c, abar) = (1.5, -0.4, 0.36);
    let n = 100_000;
    let mut rng = substream(21, Stream::Noise);
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            make_xt_ddpm(&[x0], &[c], &[e], abar)[0]
        })
        .collect();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    // N(0.6 (1.5 + 0.4) − 0.4, 0.64)
    assert!((mean - 0.74).abs() < 5.0 * (var / nf).sqrt(), "mean {mean}");
    assert!((var - 0.64).abs() < 5.0 * ((m4 - var * var) / nf).sqrt(), "variance {var}");
}

#[test]
fn variance_extension_training_reduces_loss() {
    let data = sample_gmm(&GmmParams::paper_bimodal(), 256, 2).unwrap();
    let centers = kmeans(&data, 2, 2, KMEANS_MAX_ITER).unwrap();
    let weights = estimate_weights(&data, &centers).unwrap();
    let variances = estimate_variances(&data, &centers).unwrap().into_iter().map(|v| v.max(VARIANCE_FLOOR)).collect();
    let prior = MixturePrior::new(centers, weights, variances).unwrap();
    let model = NoiseModel::new(small_net(2), 2).unwrap();
    let cfg = TrainConfig::new(ModelKind::MixSgmVar, 1500, 2);
    let (_, trace) = train_mixsgm(&data, &prior, &SdeSchedule::paper_default(), model, &cfg).unwrap();
    assert!(trace.losses.iter().all(|l| l.is_finite() && *l >= 0.0));
    let first = trace.median(0..100).unwrap();
    let last = trace.median(1400..1500).unwrap();
    assert!(last < first, "first {first}, last {last}");
}

fn batch() -> TrainingBatch {
    TrainingBatch {
        x: Array2::from_shape_vec((4, 1), vec![0.3, -1.2, 0.8, 2.0]).unwrap(),
        t: vec![0.1, 0.4, 0.7, 0.9],
        j: vec![0, 1, 1, 0],
        target: Array2::from_shape_vec((4, 1), vec![1.0, -0.5, 0.2, 0.9]).unwrap(),
        weights: vec![1.0; 4],
    }
}

#[test]
fn zero_gradient_leaves_parameters() {
    let mut model = NoiseModel::new(NetConfig { zero_init_output: false, ..small_net(2) }, 3).unwrap();
    let before = model.clone();
    let grads = model.zero_gradients();
    let mut opt = Adam::new(&model, 1e-3);
    optimizer_step(&mut model, &grads, &mut opt).unwrap();
    assert_eq!(model, before);
    assert_eq!(opt.steps_taken(), 1);
}

#[test]
fn one_step_descends() {
    let mut model = NoiseModel::new(NetConfig { zero_init_output: false, ..small_net(2) }, 4).unwrap();
    let b = batch();
    let (loss, grads) = model.loss_and_grad(&b).unwrap();
    let mut opt = Adam::new(&model, 1e-4);
    optimizer_step(&mut model, &grads, &mut opt).unwrap();
    assert!(model.loss(&b).unwrap() < loss);
}

#[test]
fn identical_runs_are_bit_identical() {
    let run = || {
        let mut model = NoiseModel::new(small_net(2), 5).unwrap();
        let mut opt = Adam::new(&model, 1e-3);
        for _ in 0..20 {
            let (_, grads) = model.loss_and_grad(&batch()).unwrap();
            optimizer_step(&mut model, &grads, &mut opt).unwrap();
        }
        model
    };
    assert_eq!(run(), run());
}

#[test]
fn mismatched_gradients_are_rejected() {
    let mut model = NoiseModel::new(small_net(2), 6).unwrap();
    let other = NoiseModel::new(small_net(3), 6).unwrap();
    let mut opt = Adam::new(&model, 1e-3);
    assert!(optimizer_step(&mut model, &other.zero_gradients(), &mut opt).is_err());
}
