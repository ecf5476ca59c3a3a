//! End-to-end runs: data, prior selection, training, sampling, evaluation.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mixdiff_core::datasets::{
    detrend_normalize, load_series_csv, DataLaw, GammaMixtureParams, GmmParams, SampleSet,
};
use mixdiff_core::metrics::{
    ks_one_sample, ks_two_sample, relative_error, reverse_effort_report, w1_distance, EffortReport, Histogram,
    MetricsReport,
};
use mixdiff_core::net::{fingerprint, Checkpoint, NetConfig, NoiseModel};
use mixdiff_core::prior::{
    centers_from_labels, estimate_variances, estimate_weights, kmeans, select_centers_auto, MixturePrior,
    KMEANS_MAX_ITER, VARIANCE_FLOOR,
};
use mixdiff_core::sample::{sample_mixddpm, sample_mixsgm_euler, SampleRun, SdeVariant};
use mixdiff_core::schedules::{linear_ddpm_schedule, SdeSchedule};
use mixdiff_core::train::{train_mixddpm, train_mixsgm, LossTrace, ModelKind, TrainConfig};

use crate::config::{DataSource, KPolicy, RunConfig};

/// Training data and whatever the generated samples are compared against.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: SampleSet,
    pub eval: Evaluation,
}

#[derive(Debug, Clone)]
pub enum Evaluation {
    /// A known law: W1 against a large reference sample, K-S against the CDF.
    Law { law: DataLaw, reference: Vec<f64> },
    /// A held-out window: both metrics are two-sample.
    Test { test: Vec<f64> },
}

impl Evaluation {
    pub fn metrics(&self, generated: &[f64]) -> Result<MetricsReport> {
        let (w1, ks) = match self {
            Evaluation::Law { law, reference } => (w1_distance(generated, reference)?, ks_one_sample(generated, |x| law.cdf(x))?),
            Evaluation::Test { test } => (w1_distance(generated, test)?, ks_two_sample(generated, test)?),
        };
        Ok(MetricsReport { w1, ks, w1_relative_error: None, ks_relative_error: None })
    }

    pub fn reference(&self) -> &[f64] {
        match self {
            Evaluation::Law { reference, .. } => reference,
            Evaluation::Test { test } => test,
        }
    }
}

pub fn prepare_data(cfg: &RunConfig, seed: u64) -> Result<Prepared> {
    let law = match cfg.data {
        DataSource::Gmm => DataLaw::Gmm(GmmParams::paper_bimodal()),
        DataSource::GammaMixture => DataLaw::GammaMixture(GammaMixtureParams::paper_bimodal()),
        DataSource::Csv => {
            let path = cfg.csv_path.as_ref().context("csv_path is required for csv data")?;
            let series = load_series_csv(path).with_context(|| format!("reading {}", path.display()))?;
            if cfg.csv_offset > series.len() {
                bail!("csv_offset {} exceeds series length {}", cfg.csv_offset, series.len());
            }
            let (train, test, _) = detrend_normalize(&series[cfg.csv_offset..], cfg.train_len, cfg.test_len)?;
            let test = test.context("csv experiments need test_len > 0")?;
            return Ok(Prepared { train, eval: Evaluation::Test { test: test.column(0) } });
        }
    };
    let train = law.sample(cfg.n_train, seed)?;
    let reference = law.sample_reference(cfg.n_reference, seed)?.column(0);
    Ok(Prepared { train, eval: Evaluation::Law { law, reference } })
}

/// Centers per the configured policy, weights from dispatch frequencies,
/// and for the variance model the floored within-cell variances.
pub fn select_prior(cfg: &RunConfig, train: &SampleSet, seed: u64) -> Result<MixturePrior> {
    let centers = match cfg.k_policy {
        KPolicy::Fixed => kmeans(train, cfg.k, seed, KMEANS_MAX_ITER)?,
        KPolicy::Auto => select_centers_auto(train, cfg.k_max, seed)?.1,
        KPolicy::Labels => {
            let labels = train.labels().context("k_policy labels needs labeled data")?;
            centers_from_labels(train, labels)?.0
        }
    };
    let weights = estimate_weights(train, &centers)?;
    let variances = match cfg.model {
        ModelKind::MixSgmVar => variance_estimates(train, &centers)?,
        _ => vec![1.0; centers.len()],
    };
    Ok(MixturePrior::new(centers, weights, variances)?)
}

fn variance_estimates(train: &SampleSet, centers: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(estimate_variances(train, centers)?.into_iter().map(|v| v.max(VARIANCE_FLOOR)).collect())
}

/// One trained and sampled model.
#[derive(Debug, Clone)]
pub struct LegOutcome {
    pub prior: MixturePrior,
    pub loss: LossTrace,
    pub run: SampleRun,
    pub metrics: MetricsReport,
    pub checkpoint: Checkpoint,
}

pub fn run_leg(cfg: &RunConfig, data: &Prepared, prior: &MixturePrior, seed: u64) -> Result<LegOutcome> {
    let net = NetConfig { hidden: cfg.hidden.clone(), ..NetConfig::standard(data.train.dim(), prior.k()) };
    let model = NoiseModel::new(net, seed)?;
    let tc = TrainConfig {
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        ..TrainConfig::new(cfg.model, cfg.train_steps, seed)
    };
    let (model, loss, run, schedule_fp) = match cfg.model {
        ModelKind::MixDdpm => {
            let sched = linear_ddpm_schedule(cfg.ddpm_steps, cfg.beta_first, cfg.beta_last)?;
            let (model, loss) = train_mixddpm(&data.train, prior, &sched, model, &tc)?;
            let run = sample_mixddpm(&model, prior, &sched, cfg.n_generate, seed, cfg.final_step_noise)?;
            (model, loss, run, fingerprint(&sched))
        }
        ModelKind::MixSgm | ModelKind::MixSgmVar => {
            let sde = SdeSchedule::new(cfg.sde_beta0, cfg.sde_beta1)?;
            let (model, loss) = train_mixsgm(&data.train, prior, &sde, model, &tc)?;
            let variant = if cfg.model == ModelKind::MixSgmVar { SdeVariant::Var } else { SdeVariant::Plain };
            let run = sample_mixsgm_euler(&model, prior, &sde, cfg.sde_steps, cfg.n_generate, seed, variant)?;
            (model, loss, run, fingerprint(&sde))
        }
    };
    let metrics = data.eval.metrics(&run.points.column(0).to_vec())?;
    let checkpoint = Checkpoint::capture(&model, schedule_fp, fingerprint(prior));
    Ok(LegOutcome { prior: prior.clone(), loss, run, metrics, checkpoint })
}

fn write_leg(dir: &Path, leg: &LegOutcome, reference: &[f64], bins: usize) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("metrics.json"), to_json(&leg.metrics)?)?;
    leg.loss.write_csv(&dir.join("loss.csv"))?;
    leg.run.write_csv(&dir.join("samples.csv"))?;
    let hist = Histogram::pooled(&leg.run.points.column(0).to_vec(), reference, bins)?;
    fs::write(dir.join("hist.csv"), hist.to_csv())?;
    leg.prior.save(&dir.join("prior.json"))?;
    leg.checkpoint.save(&dir.join("checkpoint.json"))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub k: usize,
    pub centers: Vec<Vec<f64>>,
    pub mixed: MetricsReport,
    pub baseline: MetricsReport,
    /// Training window against the test window (series data only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<MetricsReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medians {
    pub w1: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub model: ModelKind,
    pub data: DataSource,
    pub runs: Vec<SeedReport>,
    pub median_mixed: Medians,
    pub median_baseline: Medians,
    /// Median mixed over median baseline.
    pub w1_ratio: f64,
    pub ks_ratio: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn with_relative(mut m: MetricsReport, bench: Option<&MetricsReport>) -> MetricsReport {
    if let Some(b) = bench {
        m.w1_relative_error = Some(relative_error(b.w1, m.w1));
        m.ks_relative_error = Some(relative_error(b.ks, m.ks));
    }
    m
}

/// Trains and evaluates the mixed model and its single-center baseline for
/// every seed, writing per-seed artifacts and `summary.json` under
/// `cfg.out_dir`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        log::info!("{}: seed {seed}", cfg.name);
        let data = prepare_data(cfg, seed)?;
        let prior = select_prior(cfg, &data.train, seed)?;
        let baseline_prior = MixturePrior::standard(data.train.dim(), 1.0)?;
        let benchmark = match &data.eval {
            Evaluation::Test { .. } => Some(data.eval.metrics(&data.train.column(0))?),
            Evaluation::Law { .. } => None,
        };
        let mut mixed = run_leg(cfg, &data, &prior, seed).with_context(|| format!("mixed model, seed {seed}"))?;
        let mut baseline =
            run_leg(cfg, &data, &baseline_prior, seed).with_context(|| format!("baseline model, seed {seed}"))?;
        mixed.metrics = with_relative(mixed.metrics, benchmark.as_ref());
        baseline.metrics = with_relative(baseline.metrics, benchmark.as_ref());
        let dir = cfg.out_dir.join(format!("seed-{seed}"));
        write_leg(&dir.join("mixed"), &mixed, data.eval.reference(), cfg.hist_bins)?;
        write_leg(&dir.join("baseline"), &baseline, data.eval.reference(), cfg.hist_bins)?;
        log::info!(
            "seed {seed}: mixed W1 {:.4} K-S {:.4}, baseline W1 {:.4} K-S {:.4}",
            mixed.metrics.w1,
            mixed.metrics.ks,
            baseline.metrics.w1,
            baseline.metrics.ks
        );
        runs.push(SeedReport {
            seed,
            k: prior.k(),
            centers: prior.centers.clone(),
            mixed: mixed.metrics,
            baseline: baseline.metrics,
            benchmark,
        });
    }
    let med = |f: &dyn Fn(&SeedReport) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
    let median_mixed = Medians { w1: med(&|r| r.mixed.w1), ks: med(&|r| r.mixed.ks) };
    let median_baseline = Medians { w1: med(&|r| r.baseline.w1), ks: med(&|r| r.baseline.ks) };
    let summary = RunSummary {
        name: cfg.name.clone(),
        model: cfg.model,
        data: cfg.data,
        w1_ratio: median_mixed.w1 / median_baseline.w1,
        ks_ratio: median_mixed.ks / median_baseline.ks,
        runs,
        median_mixed,
        median_baseline,
    };
    fs::write(cfg.out_dir.join("summary.json"), to_json(&summary)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReeffOutput {
    pub name: String,
    pub seed: u64,
    pub prior: MixturePrior,
    /// One report per configured `σ_T`.
    pub reports: Vec<EffortReport>,
}

/// Closed-form and Monte-Carlo reverse efforts on the first seed's training
/// data; the variance extension uses the estimated within-cell variances.
pub fn cmd_reeff(cfg: &RunConfig) -> Result<ReeffOutput> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let data = prepare_data(cfg, seed)?;
    let mixed = select_prior(cfg, &data.train, seed)?;
    let prior = MixturePrior { variances: variance_estimates(&data.train, &mixed.centers)?, ..mixed };
    let reports = cfg
        .sigma_ts
        .iter()
        .map(|&s| reverse_effort_report(&data.train, &prior, s, cfg.reeff_draws, seed))
        .collect::<mixdiff_core::Result<Vec<_>>>()?;
    let out = ReeffOutput { name: cfg.name.clone(), seed, prior, reports };
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("reeff.json"), to_json(&out)?)?;
    Ok(out)
}

/// Selects centers per the configured policy on the first seed's training
/// data and writes `prior.json` with weights and within-cell variances.
pub fn cmd_cluster(cfg: &RunConfig) -> Result<MixturePrior> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let data = prepare_data(cfg, seed)?;
    let mixed = select_prior(cfg, &data.train, seed)?;
    let prior = MixturePrior { variances: variance_estimates(&data.train, &mixed.centers)?, ..mixed };
    fs::create_dir_all(&cfg.out_dir)?;
    prior.save(&cfg.out_dir.join("prior.json"))?;
    Ok(prior)
}
