use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use mixdiff_cli::selfcheck::run_checks;
use mixdiff_cli::{cmd_cluster, cmd_reeff, cmd_run, RunConfig};

#[derive(Parser)]
#[command(name = "mixdiff", version, about = "Diffusion models with Gaussian-mixture priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration (flat JSON object)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `out_dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the configured list
    #[arg(long)]
    seed_override: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed_override {
            cfg.seeds = vec![seed];
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train, sample and evaluate the mixed model and its baseline
    Run(ConfigArgs),
    /// Reverse-effort report for the configured data and prior
    Reeff(ConfigArgs),
    /// Select centers and write the prior
    Cluster(ConfigArgs),
    /// Built-in gradient, identity and metric checks
    Selfcheck,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let s = cmd_run(&cfg)?;
            println!("{:>6} {:>4} {:>10} {:>10} {:>10} {:>10}", "seed", "K", "W1 mixed", "W1 base", "K-S mixed", "K-S base");
            for r in &s.runs {
                println!(
                    "{:>6} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    r.seed, r.k, r.mixed.w1, r.baseline.w1, r.mixed.ks, r.baseline.ks
                );
                if let Some(b) = &r.benchmark {
                    println!("{:>11} benchmark W1 {:.4}, K-S {:.4}", "", b.w1, b.ks);
                }
            }
            println!(
                "{:>11} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                "median",
                s.median_mixed.w1,
                s.median_baseline.w1,
                s.median_mixed.ks,
                s.median_baseline.ks
            );
            println!("summary written to {}", cfg.out_dir.join("summary.json").display());
        }
        Command::Reeff(args) => {
            let cfg = args.load()?;
            let out = cmd_reeff(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Cluster(args) => {
            let cfg = args.load()?;
            let prior = cmd_cluster(&cfg)?;
            println!("K = {}, centers {:?}, weights {:?}", prior.k(), prior.centers, prior.weights);
            println!("prior written to {}", cfg.out_dir.join("prior.json").display());
        }
        Command::Selfcheck => {
            let checks = run_checks()?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    }
    Ok(ExitCode::SUCCESS)
}
