mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fosls::linalg::{saddle_solvers, spd_solvers};
use log::{error, info};

use config::ExperimentConfig;
use experiments::{experiments, Outcome};
use output::Meta;

#[derive(Parser)]
#[command(name = "fosls", version, about = "Space-time least-squares experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files and `meta`.
    Run(RunArgs),
    /// List experiments and solver strategies.
    List,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    /// rb-offline, rb-online, control-1d, control-2d, moving-1d, moving-2d or selftest.
    experiment: String,
    /// Plain-text `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of refinement levels (one CSV row each).
    #[arg(long)]
    levels: Option<usize>,
    /// Coarsest refinement level.
    #[arg(long)]
    first_level: Option<usize>,
    /// Training points per parameter direction.
    #[arg(long)]
    grid: Option<usize>,
    /// Truth intervals per direction.
    #[arg(long)]
    truth: Option<usize>,
    /// Greedy tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_basis: Option<usize>,
    /// Points per online sweep.
    #[arg(long)]
    points: Option<usize>,
    /// Control regularization weight.
    #[arg(long)]
    rho: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reduced model directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// SPD solver (cholesky, cg).
    #[arg(long)]
    solver: Option<String>,
    /// Saddle solver (direct, minres, reduced-cg).
    #[arg(long)]
    saddle_solver: Option<String>,
    /// Online estimator (stable, separable).
    #[arg(long)]
    estimator: Option<String>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for the random samples of the property checks.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::defaults(&self.experiment)?;
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags: [(&str, Option<String>); 15] = [
            ("levels", self.levels.map(|v| v.to_string())),
            ("first_level", self.first_level.map(|v| v.to_string())),
            ("grid", self.grid.map(|v| v.to_string())),
            ("truth", self.truth.map(|v| v.to_string())),
            ("tol", self.tol.map(|v| v.to_string())),
            ("max_basis", self.max_basis.map(|v| v.to_string())),
            ("points", self.points.map(|v| v.to_string())),
            ("rho", self.rho.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("model", self.model.as_ref().map(|p| p.display().to_string())),
            ("solver", self.solver.clone()),
            ("saddle_solver", self.saddle_solver.clone()),
            ("estimator", self.estimator.clone()),
            ("threads", self.threads.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        Ok(cfg)
    }
}

fn list() {
    println!("experiments:");
    for (name, summary) in experiments().describe() {
        println!("  {name:<12} {summary}");
    }
    println!("solvers:");
    for (name, summary) in spd_solvers().describe() {
        println!("  {name:<12} {summary}");
    }
    println!("saddle solvers:");
    for (name, summary) in saddle_solvers().describe() {
        println!("  {name:<12} {summary}");
    }
}

fn run(args: &RunArgs) -> ExitCode {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let experiment = experiments().create(&cfg.experiment).expect("validated experiment name");
    info!("configuration:\n{cfg}");

    let mut meta = Meta::default();
    meta.set("experiment", &cfg.experiment);
    meta.set("version", env!("CARGO_PKG_VERSION"));
    for (k, v) in cfg.entries() {
        meta.set(format!("config.{k}"), v);
    }
    meta.set("started", chrono::Utc::now().to_rfc3339());
    let t = Instant::now();
    let result = experiment.run(&cfg, &mut meta);
    meta.set("finished", chrono::Utc::now().to_rfc3339());
    meta.set("wall_seconds", t.elapsed().as_secs_f64());
    let code = match &result {
        Ok(Outcome::Passed) => {
            meta.set("status", "ok");
            ExitCode::SUCCESS
        }
        Ok(Outcome::ChecksFailed) => {
            meta.set("status", "checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            error!("{e:#}");
            meta.set("status", format!("error: {e:#}"));
            ExitCode::FAILURE
        }
    };
    if let Err(e) = meta.write(&cfg.out) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    code
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args),
        Command::List => {
            list();
            ExitCode::SUCCESS
        }
    }
}
