use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fosls::linalg::{saddle_solvers, spd_solvers, SpdSolver};
use fosls::mesh::build_unit_cylinder_mesh;
use fosls::moving_domain::{build_moving_case, solve_moving, MovingErrors};
use fosls::optimal_control::{build_manufactured_case, control_error_report, control_spaces, solve_control, ControlErrors};
use fosls::reduced_basis::{
    benchmark_problem, benchmark_truth_space, best_truth_error, expand_forms, greedy_offline, GreedyOptions,
    ReducedModel, SeparableForms,
};
use fosls::fem::FeSpace;
use fosls::registry::Registry;
use fosls::selftest;
use log::info;

use crate::config::ExperimentConfig;
use crate::output::{Cell, CsvSink, Meta};

/// Whether every check of a run held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    ChecksFailed,
}

pub trait Experiment: Send + Sync {
    /// Writes the experiment's CSV files into `cfg.out` and records
    /// per-level sizes and timings in `meta`.
    fn run(&self, cfg: &ExperimentConfig, meta: &mut Meta) -> Result<Outcome>;
}

pub fn experiments() -> Registry<dyn Experiment> {
    Registry::new("experiment")
        .with("rb-offline", "greedy training of the reduced basis benchmark", || {
            Box::new(RbOffline) as Box<dyn Experiment>
        })
        .with("rb-online", "online sweeps over the two test sets", || Box::new(RbOnline) as Box<dyn Experiment>)
        .with("control-1d", "optimal control convergence, 1+1D", || {
            Box::new(Control { dim: 1 }) as Box<dyn Experiment>
        })
        .with("control-2d", "optimal control convergence, 2+1D", || {
            Box::new(Control { dim: 2 }) as Box<dyn Experiment>
        })
        .with("moving-1d", "time-dependent domain convergence, 1+1D", || {
            Box::new(Moving { dim: 1 }) as Box<dyn Experiment>
        })
        .with("moving-2d", "time-dependent domain convergence, 2+1D", || {
            Box::new(Moving { dim: 2 }) as Box<dyn Experiment>
        })
        .with("selftest", "property checks of every module", || Box::new(SelfTest) as Box<dyn Experiment>)
}

fn spd(cfg: &ExperimentConfig) -> Result<Box<dyn SpdSolver>> {
    Ok(spd_solvers().create(&cfg.solver)?)
}

struct Benchmark {
    space: FeSpace,
    forms: SeparableForms,
}

fn benchmark(cfg: &ExperimentConfig, meta: &mut Meta) -> Result<Benchmark> {
    let t = Instant::now();
    let space = benchmark_truth_space(cfg.truth)?;
    let forms = expand_forms(&benchmark_problem(), &space)?;
    meta.set("truth_ndof", space.n_free());
    meta.set("assembly_seconds", t.elapsed().as_secs_f64());
    Ok(Benchmark { space, forms })
}

fn train(cfg: &ExperimentConfig, b: &Benchmark, meta: &mut Meta) -> Result<ReducedModel> {
    let domain = benchmark_problem().domain;
    let training = domain.grid(cfg.grid);
    let options = GreedyOptions {
        tolerance: cfg.tol,
        max_basis: cfg.max_basis,
        estimator: cfg.estimator,
    };
    let t = Instant::now();
    let model = greedy_offline(&b.forms, &b.space, domain, &training, &options, spd(cfg)?.as_ref())?;
    meta.set("training_points", training.len());
    meta.set("offline_seconds", t.elapsed().as_secs_f64());
    meta.set("N", model.n_basis());
    meta.set("stop", format!("{:?}", model.history.stop));
    let dir = &cfg.model;
    model.save(dir).with_context(|| format!("saving model to {}", dir.display()))?;
    info!("saved reduced model with N = {} to {}", model.n_basis(), dir.display());
    Ok(model)
}

struct RbOffline;

impl Experiment for RbOffline {
    fn run(&self, cfg: &ExperimentConfig, meta: &mut Meta) -> Result<Outcome> {
        let b = benchmark(cfg, meta)?;
        let model = train(cfg, &b, meta)?;
        let mut sink = CsvSink::create(&cfg.out.join("rb_offline.csv"), "N,maxtrain")?;
        for (n, m) in model.history.max_estimator.iter().enumerate() {
            sink.row(&[Cell::Int(n), Cell::Real(*m)])?;
        }
        Ok(Outcome::Passed)
    }
}

struct RbOnline;

impl Experiment for RbOnline {
    fn run(&self, cfg: &ExperimentConfig, meta: &mut Meta) -> Result<Outcome> {
        let b = benchmark(cfg, meta)?;
        let dir = &cfg.model;
        let model = if dir.join("model.json").exists() {
            let m = ReducedModel::load(dir).with_context(|| format!("loading model from {}", dir.display()))?;
            if m.n_truth != b.space.n_free() {
                bail!(
                    "model in {} was trained on {} truth unknowns, this configuration has {}",
                    dir.display(),
                    m.n_truth,
                    b.space.n_free()
                );
            }
            meta.set("N", m.n_basis());
            m
        } else {
            train(cfg, &b, meta)?
        };
        let solver = spd(cfg)?;
        let mut sink = CsvSink::create(&cfg.out.join("rb_online.csv"), "A,est_A,err_A,b,est_b,err_b")?;
        let t = Instant::now();
        let step = |i: usize| if cfg.points == 1 { 0.0 } else { i as f64 / (cfg.points - 1) as f64 };
        for i in 0..cfg.points {
            let (a, bb) = (0.5 + step(i), step(i));
            let mut cells = Vec::with_capacity(6);
            for (x, mu) in [(a, [a, 0.0, 0.0]), (bb, [0.5, bb, 0.75])] {
                let est = model.online_solve(&mu)?.estimator;
                let (_, err) = best_truth_error(&b.forms, &b.space, &mu, solver.as_ref())?;
                cells.extend([Cell::Real(x), Cell::Real(est), Cell::Real(err)]);
            }
            sink.row(&cells)?;
        }
        meta.set("online_seconds", t.elapsed().as_secs_f64());
        Ok(Outcome::Passed)
    }
}

struct Control {
    dim: usize,
}

impl Experiment for Control {
    fn run(&self, cfg: &ExperimentConfig, meta: &mut Meta) -> Result<Outcome> {
        let case = build_manufactured_case(self.dim, cfg.rho).context("unsupported dimension")?;
        let solver = saddle_solvers().create(&cfg.saddle_solver)?;
        let name = format!("control_{}d.csv", self.dim);
        let mut sink = CsvSink::create(&cfg.out.join(name), ControlErrors::HEADER)?;
        let mut mesh = build_unit_cylinder_mesh(self.dim, "control-init")?.refine_uniform_times(cfg.first_level)?;
        for level in cfg.level_range() {
            if level > cfg.first_level {
                mesh = mesh.refine_uniform()?;
            }
            let t = Instant::now();
            let (u, z) = control_spaces(Arc::new(mesh.clone()));
            let sol = solve_control(&case.problem, &u, &z, solver.as_ref())?;
            let e = control_error_report(&case, &u, &z, &sol);
            let secs = t.elapsed().as_secs_f64();
            info!("level {level}: {} unknowns, {secs:.2} s", sol.ndof);
            meta.set(format!("level.{level}.ndof"), sol.ndof);
            meta.set(format!("level.{level}.iterations"), sol.iterations);
            meta.set(format!("level.{level}.residual"), format!("{:e}", sol.residual));
            meta.set(format!("level.{level}.seconds"), secs);
            let mut cells = vec![Cell::Int(e.ndof)];
            cells.extend(e.row()[1..].iter().map(|v| Cell::Real(*v)));
            sink.row(&cells)?;
        }
        meta.set("rows", sink.rows());
        Ok(Outcome::Passed)
    }
}

struct Moving {
    dim: usize,
}

impl Experiment for Moving {
    fn run(&self, cfg: &ExperimentConfig, meta: &mut Meta) -> Result<Outcome> {
        let case = build_moving_case(self.dim).context("unsupported dimension")?;
        let solver = spd(cfg)?;
        let name = format!("moving_{}d.csv", self.dim);
        let mut sink = CsvSink::create(&cfg.out.join(name), MovingErrors::HEADER)?;
        for level in cfg.level_range() {
            let t = Instant::now();
            let (_, _, e) = solve_moving(&case, level, solver.as_ref())?;
            let secs = t.elapsed().as_secs_f64();
            info!("level {level}: {} unknowns, {secs:.2} s", e.ndof);
            meta.set(format!("level.{level}.ndof"), e.ndof);
            meta.set(format!("level.{level}.seconds"), secs);
            let mut cells = vec![Cell::Int(e.ndof)];
            cells.extend(e.row()[1..].iter().map(|v| Cell::Real(*v)));
            sink.row(&cells)?;
        }
        meta.set("rows", sink.rows());
        Ok(Outcome::Passed)
    }
}

struct SelfTest;

impl Experiment for SelfTest {
    fn run(&self, cfg: &ExperimentConfig, meta: &mut Meta) -> Result<Outcome> {
        let checks = selftest::run_all(cfg.seed)?;
        let mut sink = CsvSink::create(&cfg.out.join("selftest.csv"), "check,value,tolerance,passed")?;
        let mut failed = 0;
        for c in &checks {
            let ok = c.passed();
            failed += usize::from(!ok);
            println!("{} {:<48} {:.3e} (tolerance {:.0e})", if ok { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
            sink.row(&[
                Cell::Text(c.name.clone()),
                Cell::Real(c.value),
                Cell::Real(c.tolerance),
                Cell::Int(usize::from(ok)),
            ])?;
        }
        meta.set("checks", checks.len());
        meta.set("failed", failed);
        Ok(if failed == 0 { Outcome::Passed } else { Outcome::ChecksFailed })
    }
}
