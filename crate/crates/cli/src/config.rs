use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fosls::linalg::{saddle_solvers, spd_solvers};
use fosls::reduced_basis::EstimatorKind;

/// Settings of one experiment run after defaults, config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// First uniform refinement level.
    pub first_level: usize,
    /// Number of consecutive levels, one CSV row each.
    pub levels: usize,
    /// Training points per parameter direction.
    pub grid: usize,
    /// Truth intervals per direction of the tensor grid.
    pub truth: usize,
    pub tol: f64,
    pub max_basis: usize,
    /// Sweep points per online test set.
    pub points: usize,
    pub rho: f64,
    pub out: PathBuf,
    /// Reduced model directory shared by rb-offline and rb-online.
    pub model: PathBuf,
    pub solver: String,
    pub saddle_solver: String,
    pub estimator: EstimatorKind,
    /// Worker threads; 0 keeps the runtime default.
    pub threads: usize,
    pub seed: u64,
}

pub const EXPERIMENTS: [&str; 7] = [
    "rb-offline",
    "rb-online",
    "control-1d",
    "control-2d",
    "moving-1d",
    "moving-2d",
    "selftest",
];

pub const KEYS: [&str; 15] = [
    "first_level",
    "levels",
    "grid",
    "truth",
    "tol",
    "max_basis",
    "points",
    "rho",
    "out",
    "model",
    "solver",
    "saddle_solver",
    "estimator",
    "threads",
    "seed",
];

impl ExperimentConfig {
    pub fn defaults(experiment: &str) -> Result<Self> {
        if !EXPERIMENTS.contains(&experiment) {
            bail!("unknown experiment '{experiment}' (available: {})", EXPERIMENTS.join(", "));
        }
        let (first_level, levels) = match experiment {
            "control-2d" | "moving-2d" => (1, 5),
            _ => (1, 6),
        };
        Ok(Self {
            experiment: experiment.to_string(),
            first_level,
            levels,
            grid: 17,
            truth: 64,
            tol: 1e-3,
            max_basis: 60,
            points: 11,
            rho: 0.01,
            out: PathBuf::from("results").join(experiment),
            model: PathBuf::from("results").join("rb_model"),
            solver: "cholesky".into(),
            saddle_solver: if experiment == "control-2d" { "reduced-cg" } else { "direct" }.into(),
            estimator: EstimatorKind::Stable,
            threads: 0,
            seed: 2024,
        })
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let ctx = || format!("invalid value '{v}' for '{key}'");
        match key {
            "first_level" => self.first_level = v.parse().with_context(ctx)?,
            "levels" => self.levels = v.parse().with_context(ctx)?,
            "grid" => self.grid = v.parse().with_context(ctx)?,
            "truth" => self.truth = v.parse().with_context(ctx)?,
            "tol" => self.tol = v.parse().with_context(ctx)?,
            "max_basis" => self.max_basis = v.parse().with_context(ctx)?,
            "points" => self.points = v.parse().with_context(ctx)?,
            "rho" => self.rho = v.parse().with_context(ctx)?,
            "out" => self.out = PathBuf::from(v),
            "model" => self.model = PathBuf::from(v),
            "solver" => self.solver = v.to_string(),
            "saddle_solver" => self.saddle_solver = v.to_string(),
            "estimator" => {
                self.estimator = EstimatorKind::parse(v).with_context(|| format!("unknown estimator '{v}'"))?
            }
            "threads" => self.threads = v.parse().with_context(ctx)?,
            "seed" => self.seed = v.parse().with_context(ctx)?,
            _ => bail!("unknown config key '{key}' (known: {})", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key = value", path.display(), n + 1))?;
            self.set(k.trim(), v).with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            bail!("levels must be positive");
        }
        for (name, v) in [("grid", self.grid), ("truth", self.truth), ("max_basis", self.max_basis), ("points", self.points)] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if !(self.tol > 0.0) {
            bail!("tol must be positive");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            bail!("rho must be positive and finite");
        }
        if !spd_solvers().contains(&self.solver) {
            bail!("unknown solver '{}' (available: {})", self.solver, spd_solvers().names().join(", "));
        }
        if !saddle_solvers().contains(&self.saddle_solver) {
            bail!(
                "unknown saddle solver '{}' (available: {})",
                self.saddle_solver,
                saddle_solvers().names().join(", ")
            );
        }
        Ok(())
    }

    pub fn level_range(&self) -> std::ops::Range<usize> {
        self.first_level..self.first_level + self.levels
    }

    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("first_level", self.first_level.to_string());
        m.insert("levels", self.levels.to_string());
        m.insert("grid", self.grid.to_string());
        m.insert("truth", self.truth.to_string());
        m.insert("tol", format!("{:e}", self.tol));
        m.insert("max_basis", self.max_basis.to_string());
        m.insert("points", self.points.to_string());
        m.insert("rho", format!("{:e}", self.rho));
        m.insert("out", self.out.display().to_string());
        m.insert("model", self.model.display().to_string());
        m.insert("solver", self.solver.clone());
        m.insert("saddle_solver", self.saddle_solver.clone());
        m.insert("estimator", self.estimator.name().to_string());
        m.insert("threads", self.threads.to_string());
        m.insert("seed", self.seed.to_string());
        m
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment = {}", self.experiment)?;
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg");
        std::fs::write(&path, "# comment\nlevels = 3\nrho=0.5 # inline\n\nsaddle_solver = minres\n").unwrap();
        let mut c = ExperimentConfig::defaults("control-1d").unwrap();
        c.apply_file(&path).unwrap();
        assert_eq!((c.levels, c.rho, c.saddle_solver.as_str()), (3, 0.5, "minres"));
        c.set("levels", "5").unwrap();
        assert_eq!(c.levels, 5);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = ExperimentConfig::defaults("moving-1d").unwrap();
        assert!(c.set("colour", "red").is_err());
        assert!(c.set("levels", "-1").is_err());
        assert!(c.set("estimator", "fast").is_err());
        c.set("rho", "0").unwrap();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults("moving-1d").unwrap();
        c.set("solver", "qr").unwrap();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::defaults("figures").is_err());
    }
}
