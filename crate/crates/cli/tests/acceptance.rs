//! Acceptance report: runs every experiment through the `fosls` binary and
//! prints one PASS/FAIL line per criterion, followed by indented notes.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use fosls::fosls::residual_estimator;
use fosls::linalg::{saddle_solvers, CsrMatrix};
use fosls::mesh::build_unit_cylinder_mesh;
use fosls::optimal_control::{assemble_control_system, build_manufactured_case, control_spaces, solve_control_system};
use fosls::reduced_basis::{benchmark_problem, benchmark_truth_space, EstimatorKind, ReducedModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Default)]
struct Report {
    passed: usize,
    total: usize,
    notes: Vec<String>,
}

impl Report {
    /// Prints a criterion line followed by the notes gathered while checking it.
    fn line(&mut self, ok: bool, name: &str, detail: &str) {
        self.total += 1;
        self.passed += usize::from(ok);
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        for n in self.notes.drain(..) {
            println!("     note: {n}");
        }
    }

    fn note(&mut self, text: &str) {
        self.notes.push(text.to_string());
    }
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty csv")?;
        let columns = header.split(',').enumerate().map(|(i, c)| (c.to_string(), i)).collect();
        let rows = lines
            .map(|l| l.split(',').map(|c| c.parse().map_err(|e| format!("{c}: {e}"))).collect())
            .collect::<Result<_, String>>()?;
        Ok(Self { columns, rows })
    }

    fn col(&self, name: &str, rows: std::ops::Range<usize>) -> Vec<f64> {
        let c = self.columns[name];
        self.rows[rows].iter().map(|r| r[c]).collect()
    }
}

fn run(args: &[&str]) -> Result<f64, String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_fosls"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(start.elapsed().as_secs_f64())
}

fn meta(dir: &Path) -> HashMap<String, String> {
    std::fs::read_to_string(dir.join("meta"))
        .unwrap_or_default()
        .lines()
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

enum Band {
    Around(f64, f64),
    AtMost(f64),
}

impl Band {
    fn holds(&self, s: f64) -> bool {
        match *self {
            Band::Around(c, w) => (s - c).abs() <= w,
            Band::AtMost(b) => s <= b,
        }
    }
}

/// Fits every named column against `ndof` over `rows`; returns overall
/// success and a summary with failing quantities marked.
fn rate_check(t: &Table, rows: std::ops::Range<usize>, bands: &[(&str, Band)]) -> (bool, String) {
    let ndof = t.col("ndof", rows.clone());
    let mut ok = true;
    let parts: Vec<String> = bands
        .iter()
        .map(|(name, band)| {
            let s = loglog_slope(&ndof, &t.col(name, rows.clone()));
            let hold = band.holds(s);
            ok &= hold;
            format!("{name} {s:.3}{}", if hold { "" } else { " (out of band)" })
        })
        .collect();
    (ok, parts.join(", "))
}

fn pairwise(t: &Table, name: &str) -> String {
    let (n, y) = (t.col("ndof", 0..t.rows.len()), t.col(name, 0..t.rows.len()));
    n.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| format!("{:.2}", (b[1] / b[0]).ln() / (a[1] / a[0]).ln()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn rb_greedy(rep: &mut Report, root: &Path, model: &Path) {
    let name = "RB greedy (Q3 64x64 truth, 17^3 training grid, tol 1e-3)";
    let out = root.join("rb-offline");
    let smoke = root.join("rb-smoke");
    let result = (|| -> Result<(bool, String), String> {
        let secs = run(&["run", "rb-offline", "--out", s(&out), "--model", s(model)])?;
        let smoke_secs = run(&[
            "run", "rb-offline", "--truth", "16", "--grid", "5", "--tol", "1e-2", "--out", s(&smoke), "--model",
            s(&smoke.join("model")),
        ])?;
        let t = Table::read(&out.join("rb_offline.csv"))?;
        let n_rows = t.rows.len();
        let ns = t.col("N", 0..n_rows);
        let logs: Vec<f64> = t.col("maxtrain", 0..n_rows).iter().map(|v| v.ln()).collect();
        let n = n_rows - 1;
        let r = correlation(&ns, &logs);
        let last = logs[n].exp();
        let ok = (15..=30).contains(&n) && r.abs() >= 0.95 && last <= 1e-3 && secs < 1800.0 && smoke_secs < 60.0;
        Ok((ok, format!("N = {n}, |r| = {:.3}, last maxtrain = {last:.3e}, offline {secs:.0} s, smoke {smoke_secs:.1} s", r.abs())))
    })();
    report(rep, name, result);
}

fn rb_online(rep: &mut Report, root: &Path, model: &Path) {
    let name = "RB online sweeps (11 points each, est <= 1.5e-3 and est >= best truth error)";
    let out = root.join("rb-online");
    let result = (|| -> Result<(bool, String), String> {
        run(&["run", "rb-online", "--out", s(&out), "--model", s(model)])?;
        let t = Table::read(&out.join("rb_online.csv"))?;
        let rows = 0..t.rows.len();
        let mut worst_est: f64 = 0.0;
        let mut min_gap = f64::INFINITY;
        for (e, b) in [("est_A", "err_A"), ("est_b", "err_b")] {
            for (x, y) in t.col(e, rows.clone()).iter().zip(t.col(b, rows.clone())) {
                worst_est = worst_est.max(*x);
                min_gap = min_gap.min(x - y);
            }
        }
        let ok = t.rows.len() == 11 && worst_est <= 1.5e-3 && min_gap >= -1e-12;
        Ok((ok, format!("max est {worst_est:.3e}, min (est - best) {min_gap:.3e}")))
    })();
    report(rep, name, result);
}

fn rb_identity(rep: &mut Report, model_dir: &Path) {
    let name = "RB estimator identity (5 random parameters, relative 1e-6)";
    let result = (|| -> Result<(bool, String), String> {
        let mut model = ReducedModel::load(model_dir).map_err(|e| e.to_string())?;
        let space = benchmark_truth_space(64).map_err(|e| e.to_string())?;
        let problem = benchmark_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let mus: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![rng.random_range(0.5..1.5), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let deviation = |m: &ReducedModel| -> Result<f64, String> {
            let mut dev: f64 = 0.0;
            for mu in &mus {
                let online = m.online_solve(mu).map_err(|e| e.to_string())?;
                let full = space.expand(&m.reconstruct(&online.coeffs));
                let quad = residual_estimator(&problem.at(mu), &space, &full).powi(2);
                dev = dev.max((online.estimator.powi(2) - quad).abs() / quad);
            }
            Ok(dev)
        };
        model.estimator = EstimatorKind::Stable;
        let stable = deviation(&model)?;
        model.estimator = EstimatorKind::Separable;
        let separable = deviation(&model)?;
        rep.note(&format!("separable difference formula on the same model deviates by {separable:.2e}"));
        Ok((stable <= 1e-6, format!("online estimator (stable evaluation) deviates by {stable:.2e}")))
    })();
    report(rep, name, result);
}

fn control_1d(rep: &mut Report, root: &Path) {
    let name = "Control 1+1D rates over levels 3-6";
    let out = root.join("control-1d");
    let result = (|| -> Result<(bool, String), String> {
        run(&["run", "control-1d", "--first-level", "3", "--levels", "5", "--out", s(&out)])?;
        let t = Table::read(&out.join("control_1d.csv"))?;
        let m = meta(&out);
        let secs: f64 = (3..=6).filter_map(|l| m.get(&format!("level.{l}.seconds"))?.parse::<f64>().ok()).sum();
        let half = || Band::Around(-0.5, 0.1);
        let (ok, detail) = rate_check(
            &t,
            0..4,
            &[
                ("err_Y", half()),
                ("err_z1", half()),
                ("err_U", half()),
                ("err_p", half()),
                ("err_l2", Band::AtMost(-0.85)),
                ("err_0", Band::AtMost(-0.85)),
                ("err_T", Band::AtMost(-0.85)),
                ("err_J", Band::AtMost(-0.85)),
            ],
        );
        for q in ["err_z1", "err_p"] {
            rep.note(&format!("{q} pairwise slopes over levels 3-7: {}", pairwise(&t, q)));
        }
        Ok((ok && secs < 600.0, format!("{detail}; {secs:.1} s")))
    })();
    report(rep, name, result);
}

fn control_2d(rep: &mut Report, root: &Path) {
    let name = "Control 2+1D rates over levels 3-5";
    let out = root.join("control-2d");
    let result = (|| -> Result<(bool, String), String> {
        run(&["run", "control-2d", "--first-level", "3", "--levels", "3", "--out", s(&out)])?;
        let t = Table::read(&out.join("control_2d.csv"))?;
        let third = || Band::Around(-1.0 / 3.0, 0.1);
        let (ok, detail) = rate_check(
            &t,
            0..3,
            &[
                ("err_Y", third()),
                ("err_z1", third()),
                ("err_l2", Band::AtMost(-0.55)),
                ("err_0", Band::AtMost(-0.55)),
                ("err_T", Band::AtMost(-0.55)),
                ("err_J", Band::AtMost(-0.55)),
            ],
        );
        rep.note(&format!("err_z1 pairwise slopes: {}", pairwise(&t, "err_z1")));
        Ok((ok, detail))
    })();
    report(rep, name, result);
}

fn dense(m: &CsrMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m.get(i, j))
}

/// Minimizes the reduced cost over the control after eliminating the state
/// with dense inverses, then recovers the co-state.
fn saddle_oracle(rep: &mut Report) {
    let name = "Control saddle oracle on the 2-cell mesh (1e-8)";
    let result = (|| -> Result<(bool, String), String> {
        let case = build_manufactured_case(1, 0.01).ok_or("no case")?;
        let mesh = Arc::new(build_unit_cylinder_mesh(1, "control-init").map_err(|e| e.to_string())?);
        assert_eq!(mesh.n_cells(), 2);
        let (us, zs) = control_spaces(mesh);
        let sys = assemble_control_system(&case.problem, &us, &zs).map_err(|e| e.to_string())?;
        let (a, b, d, e) = (dense(&sys.blocks.a), dense(&sys.blocks.b), dense(&sys.blocks.d), dense(&sys.blocks.e));
        let a_inv = a.clone().try_inverse().ok_or("singular A")?;
        let c = &a_inv * &b;
        let g = DVector::from_vec(sys.g_u.clone());
        let u0 = &a_inv * DVector::from_vec(sys.f.clone());
        let h = c.transpose() * &d * &c + &e;
        let z = h.try_inverse().ok_or("singular reduced Hessian")? * (c.transpose() * (&d * &u0 - &g));
        let u = &u0 - &c * &z;
        let p = &a_inv * (&g - &d * &u);

        let mut worst: f64 = 0.0;
        for solver_name in saddle_solvers().names() {
            let solver = saddle_solvers().create(solver_name).map_err(|e| e.to_string())?;
            let sol = solve_control_system(&sys, &us, solver.as_ref()).map_err(|e| e.to_string())?;
            let diff = |x: &[f64], y: &DVector<f64>| x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(diff(&us.restrict(&sol.u), &u)).max(diff(&sol.z, &z)).max(diff(&us.restrict(&sol.p), &p));
        }
        Ok((worst <= 1e-8, format!("max deviation {worst:.2e} over direct, minres, reduced-cg")))
    })();
    report(rep, name, result);
}

fn moving_1d(rep: &mut Report, root: &Path) {
    let name = "Moving domain 1+1D rates over levels 3-6";
    let out = root.join("moving-1d");
    let result = (|| -> Result<(bool, String), String> {
        run(&["run", "moving-1d", "--first-level", "3", "--levels", "6", "--out", s(&out)])?;
        let t = Table::read(&out.join("moving_1d.csv"))?;
        let (ok, detail) = rate_check(
            &t,
            0..4,
            &[
                ("est", Band::Around(-0.5, 0.1)),
                ("err_l2", Band::AtMost(-0.7)),
                ("err_0", Band::AtMost(-0.7)),
                ("err_T", Band::AtMost(-0.7)),
            ],
        );
        let (_, finer) = rate_check(&t, 3..6, &[("err_l2", Band::AtMost(-0.7))]);
        rep.note(&format!("err_l2 pairwise slopes over levels 3-8: {}", pairwise(&t, "err_l2")));
        rep.note(&format!("fit over levels 6-8: {finer}"));
        Ok((ok, detail))
    })();
    report(rep, name, result);
}

fn moving_2d(rep: &mut Report, root: &Path) {
    let name = "Moving domain 2+1D rates over levels 3-5";
    let out = root.join("moving-2d");
    let result = (|| -> Result<(bool, String), String> {
        run(&["run", "moving-2d", "--first-level", "3", "--levels", "3", "--out", s(&out)])?;
        let t = Table::read(&out.join("moving_2d.csv"))?;
        Ok(rate_check(
            &t,
            0..3,
            &[
                ("est", Band::Around(-1.0 / 3.0, 0.1)),
                ("err_l2", Band::AtMost(-0.5)),
                ("err_0", Band::AtMost(-0.5)),
                ("err_T", Band::AtMost(-0.5)),
            ],
        ))
    })();
    report(rep, name, result);
}

fn selftest(rep: &mut Report, root: &Path) {
    let out = root.join("selftest");
    let status = run(&["run", "selftest", "--out", s(&out)]);
    let rows: Vec<(String, bool)> = csv::Reader::from_path(out.join("selftest.csv"))
        .map(|mut r| {
            r.records()
                .filter_map(Result::ok)
                .map(|rec| (rec[0].to_string(), &rec[3] == "1"))
                .collect()
        })
        .unwrap_or_default();
    let piola: Vec<&(String, bool)> = rows.iter().filter(|(n, _)| n.starts_with("Piola")).collect();
    let piola_ok = piola.len() == 6 && piola.iter().all(|(_, ok)| *ok);
    rep.line(
        piola_ok,
        "Piola identities (3 fields, both maps, 100 points, 1e-6)",
        &format!("{} of {} checks pass", piola.iter().filter(|(_, ok)| *ok).count(), piola.len()),
    );
    let failed: Vec<&str> = rows.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
    let suites_ok = status.is_ok() && !rows.is_empty() && failed.is_empty();
    let detail = match &status {
        Err(e) => e.clone(),
        Ok(_) if failed.is_empty() => format!("selftest exit 0, {} checks", rows.len()),
        Ok(_) => format!("failing: {}", failed.join("; ")),
    };
    rep.line(suites_ok, "Property suites via selftest", &detail);
}

fn report(rep: &mut Report, name: &str, result: Result<(bool, String), String>) {
    match result {
        Ok((ok, detail)) => rep.line(ok, name, &detail),
        Err(e) => rep.line(false, name, &e),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn main() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).expect("output directory");
    println!("acceptance artifacts in {}", root.display());
    let mut rep = Report::default();
    let model = root.join("rb_model");

    selftest(&mut rep, &root);
    saddle_oracle(&mut rep);
    rb_greedy(&mut rep, &root, &model);
    rb_online(&mut rep, &root, &model);
    rb_identity(&mut rep, &model);
    control_1d(&mut rep, &root);
    moving_1d(&mut rep, &root);
    control_2d(&mut rep, &root);
    moving_2d(&mut rep, &root);

    println!("acceptance: {} of {} criteria pass", rep.passed, rep.total);
}
