use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn fosls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fosls"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) {
    let out = fosls(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn meta(dir: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(dir.join("meta"))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn meta_value(dir: &Path, key: &str) -> String {
    meta(dir).into_iter().find(|(k, _)| k == key).map(|(_, v)| v).unwrap_or_else(|| panic!("no {key}"))
}

#[test]
fn control_1d_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["run", "control-1d", "--levels", "6", "--out", out]);
    let (header, rows) = read_csv(&dir.path().join("control_1d.csv"));
    assert_eq!(header, "ndof,err_U,err_Y,err_0,err_T,err_l2,err_z1,err_J,err_p");
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.len() == 9 && r.iter().all(|v| v.is_finite() && *v > 0.0)));
    assert_eq!(rows[0][0], 32.0);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));

    assert_eq!(meta_value(dir.path(), "status"), "ok");
    assert_eq!(meta_value(dir.path(), "experiment"), "control-1d");
    assert_eq!(meta_value(dir.path(), "config.saddle_solver"), "direct");
    assert_eq!(meta_value(dir.path(), "level.6.ndof"), "24832");
    for key in ["started", "finished", "wall_seconds", "level.1.seconds", "config.rho"] {
        meta_value(dir.path(), key);
    }
}

#[test]
fn reals_are_written_with_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["run", "moving-1d", "--levels", "1", "--out", dir.path().to_str().unwrap()]);
    let text = std::fs::read_to_string(dir.path().join("moving_1d.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    for cell in row.split(',').skip(1) {
        let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{cell}");
    }
}

#[test]
fn reruns_reproduce_every_number() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run_ok(&["run", "moving-1d", "--first-level", "2", "--levels", "3", "--out", d.path().to_str().unwrap()]);
    }
    let (ha, ra) = read_csv(&a.path().join("moving_1d.csv"));
    let (hb, rb) = read_csv(&b.path().join("moving_1d.csv"));
    assert_eq!(ha, "ndof,est,err_Y,err_0,err_T,err_l2");
    assert_eq!(ha, hb);
    for (x, y) in ra.iter().flatten().zip(rb.iter().flatten()) {
        assert!((x - y).abs() <= 1e-9 * x.abs(), "{x} vs {y}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg");
    std::fs::write(&cfg, "levels = 4\nsaddle_solver = minres\nrho = 0.1\n").unwrap();
    let out = dir.path().join("out");
    run_ok(&["run", "control-1d", "--config", cfg.to_str().unwrap(), "--levels", "2", "--out", out.to_str().unwrap()]);
    let (_, rows) = read_csv(&out.join("control_1d.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(meta_value(&out, "config.saddle_solver"), "minres");
    assert_eq!(meta_value(&out, "config.rho"), "1e-1");
}

#[test]
fn invalid_configurations_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "control-1d", "--rho", "-1", "--out", out],
        vec!["run", "control-1d", "--saddle-solver", "qr", "--out", out],
        vec!["run", "figures", "--out", out],
        vec!["run", "moving-1d", "--levels", "0", "--out", out],
        vec!["run", "rb-offline", "--estimator", "fast", "--out", out],
    ] {
        let res = fosls(&args);
        assert!(!res.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&res.stderr).contains("error"), "{args:?}");
    }
    let cfg = dir.path().join("bad");
    std::fs::write(&cfg, "colour = red\n").unwrap();
    let res = fosls(&["run", "moving-1d", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));
}

#[test]
fn reduced_basis_smoke_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rb");
    let model = dir.path().join("model");
    let common = ["--truth", "16", "--grid", "5", "--tol", "1e-2", "--model", model.to_str().unwrap()];
    let start = Instant::now();
    let mut args = vec!["run", "rb-offline", "--out", out.to_str().unwrap()];
    args.extend(common);
    run_ok(&args);
    assert!(start.elapsed().as_secs_f64() < 60.0);
    let (header, rows) = read_csv(&out.join("rb_offline.csv"));
    assert_eq!(header, "N,maxtrain");
    let last = rows.last().unwrap();
    assert!(last[1] <= 1e-2);
    assert_eq!(last[0] as usize + 1, rows.len());
    assert_eq!(meta_value(&out, "N"), (rows.len() - 1).to_string());
    assert!(model.join("model.json").exists());

    let mut args = vec!["run", "rb-online", "--points", "3", "--out", out.to_str().unwrap()];
    args.extend(common);
    run_ok(&args);
    let (header, rows) = read_csv(&out.join("rb_online.csv"));
    assert_eq!(header, "A,est_A,err_A,b,est_b,err_b");
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[0][0], rows[2][0], rows[0][3], rows[2][3]), (0.5, 1.5, 0.0, 1.0));
    for r in &rows {
        assert!(r[1] >= r[2] - 1e-12 && r[4] >= r[5] - 1e-12, "{r:?}");
    }

    let mut args = vec!["run", "rb-online", "--truth", "8", "--model", model.to_str().unwrap(), "--out"];
    args.push(out.to_str().unwrap());
    assert!(!fosls(&args).status.success());
}

#[test]
fn selftest_passes_and_records_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let res = fosls(&["run", "selftest", "--out", dir.path().to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    let text = std::fs::read_to_string(dir.path().join("selftest.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "check,value,tolerance,passed");
    assert_eq!(text.lines().count() - 1, stdout.lines().count());
    assert_eq!(meta_value(dir.path(), "failed"), "0");
}

#[test]
fn list_names_every_strategy() {
    let out = fosls(&["list"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["rb-offline", "moving-2d", "selftest", "cholesky", "cg", "direct", "minres", "reduced-cg"] {
        assert!(text.contains(name), "{name}");
    }
}
