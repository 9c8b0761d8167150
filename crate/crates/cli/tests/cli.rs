use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hwr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwr")).args(args).output().expect("binary runs")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hwr-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Deterministic samples of `f(y1, y2) = exp(-y1²) + y2²` with `y2 ∈ [0, 1]`.
fn write_data(path: &Path, rows: usize, target: impl Fn(usize) -> Option<f64>) {
    let mut text = String::from("y1,y2,f\n");
    for i in 0..rows {
        let t = (i as f64 + 0.5) / rows as f64;
        let y1 = 2.5 * (2.0 * t - 1.0);
        let y2 = ((i * 37) % rows) as f64 / rows as f64;
        let f = target(i).unwrap_or((-y1 * y1).exp() + y2 * y2);
        text.push_str(&format!("{y1},{y2},{f}\n"));
    }
    fs::write(path, text).unwrap();
}

const FIT_TOML: &str = r#"
order = 2
level = 2
subsets = { policy = "order", nu = 1 }
dims = [ { name = "normal" }, { name = "uniform" } ]
"#;

#[test]
fn fit_predict_gsi_round_trip() {
    let dir = workdir("roundtrip");
    let (cfg, data, model, pred) = (dir.join("fit.toml"), dir.join("d.csv"), dir.join("m.json"), dir.join("p.csv"));
    fs::write(&cfg, FIT_TOML).unwrap();
    write_data(&data, 400, |_| None);

    let out = hwr(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&model), "--condition"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("LSQR iterations") && log.contains("condition number"), "{log}");

    let out = hwr(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&pred)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&pred).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["y1", "y2", "prediction"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 400);
    let truth: f64 = (-(2.5f64 * (1.0 / 400.0 - 1.0)).powi(2)).exp();
    let p0: f64 = rows[0][2].parse().unwrap();
    assert!((p0 - truth).abs() < 0.2, "{p0} vs {truth}");

    let out = hwr(&["gsi", "--model", s(&model)]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("u,variance,gsi,active"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn flag_overrides_config() {
    let dir = workdir("override");
    let (cfg, data, model) = (dir.join("fit.json"), dir.join("d.csv"), dir.join("m.json"));
    fs::write(
        &cfg,
        r#"{"order": 2, "level": 2, "dims": [{"name": "normal"}, {"name": "uniform"}], "target": "g"}"#,
    )
    .unwrap();
    write_data(&data, 200, |_| None);
    let out = hwr(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&model), "--target", "f", "--terms", "{1};{2}", "--level", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["coefficients"].as_array().unwrap().len(), 7);
}

#[test]
fn config_errors_exit_2() {
    let dir = workdir("config");
    let (cfg, data, model) = (dir.join("fit.toml"), dir.join("d.csv"), dir.join("m.json"));
    write_data(&data, 50, |_| None);

    fs::write(&cfg, "order = 2\nlevel = \"three\"\ndims = []\n").unwrap();
    let out = hwr(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&cfg, FIT_TOML).unwrap();
    let out = hwr(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&model), "--target", "missing"]);
    assert_eq!(out.status.code(), Some(2));

    let out = hwr(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&model), "--terms", "{3}"]);
    assert_eq!(out.status.code(), Some(2));

    let out = hwr(&["predict", "--model", s(&dir.join("absent.json")), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(2));

    let out = hwr(&["table1", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_finite_target_exits_3() {
    let dir = workdir("numeric");
    let (cfg, data, model) = (dir.join("fit.toml"), dir.join("d.csv"), dir.join("m.json"));
    fs::write(&cfg, FIT_TOML).unwrap();
    write_data(&data, 100, |i| (i == 17).then_some(f64::NAN));
    let out = hwr(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn table1_writes_torus_row() {
    let out = hwr(&["table1", "--orders", "2", "--levels", "2:2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("m,n,eta,mu_min,mu_max"));
    assert!(lines[2].starts_with("2,torus,"));
    let mu_min: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!((mu_min - 0.0896).abs() < 0.002, "{mu_min}");
}

#[test]
fn converge_with_overrides() {
    let dir = workdir("converge");
    let (cfg, out_csv) = (dir.join("c.toml"), dir.join("rows.csv"));
    fs::write(
        &cfg,
        "function = \"gauss\"\norder = 2\nlevels = { min = 2, max = 6 }\ndims = [ { name = \"normal\" } ]\n",
    )
    .unwrap();
    let out = hwr(&["converge", "--config", s(&cfg), "--levels", "2:4", "--seeds", "1,2", "--out", s(&out_csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("slope over levels"));
}

#[test]
fn two_stage_small_run() {
    let dir = workdir("two-stage");
    let gsi = dir.join("g.csv");
    let out = hwr(&["two-stage", "--seeds", "1", "--samples", "600", "--gsi-out", s(&gsi)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.starts_with("seed,stage1_rmse,stage2_rmse"));
    assert_eq!(summary.lines().count(), 2);
    assert!(fs::read_to_string(&gsi).unwrap().lines().count() > 8);

    let out = hwr(&["two-stage", "--threshold", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}
