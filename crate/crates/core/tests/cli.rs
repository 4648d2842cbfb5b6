use std::path::Path;
use std::process::{Command, Output};

use specnorm::extremes::g_c_quantile;

fn specnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specnorm"))
        .args(args)
        .env_remove("SPECNORM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(csv: &str, row: usize, name: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let line = lines.nth(row).unwrap();
    let col = header.iter().position(|h| *h == name).unwrap();
    line.split(',').nth(col).unwrap().to_string()
}

fn num(csv: &str, row: usize, name: &str) -> f64 {
    field(csv, row, name).parse().unwrap()
}

#[test]
fn ktable_single_points() {
    let o = specnorm(&["ktable", "--grid", "1:0:1", "--p-base", "1000"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!((num(&out, 0, "k_value") - 0.829).abs() <= 0.002);
    let o = specnorm(&["ktable", "--grid", "0.5:0:0.5"]);
    assert!((num(&stdout(&o), 0, "k_value") - 0.935).abs() <= 0.002);
}

#[test]
fn ktable_rows_ascend() {
    let o = specnorm(&["ktable", "--grid", "0.2:0.2:1", "--p-base", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let ratios: Vec<f64> = (0..5).map(|r| num(&out, r, "ratio")).collect();
    assert_eq!(ratios, vec![0.2, 0.4, 0.6, 0.8, 1.0]);
}

#[test]
fn usage_errors() {
    assert_eq!(specnorm(&["ktable", "--grid", "a:b:c"]).status.code(), Some(64));
    assert_eq!(specnorm(&["theta", "--grid", "0:0:0"]).status.code(), Some(64));
    assert_eq!(specnorm(&["norm", "--family", "toeplitz", "--p", "10", "--n", "5"]).status.code(), Some(64));
    assert_eq!(specnorm(&["norm", "--family", "nope", "--p", "1", "--n", "5"]).status.code(), Some(64));
    assert_eq!(specnorm(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(specnorm(&["--help"]).status.code(), Some(0));
}

#[test]
fn theta_table() {
    let o = specnorm(&["theta"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("c,theta"));
    assert!((num(&out, 1, "theta") - 7.05).abs() <= 0.01);
    assert_eq!(field(&out, 9, "theta"), "0");
}

#[test]
fn norm_fixture_matches_dense() {
    // rows (1, 2, 3) and (4, 1, 2): Gram eigenvalues 30 and 5
    let o = specnorm(&[
        "norm", "--family", "toeplitz", "--p", "2", "--n", "3", "--symbol", "1,2,3,0,4", "--dense-check",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!((num(&out, 0, "sigma_max") - 30f64.sqrt()).abs() < 1e-9);
    assert!((num(&out, 0, "dense_sigma_max") - 30f64.sqrt()).abs() < 1e-9);
    let o = specnorm(&["norm", "--family", "toeplitz", "--p", "2", "--n", "3", "--symbol", "1,2"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn norm_square_circulant_json() {
    let o = specnorm(&["norm", "--family", "circulant", "--p", "50", "--n", "50", "--seed", "4", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["reference"], 1.0);
    assert_eq!(v["seed"], 4);
    assert!(v["sigma_max"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_specnorm"));
        c.args(["norm", "--family", "hankel", "--p", "5", "--n", "9"]).args(extra);
        match env {
            Some(s) => c.env("SPECNORM_SEED", s),
            None => c.env_remove("SPECNORM_SEED"),
        };
        stdout(&c.output().unwrap())
    };
    let from_env = run(Some("12"), &[]);
    assert_eq!(field(&from_env, 0, "seed"), "12");
    assert_eq!(from_env, run(None, &["--seed", "12"]));
    assert_eq!(field(&run(Some("12"), &["--seed", "3"]), 0, "seed"), "3");
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn mc_smoke_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let cfg = write(
        dir.path(),
        "tiny.cfg",
        &format!(
            "family = toeplitz\np = 16\nn = 32\nreplicates = 10\nseed = 5\nraw_samples = {}\n",
            raw.display()
        ),
    );
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let a = specnorm(&["mc", "--config", &cfg, "--output", out_a.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    let b = specnorm(&["mc", "--config", &cfg, "--output", out_b.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(b.status.code(), Some(0));
    let (ta, tb) = (std::fs::read(&out_a).unwrap(), std::fs::read(&out_b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("ratio,p,n,count,mean,q05,median,q95,reference"));
    assert_eq!(num(&text, 0, "count"), 10.0);
    let raw_text = std::fs::read_to_string(&raw).unwrap();
    assert_eq!(raw_text.lines().next(), Some("replicate,statistic,value,flag"));
    assert_eq!(raw_text.lines().count(), 11);
}

#[test]
fn mc_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "p = 16\nn = 32\nreplicates = 0\n");
    assert_eq!(specnorm(&["mc", "--config", &cfg]).status.code(), Some(64));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(specnorm(&["mc", "--config", missing.to_str().unwrap()]).status.code(), Some(64));
}

#[test]
fn mc_sweep_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"family": "circulant", "p": 20, "ratios": [1.0, 0.5], "replicates": 8}"#,
    );
    let o = specnorm(&["mc", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert_eq!(num(&out, 1, "n"), 40.0);
    assert_eq!(num(&out, 1, "reference"), 1.0);
}

#[test]
fn gumbel_compare_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gc.cfg",
        "family = circulant\np = 512\nn = 512\nreplicates = 2000\nseed = 3\n",
    );
    let o = specnorm(&["gumbel-compare", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(
        out.lines().next(),
        Some("ratio,p,n,q,empirical_scaled,analytic_scaled,empirical_centered,analytic_centered")
    );
    for (row, q) in [0.05, 0.5, 0.95].into_iter().enumerate() {
        assert_eq!(num(&out, row, "q"), q);
        let analytic = num(&out, row, "analytic_scaled");
        assert!((analytic - g_c_quantile(q, 1.0, 512).unwrap()).abs() < 1e-11);
        assert!((num(&out, row, "empirical_scaled") - analytic).abs() < 0.1);
    }
}
