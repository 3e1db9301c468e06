use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn phdsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phdsel")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

fn poisson_file(dir: &Path, n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Poisson::new(4.0).unwrap();
    let mut text = String::from("# Poisson(4) draws\n");
    for _ in 0..n {
        text.push_str(&format!("{}\n", dist.sample(&mut rng) as u64));
    }
    let path = dir.join("pois.txt");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_exits_zero_everywhere() {
    for sub in [None, Some("estimate"), Some("gof"), Some("select"), Some("simulate"), Some("equidistance")] {
        let mut args: Vec<&str> = sub.into_iter().collect();
        args.push("--help");
        let out = phdsel(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
    }
    let help = stdout(&phdsel(&["select", "--help"]));
    assert!(help.contains("--alpha") && help.contains("0.05"), "{help}");
}

#[test]
fn estimate_prints_key_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = poisson_file(dir.path(), 300, 1);
    let out = phdsel(&["estimate", "--data", &data, "--model", "poisson", "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let theta: f64 = value(&text, "theta_hat").parse().unwrap();
    assert!((theta - 4.0).abs() < 0.5);
    let objective: f64 = value(&text, "objective").parse().unwrap();
    assert!(objective >= 0.0);
    assert!(value(&text, "evaluations").parse::<usize>().unwrap() > 0);

    let mle = stdout(&phdsel(&["estimate", "--data", &data, "--model", "poisson", "--method", "mle"]));
    assert!((value(&mle, "theta_hat").parse::<f64>().unwrap() - theta).abs() < 0.3);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = poisson_file(dir.path(), 50, 2);

    let out = phdsel(&["estimate", "--data", &data, "--model", "poisson", "--h", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let out = phdsel(&["estimate", "--data", &data]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("poisson") && err.contains("geometric"), "{err}");

    let out = phdsel(&["estimate", "--data", "/no/such/file", "--model", "poisson"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1\n2\nthree\n").unwrap();
    let out = phdsel(&["estimate", "--data", bad.to_str().unwrap(), "--model", "poisson"]);
    assert_eq!(out.status.code(), Some(2));

    let out = phdsel(&["gof", "--data", &data, "--model", "poisson", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"repz": 10}"#).unwrap();
    let out = phdsel(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("repz"));
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // zeros make the geometric likelihood vanish for every parameter
    let data = poisson_file(dir.path(), 100, 3);
    let out = phdsel(&["estimate", "--data", &data, "--model", "geometric", "--method", "mle"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn select_reports_decision() {
    let dir = tempfile::tempdir().unwrap();
    let data = poisson_file(dir.path(), 300, 4);
    let out = phdsel(&["select", "--data", &data, "--model1", "poisson", "--model2", "geometric", "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(value(&text, "decision"), "favor_first");
    assert!(value(&text, "hi").parse::<f64>().unwrap() < -1.96);
    for key in ["gamma_hat", "d1", "d2", "z", "degenerate"] {
        value(&text, key);
    }

    let out = phdsel(&["select", "--data", &data, "--model1", "poisson", "--model2", "poisson"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(value(&text, "degenerate"), "true");
    assert_eq!(value(&text, "decision"), "indecisive");
}

#[test]
fn gof_and_equidistance() {
    let dir = tempfile::tempdir().unwrap();
    let data = poisson_file(dir.path(), 500, 5);
    let text = stdout(&phdsel(&["gof", "--data", &data, "--model", "poisson"]));
    assert_eq!(value(&text, "df"), "6");
    assert!((value(&text, "critical").parse::<f64>().unwrap() - 12.5916).abs() < 1e-4);

    let text = stdout(&phdsel(&["equidistance", "--h", "0.5"]));
    let pi: f64 = value(&text, "pi").parse().unwrap();
    assert!(pi > 0.0 && pi < 1.0);
    assert_eq!(value(&text, "identical"), "false");
}

#[test]
fn simulate_smoke_is_fast_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("smoke.json");
    std::fs::write(&cfg, r#"{"pi": 1.0, "reps": 10, "seed": 42}"#).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");

    let start = Instant::now();
    let out = phdsel(&["simulate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(start.elapsed() < Duration::from_secs(5), "{:?}", start.elapsed());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());

    let out = phdsel(&["simulate", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    // default config: 5 sizes x 2 penalty weights
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 11);

    let text = stdout(&phdsel(&["simulate", "--config", cfg.to_str().unwrap(), "--format", "text"]));
    assert!(text.lines().next().unwrap().contains("pct_correct"));
}
