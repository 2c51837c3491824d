use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use saarb_core::bounds::eta_threshold;
use saarb_core::dist::sample;
use saarb_core::entropy::j_hoelder;
use saarb_core::SourceDistribution;
use serde_json::{json, Value};
use tempfile::TempDir;

fn saarb(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_saarb"));
    c.args(args).env_remove("SAARB_THREADS");
    if let Some(t) = threads {
        c.env("SAARB_THREADS", t);
    }
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn bounded_avar() -> Value {
    json!({
        "problem": { "bundled": "bounded_product" },
        "risk": { "kind": "avar", "alpha": 0.5, "x0": 1.5 },
        "grids": { "points_per_dim": 17, "refinements": 1 },
        "bounds": { "n_list": [3000], "eps_list": [0.05, 1000, 2000] },
        "mc": { "replications": 8, "seed": 11 }
    })
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn mc_writes_reports_and_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &bounded_avar());
    let out = tmp.path().join("out");
    let o = saarb(&["mc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["replications.csv", "tails.csv", "tightness.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let tails = fs::read_to_string(out.join("tails.csv")).unwrap();
    let mut lines = tails.lines();
    assert_eq!(lines.next().unwrap(), "n,eps,p_hat,se,bound,t,threshold,min_n,remainder,status,verdict");
    assert_eq!(lines.count(), 3);
    let reps = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(reps.lines().count(), 9);
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["violated"], json!(false));
    assert_eq!(s["events"]["x_outside_when_a_held"], json!(0));
}

#[test]
fn scaled_bound_fixture_forces_violation() {
    let tmp = TempDir::new().unwrap();
    // quadratic errors exceed ε = 1e-3 most of the time, so a shrunken bound cannot cover p̂
    let v = json!({
        "problem": { "bundled": "quadratic" },
        "grids": { "points_per_dim": 17, "refinements": 2 },
        "bounds": { "n_list": [100], "eps_list": [0.001], "scale": 1e-6 },
        "mc": { "replications": 200, "seed": 5 }
    });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = tmp.path().join("out");
    let o = saarb(&["mc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let tails = fs::read_to_string(out.join("tails.csv")).unwrap();
    assert!(tails.contains(",violated"));
}

#[test]
fn mc_is_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let mut v = bounded_avar();
    v["problem"] = json!({ "bundled": "quadratic" });
    v["bounds"]["n_list"] = json!([50, 100, 200]);
    v["bounds"]["eps_list"] = json!([0.01, 0.05]);
    v["mc"]["replications"] = json!(500);
    let cfg = write_config(tmp.path(), "c.json", &v);
    let mut outputs = Vec::new();
    for (k, threads) in [Some("1"), Some("3"), None].into_iter().enumerate() {
        let out = tmp.path().join(format!("out{k}"));
        let o = saarb(&["mc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], threads);
        assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(out);
    }
    for f in ["replications.csv", "tails.csv", "tightness.csv", "summary.json"] {
        let a = fs::read(outputs[0].join(f)).unwrap();
        for o in &outputs[1..] {
            assert_eq!(a, fs::read(o.join(f)).unwrap(), "{f} differs");
        }
    }
    let tight = fs::read_to_string(outputs[0].join("tightness.csv")).unwrap();
    assert_eq!(tight.lines().count(), 4);
}

#[test]
fn bad_thread_env_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &bounded_avar());
    let o = saarb(&["mc", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_matches_sample_minimum() {
    let tmp = TempDir::new().unwrap();
    let v = json!({
        "problem": { "bundled": "quadratic" },
        "grids": { "points_per_dim": 65, "refinements": 4 },
        "mc": { "n": 500, "seed": 4 }
    });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let o = saarb(&["solve", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    // min_θ mean (θ − z)² is the sample variance with divisor n, attained at z̄
    let s = sample(&SourceDistribution::uniform(0.0, 1.0).unwrap(), 500, 4).unwrap();
    let z: Vec<f64> = s.rows().map(|r| r[0]).collect();
    let mean = z.iter().sum::<f64>() / 500.0;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0;
    assert!((r["value"].as_f64().unwrap() - var).abs() < 1e-10, "{} vs {var}", r["value"]);
    assert!((r["theta_star"][0].as_f64().unwrap() - mean).abs() < 1e-5);
    assert_eq!(r["n"], json!(500));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(saarb(&["solve", "--config", missing.to_str().unwrap()], None).status.code(), Some(2));
    assert_eq!(saarb(&["solve"], None).status.code(), Some(2));
    let cfg = write_config(tmp.path(), "c.json", &bounded_avar());
    let c = cfg.to_str().unwrap();
    assert_eq!(saarb(&["solve", "--config", c, "--set", "n=0"], None).status.code(), Some(2));
    assert_eq!(saarb(&["solve", "--config", c, "--set", "risk.kind=bogus"], None).status.code(), Some(2));
    let o = saarb(&["bounds", "--config", c, "--set", "bounds.j_deltas=[0.6]"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
    fs::write(tmp.path().join("broken.json"), "{ not json").unwrap();
    let broken = tmp.path().join("broken.json");
    assert_eq!(saarb(&["bounds", "--config", broken.to_str().unwrap()], None).status.code(), Some(2));
    // the entropy table has no entry at δ = 1/4
    let o =
        saarb(&["bounds", "--config", c, "--set", r#"problem.entropy={"kind":"values","table":[[0.5,2.0]]}"#], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_table_has_eta_column() {
    let tmp = TempDir::new().unwrap();
    let v = json!({
        "problem": { "bundled": "bounded_product" },
        "bounds": { "n_list": [100, 1000], "eps_list": [1, 20, 40], "t_grid": [0.5, 1, 2] }
    });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = tmp.path().join("b");
    let o = saarb(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (ci, ct, ce) = (col("n"), col("t"), col("eta"));
    let jq = j_hoelder(1, 1.0, 0.25).unwrap().value;
    let mut rows = 0;
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let n: usize = f[ci].parse().unwrap();
        let t: f64 = f[ct].parse().unwrap();
        let eta: f64 = f[ce].parse().unwrap();
        let want = eta_threshold(t, n, 1.0, jq);
        assert!((eta - want).abs() <= 1e-11 * want, "n={n} t={t}: {eta} vs {want}");
        rows += 1;
    }
    assert_eq!(rows, 2 * 3 * 3);
    let j = stdout_json(&o);
    assert_eq!(j["rows"].as_array().unwrap().iter().filter(|r| r["best"] == json!(true)).count(), 6);
    assert!(out.join("bounds.json").is_file());
}

#[test]
fn avar_bounds_include_interval() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &bounded_avar());
    let out = tmp.path().join("b");
    let o = saarb(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains(",x_l,") && header.contains(",x_u,"), "{header}");
    let row = csv.lines().nth(1).unwrap();
    assert!(row.contains(",-3,12,"), "{row}");
    let j = stdout_json(&o);
    assert_eq!(j["interval"]["x_l"], json!(-3.0));
    assert_eq!(j["interval"]["x_u"], json!(12.0));
}

#[test]
fn verify_default_corrupt_and_empty() {
    let o = saarb(&["verify"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 7);

    let o = saarb(&["verify", "--set", "verify.corrupt=envelope_domination"], None);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL envelope_domination")));
    assert_eq!(text.lines().filter(|l| l.starts_with("FAIL")).count(), 1);

    let o = saarb(&["verify", "--set", "verify.checks=[]"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));

    assert_eq!(saarb(&["verify", "--set", r#"verify.checks=["unknown"]"#], None).status.code(), Some(2));
}

#[test]
fn explicit_goal_config_runs_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let v = json!({
        "problem": {
            "goal": { "type": "hoelder", "form": { "kind": "abs_diff" } },
            "box": { "lower": [0.0], "upper": [1.0] },
            "source": { "kind": "truncated_normal", "mu": 0.5, "sigma": 0.3, "lo": 0.0, "hi": 1.0 }
        },
        "grids": { "points_per_dim": 17, "refinements": 2, "true_points_per_dim": 65, "true_refinements": 3 },
        "bounds": { "n_list": [20, 40], "eps_list": [0.5] },
        "mc": { "replications": 4 }
    });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = tmp.path().join("o");
    let o = saarb(&["mc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["problem"], json!("custom"));
    assert!(s["truth"]["theta_star"][0].as_f64().is_some());
}
