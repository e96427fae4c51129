use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pacing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pacing")).args(args).output().unwrap()
}

fn small_simulate(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "simulate", "--setting", "gfp,gfp", "--rho", "1", "--T", "120", "--runs", "3", "--seed", "7",
        "--mc-values", "3000", "--out", out,
    ];
    args.extend_from_slice(extra);
    pacing(&args)
}

#[test]
fn simulate_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_simulate(dir.path(), &["--emit-every", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // defaulted T^(-1/4) breaks the step condition here and is only a warning
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    for name in ["avp.csv", "baseline.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "round,mean_cum_regret,stderr_cum_regret,mean_cum_spend,mean_normalized_regret");
        let rounds: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(rounds, vec!["50", "100", "120"]);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["root_seed"], 7);
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 6);
    assert!(manifest["benchmark"]["z"]["stderr"].as_f64().unwrap() > 0.0);
    assert_eq!(manifest["config"]["T"], 120);
}

#[test]
fn same_seed_gives_identical_csv_and_manifest_replays() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_simulate(a.path(), &[]).status.success());
    assert!(small_simulate(b.path(), &[]).status.success());
    for name in ["avp.csv", "baseline.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }

    let c = tempfile::tempdir().unwrap();
    let manifest = a.path().join("manifest.json");
    let out = pacing(&["simulate", "--manifest", manifest.to_str().unwrap(), "--out", c.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["avp.csv", "baseline.csv", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(c.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn explicit_step_size_above_limit_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // J = 2, U = 10: the limit is 0.05
    let out = small_simulate(dir.path(), &["--eps-avp", "0.05"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: kind=step_size "), "{stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1);

    let out = small_simulate(dir.path(), &["--eps-avp", "0.05", "--relax-step-condition"]);
    assert!(out.status.success());
}

#[test]
fn bad_flags_print_usage_and_exit_2() {
    let out = pacing(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = pacing(&["simulate", "--T", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=config"));
}

#[test]
fn solve_offline_slack_budget_reports_zero_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("slack.json");
    fs::write(
        &config,
        r#"{"setting": [{"format": "gfp", "n": 5, "k": 3, "discounts": [1, 0.5, 0.25],
                        "competitor_dist": {"kind": "lognormal", "mu": -0.3466, "sigma": 0.8326, "upper": 10},
                        "value": {"multiplier": [1, 1.5]}}],
            "T": 100, "rho": 50, "runs": 1, "seed": 1, "mc_values": 5000}"#,
    )
    .unwrap();
    let out = pacing(&["solve-offline", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["mu_star"].as_f64(), Some(0.0));
    assert_eq!(json["complementary_slackness"].as_f64(), Some(0.0));
}

#[test]
fn config_file_with_sample_file_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("bids.txt");
    let text: String = (1..=400).map(|i| format!("{}\n", i as f64 / 200.0)).collect();
    fs::write(&samples, text).unwrap();
    let config = dir.path().join("cfg.json");
    let cfg = serde_json::json!({
        "setting": [{"format": "gfp", "n": 3, "discounts": [1.0, 0.5],
                     "competitor_dist": {"kind": "file", "path": samples}}],
        "T": 80, "rho": 0.5, "eps_avp": 0.1, "eps_baseline": 0.1, "runs": 2, "seed": 3, "mc_values": 2000
    });
    fs::write(&config, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let out = pacing(&["simulate", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("avp.csv").exists());

    fs::write(&samples, "0.5\nabc\n").unwrap();
    let out = pacing(&["simulate", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("kind=load") && stderr.contains("line 2"), "{stderr}");
}

#[test]
fn best_response_tabulates_grid() {
    let out = pacing(&["best-response", "--format", "vcg", "--max-value", "2", "--points", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "value,bid,utility");
    assert_eq!(lines.len(), 5);
    for l in &lines[1..] {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[0], f[1], "VCG best response is truthful");
    }

    let out = pacing(&["best-response", "--format", "gfp", "--points", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for l in text.lines().skip(1) {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[1] > 0.0 && f[1] < f[0], "GFP shades: {l}");
    }
}

#[test]
fn validate_passes() {
    let out = pacing(&["validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
