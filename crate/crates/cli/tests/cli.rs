//! End-to-end checks of the command-line surface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-mimo"))
}

fn tiny_scenario_toml() -> String {
    let mut cfg = ris_mimo_core::scenario::ScenarioConfig::desk();
    cfg.n_active = 2;
    cfg.n_ris = 4;
    cfg.ue_count = 2;
    cfg.pilot_length = 2;
    cfg.sector_width = std::f64::consts::PI;
    cfg.rng_seed = 5;
    cfg.to_toml()
}

#[test]
fn validate_accepts_presets_and_files() {
    let out = bin()
        .args(["validate", "--scenario", "desk"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("scenario ok"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.toml");
    std::fs::write(&path, tiny_scenario_toml()).unwrap();
    let out = bin()
        .args(["validate", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn validate_rejects_bad_scenarios_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = tiny_scenario_toml().replace("n_active = 2", "n_active = 9");
    std::fs::write(&path, text).unwrap();
    let out = bin()
        .args(["validate", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_ris"));
}

#[test]
fn run_writes_csvs_and_rerun_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("tiny.toml");
    std::fs::write(&scenario, tiny_scenario_toml()).unwrap();
    let out1 = dir.path().join("run1");
    let status = bin()
        .args([
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--experiment",
            "ris_policy_compare",
            "--drops",
            "3",
            "--fading",
            "4",
            "--seed",
            "11",
            "--out",
            out1.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "cdf_lb_random.csv",
        "cdf_lb_optimized.csv",
        "min_se_per_drop.csv",
        "manifest.toml",
    ] {
        assert!(out1.join(name).exists(), "{name} missing");
    }
    let header = std::fs::read_to_string(out1.join("cdf_lb_random.csv")).unwrap();
    assert!(header.starts_with("se_bps_hz,cdf\n"));
    assert!(!header.contains('\r'));

    let out2 = dir.path().join("run2");
    let status = bin()
        .args([
            "rerun",
            "--manifest",
            out1.join("manifest.toml").to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "cdf_lb_random.csv",
        "cdf_lb_optimized.csv",
        "min_se_per_drop.csv",
    ] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} not reproduced by rerun");
    }
}

#[test]
fn seed_env_var_overrides_cli_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("tiny.toml");
    std::fs::write(&scenario, tiny_scenario_toml()).unwrap();
    let run = |dirname: &str, seed_args: &[&str], env: Option<&str>| {
        let out = dir.path().join(dirname);
        let mut cmd = bin();
        cmd.args([
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--experiment",
            "quantization_sweep",
            "--drops",
            "2",
            "--fading",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        cmd.args(seed_args);
        if let Some(e) = env {
            cmd.env("RIS_MIMO_SEED", e);
        }
        assert!(cmd.status().unwrap().success());
        std::fs::read_to_string(out.join("quantization_sweep.csv")).unwrap()
    };
    let a = run("a", &["--seed", "3"], None);
    let b = run("b", &["--seed", "4"], Some("3"));
    let c = run("c", &["--seed", "3"], Some("4"));
    assert_eq!(a, b, "env seed should override the CLI seed");
    assert_ne!(a, c);
}

#[test]
fn oracle_list_names_every_oracle() {
    let out = bin().args(["oracle", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "spacing",
        "path-loss",
        "coupling-rank",
        "lmmse",
        "passive-exhaustive",
        "gradient-fd",
        "maxmin-grid",
        "hardening",
    ] {
        assert!(text.contains(name), "oracle {name} not listed");
    }
    let out = bin().args(["oracle", "spacing"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.297171146776745"));

    let out = bin().args(["oracle", "no-such"]).output().unwrap();
    assert!(!out.status.success());
}
