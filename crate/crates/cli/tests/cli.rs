use std::path::Path;
use std::process::{Command, Output};

fn thzsim(args: &[&str], config_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_thzsim"));
    cmd.args(args).env_remove(thzsim_cli::CONFIG_ENV);
    if let Some(p) = config_env {
        cmd.env(thzsim_cli::CONFIG_ENV, p);
    }
    cmd.output().expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn shipped_config() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/calibrated.toml")
}

#[test]
fn manifest_records_seed_version_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gen");
    let o = thzsim(&["generate", "--scenario", "hallway", "--seed", "5", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["command"], "generate");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    for f in m["outputs"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).is_file());
    }
}

#[test]
fn config_env_var_sets_default_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = shipped_config();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = |d: &Path| vec!["montecarlo".to_string(), "--drops".into(), "50".into(), "--out".into(), d.to_str().unwrap().into()];
    let run = |d: &Path, env: Option<&Path>| {
        let v = args(d);
        let o = thzsim(&v.iter().map(String::as_str).collect::<Vec<_>>(), env);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        manifest(d)
    };
    let with_env = run(&a, Some(&cfg));
    let presets = run(&b, None);
    assert!(with_env["config_path"].as_str().unwrap().ends_with("calibrated.toml"));
    assert_ne!(with_env["config_hash"], presets["config_hash"]);
}

#[test]
fn check_flag_sets_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = shipped_config();
    let base = ["montecarlo", "--drops", "1000", "--seed", "3", "--check", "--out"];
    let pass_dir = tmp.path().join("pass");
    let mut args = base.to_vec();
    args.extend([pass_dir.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(thzsim(&args, None).status.code(), Some(0));

    // the uncalibrated presets miss the spread targets
    let fail_dir = tmp.path().join("fail");
    let mut args = base.to_vec();
    args.push(fail_dir.to_str().unwrap());
    let o = thzsim(&args, None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[FAIL] C1"));
}

#[test]
fn bad_input_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let o = thzsim(&["generate", "--scenario", "atrium", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let o = thzsim(&["analyze", "--out", out.to_str().unwrap(), "/nonexistent/sweep.csv"], None);
    assert_eq!(o.status.code(), Some(2));
}
