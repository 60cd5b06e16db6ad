use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn micromacro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_micromacro"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn quick_couette(out: &Path, extra: &[&str]) -> Output {
    let o = out_arg(out);
    let mut args = vec![
        "run",
        "couette-hookean",
        "--n-particles",
        "8",
        "--t-end",
        "0.02",
        "--set",
        "elements=6",
        "--out",
        &o,
    ];
    args.extend_from_slice(extra);
    micromacro(&args)
}

#[test]
fn run_writes_outputs_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = quick_couette(&out, &["--seed", "7"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["config.toml", "probes.csv", "energy.csv", "summary.toml"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let echo: toml::Table = fs::read_to_string(out.join("config.toml")).unwrap().parse().unwrap();
    assert_eq!(echo["seed"].as_integer(), Some(7));
    assert_eq!(echo["n_particles"].as_integer(), Some(8));
    assert_eq!(echo["elements"].as_integer(), Some(6));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("in.toml");
    fs::write(&cfg, "scenario = \"couette-hookean\"\nseed = 3\nn_particles = 5\nwi = 2.0\n").unwrap();
    let out = dir.path().join("run");
    let r = quick_couette(&out, &["--config", cfg.to_str().unwrap(), "--seed", "11"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let echo: toml::Table = fs::read_to_string(out.join("config.toml")).unwrap().parse().unwrap();
    assert_eq!(echo["seed"].as_integer(), Some(11));
    assert_eq!(echo["n_particles"].as_integer(), Some(8));
    assert_eq!(echo["wi"].as_float(), Some(2.0));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(quick_couette(&out, &["--set", "no_such_key=1"]).status.code(), Some(2));
    assert_eq!(quick_couette(&out, &["--dt", "0"]).status.code(), Some(2));
    let r = micromacro(&["run", "no-such-scenario", "--out", &out_arg(&out)]);
    assert_eq!(r.status.code(), Some(2));

    let cfg = dir.path().join("cavity.toml");
    fs::write(&cfg, "scenario = \"cavity\"\n").unwrap();
    assert_eq!(quick_couette(&out, &["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3_and_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = quick_couette(&out, &["--set", "lid=1e300"]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    let diag: toml::Table = fs::read_to_string(out.join("diagnostics.toml")).unwrap().parse().unwrap();
    assert!(diag.contains_key("error"));
    assert!(diag["step"].as_integer().unwrap() >= 1);
}

#[test]
fn checkpoints_resume_to_the_same_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    let r = quick_couette(&full, &["--checkpoint-every", "10"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let snap = full.join("checkpoints").join("checkpoint_00000010.json");
    assert!(snap.is_file());

    let resumed = dir.path().join("resumed");
    let r = quick_couette(&resumed, &["--resume", snap.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(
        fs::read(full.join("particles_t0.02.csv")).unwrap(),
        fs::read(resumed.join("particles_t0.02.csv")).unwrap()
    );

    let other = dir.path().join("other");
    let r = quick_couette(&other, &["--resume", snap.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn cavity_run_exports_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cav");
    let o = out_arg(&out);
    let r = micromacro(&[
        "run", "cavity", "--n-particles", "4", "--t-end", "0.003", "--set", "nx=4", "--set", "ny=4", "--out", &o,
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let mesh = fs::read_to_string(out.join("mesh.txt")).unwrap();
    assert!(!mesh.is_empty());
    assert!(out.join("summary.toml").is_file());
}

#[test]
fn reference_writes_probes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    let o = out_arg(&out);
    let r = micromacro(&[
        "reference", "oldroyd-b", "--m-fine", "40", "--dt-fine", "1e-3", "--t-end", "0.05", "--out", &o,
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let probes = fs::read_to_string(out.join("probes.csv")).unwrap();
    assert!(probes.lines().count() > 2);
}

#[test]
fn verify_passes() {
    let r = micromacro(&["verify"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
}
