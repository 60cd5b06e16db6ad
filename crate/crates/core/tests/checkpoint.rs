use micromacro::checkpoint::{file_name, Checkpoint};
use micromacro::scenarios::cavity::run_cavity;
use micromacro::scenarios::config::{ScenarioKind, SimConfig};
use micromacro::scenarios::couette::run_couette;
use micromacro::scenarios::extension::run_extension;
use micromacro::scenarios::run::RunControl;
use micromacro::Error;
use tempfile::tempdir;

fn checkpointing(dir: &std::path::Path, every: usize) -> RunControl {
    RunControl {
        checkpoint_every: Some(every),
        checkpoint_dir: Some(dir.to_path_buf()),
        resume: None,
    }
}

fn resuming(dir: &std::path::Path, step: usize) -> RunControl {
    RunControl {
        resume: Some(Checkpoint::load(&dir.join(file_name(step))).unwrap()),
        ..RunControl::default()
    }
}

#[test]
fn couette_restart_is_bitwise() {
    let dir = tempdir().unwrap();
    let mut cfg = SimConfig::defaults(ScenarioKind::CouetteHookean);
    cfg.n_particles = 12;
    cfg.elements = 10;
    cfg.t_end = 0.04;
    let full = run_couette(&cfg, &checkpointing(dir.path(), 20)).unwrap();
    let resumed = run_couette(&cfg, &resuming(dir.path(), 20)).unwrap();
    assert_eq!(full.state, resumed.state);
    let k = full.probes.t.len() - resumed.probes.t.len();
    assert_eq!(&full.probes.t[k..], &resumed.probes.t[..]);
    assert_eq!(&full.probes.u[k..], &resumed.probes.u[..]);
}

#[test]
fn extension_restart_is_bitwise() {
    let dir = tempdir().unwrap();
    let mut cfg = SimConfig::defaults(ScenarioKind::FeneExtension);
    cfg.n_particles = 30;
    cfg.t_end = 0.1;
    let full = run_extension(&cfg, &checkpointing(dir.path(), 50)).unwrap();
    let resumed = run_extension(&cfg, &resuming(dir.path(), 50)).unwrap();
    assert_eq!(full.ensemble, resumed.ensemble);
    let k = full.series.t.len() - resumed.series.t.len();
    assert_eq!(&full.series.rows[k..], &resumed.series.rows[..]);
}

#[test]
fn cavity_restart_is_bitwise() {
    let dir = tempdir().unwrap();
    let mut cfg = SimConfig::defaults(ScenarioKind::Cavity);
    cfg.nx = 3;
    cfg.ny = 3;
    cfg.n_particles = 8;
    cfg.t_end = 0.02;
    let full = run_cavity(&cfg, &checkpointing(dir.path(), 10)).unwrap();
    let resumed = run_cavity(&cfg, &resuming(dir.path(), 10)).unwrap();
    assert_eq!(full.state, resumed.state);
    assert_eq!(full.psi, resumed.psi);
    assert_eq!(full.metrics.rows.last(), resumed.metrics.rows.last());
}

#[test]
fn extended_horizon_may_resume() {
    let dir = tempdir().unwrap();
    let mut cfg = SimConfig::defaults(ScenarioKind::FeneExtension);
    cfg.n_particles = 10;
    cfg.t_end = 0.02;
    run_extension(&cfg, &checkpointing(dir.path(), 20)).unwrap();
    cfg.t_end = 0.04;
    let run = run_extension(&cfg, &resuming(dir.path(), 20)).unwrap();
    assert_eq!(run.summary.steps, 40);
}

#[test]
fn incompatible_config_is_refused() {
    let dir = tempdir().unwrap();
    let mut cfg = SimConfig::defaults(ScenarioKind::FeneExtension);
    cfg.n_particles = 10;
    cfg.t_end = 0.02;
    run_extension(&cfg, &checkpointing(dir.path(), 20)).unwrap();
    cfg.rate = 5.0;
    let err = run_extension(&cfg, &resuming(dir.path(), 20)).err().unwrap();
    assert!(matches!(err, Error::Checkpoint(_)), "{err}");
}
