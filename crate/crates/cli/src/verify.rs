//! Quick invariant checks that exercise every layer of the solver in a few
//! seconds.

use std::f64::consts::PI;

use micromacro::checkpoint::Checkpoint;
use micromacro::coupling::{initial_ensemble, Physics, StabilityTally};
use micromacro::energy::{discrete_free_energy, free_energy_gradient};
use micromacro::micro::{implicit_gradient_step, MicroStepConfig};
use micromacro::scenarios::cavity::run_cavity;
use micromacro::scenarios::config::{ScenarioKind, SimConfig};
use micromacro::scenarios::couette::run_couette;
use micromacro::scenarios::oldroyd::{oldroyd_b_reference, OldroydConfig};
use micromacro::scenarios::run::RunControl;
use micromacro::{BandwidthPolicy, Ensemble, Kernel, Potential, Result, Vec2};

type Check = fn() -> Result<(bool, String)>;

fn potentials() -> [Potential; 2] {
    [Potential::hookean(), Potential::fene(50f64.sqrt())]
}

fn gradient() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (k, pot) in potentials().iter().enumerate() {
        for n in [1, 2, 5, 20] {
            let ens = initial_ensemble(k as u64 * 10 + n as u64, n, pot)?;
            let kernel = Kernel::new(0.7);
            let g = free_energy_gradient(&ens, pot, &kernel)?;
            let base = ens.particles().to_vec();
            let h = 1e-5;
            for i in 0..n {
                for a in 0..2 {
                    let shifted = |d: f64| -> Result<f64> {
                        let mut p = base.clone();
                        p[i][a] += d;
                        discrete_free_energy(&Ensemble::new(p)?, pot, &kernel)
                    };
                    let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
                    worst = worst.max((fd - g[i][a]).abs() / g[i].norm().max(1e-3));
                }
            }
        }
    }
    Ok((worst < 1e-5, format!("max relative error {worst:.1e}")))
}

fn stability() -> Result<(bool, String)> {
    let mut tally = StabilityTally::default();
    for (k, pot) in potentials().iter().enumerate() {
        let policy = if pot.is_fene() {
            BandwidthPolicy::Fixed(0.01)
        } else {
            BandwidthPolicy::MedianRule
        };
        let mut ens = initial_ensemble(k as u64, 50, pot)?;
        ens = Ensemble::new(ens.iter().map(|q| q * 1.5).filter(|q| pot.is_feasible(q, 1e-2)).collect())?;
        let cfg = MicroStepConfig::new(1e-2, 0.5);
        for _ in 0..50 {
            let r = implicit_gradient_step(&ens, pot, policy, &cfg)?;
            tally.record(r.stability_residual, r.stability_ok, r.converged);
            ens = r.ensemble_out;
        }
    }
    Ok((
        tally.violations == 0,
        format!("{} violations in {} steps", tally.violations, tally.steps),
    ))
}

/// Start-up Couette flow of a Newtonian fluid, lower plate moving.
fn newtonian_series(y: f64, t: f64, nu: f64) -> f64 {
    let tail: f64 = (1..2000)
        .map(|n| {
            let k = n as f64 * PI;
            (k * y).sin() / n as f64 * (-k * k * nu * t).exp()
        })
        .sum();
    1.0 - y - 2.0 / PI * tail
}

fn reference() -> Result<(bool, String)> {
    let physics = Physics {
        re: 1.0,
        wi: 0.1,
        eta_s: 1.0,
        eps_p: 0.0,
    };
    let mut cfg = OldroydConfig::new(physics, &[0.2, 0.5, 0.8]);
    cfg.m_fine = 200;
    cfg.t_end = 0.1;
    let s = oldroyd_b_reference(&cfg)?;
    let k = s.t.len() - 1;
    let worst = cfg
        .probes
        .iter()
        .enumerate()
        .map(|(j, &y)| (s.u[k][j] - newtonian_series(y, s.t[k], 1.0)).abs())
        .fold(0.0, f64::max);
    Ok((worst < 1e-4, format!("Newtonian limit error {worst:.1e}")))
}

fn incompressibility() -> Result<(bool, String)> {
    let mut cfg = SimConfig::defaults(ScenarioKind::Cavity);
    cfg.nx = 4;
    cfg.ny = 4;
    cfg.n_particles = 8;
    cfg.t_end = 0.01;
    let run = run_cavity(&cfg, &RunControl::default())?;
    let d = run.summary.max_divergence.unwrap_or(f64::NAN);
    Ok((d <= 1e-8, format!("max divergence {d:.1e}")))
}

fn determinism_and_restart() -> Result<(bool, String)> {
    let mut cfg = SimConfig::defaults(ScenarioKind::CouetteHookean);
    cfg.n_particles = 8;
    cfg.elements = 8;
    cfg.t_end = 0.02;
    cfg.parallel = false;
    let seq = run_couette(&cfg, &RunControl::default())?;
    cfg.parallel = true;
    let par = run_couette(&cfg, &RunControl::default())?;
    let same = seq.state == par.state;

    let path = std::env::temp_dir().join(format!("micromacro-verify-{}.json", std::process::id()));
    Checkpoint::from_couette(&cfg, &seq.state).save(&path)?;
    let loaded = Checkpoint::load(&path);
    let _ = std::fs::remove_file(&path);
    let restored = loaded?.to_couette()? == seq.state;
    let echoed = SimConfig::from_toml_str(&cfg.to_toml_string())? == cfg;
    Ok((
        same && restored && echoed,
        format!("sequential = parallel: {same}, checkpoint round trip: {restored}, config round trip: {echoed}"),
    ))
}

fn free_energy_finite() -> Result<(bool, String)> {
    let pot = Potential::fene(50f64.sqrt());
    let near = Ensemble::new(vec![Vec2::new(2.6, 0.0), Vec2::new(-0.3, 0.1)])?;
    let f = discrete_free_energy(&near, &pot, &Kernel::new(0.01))?;
    Ok((f.is_finite(), format!("free energy near the FENE barrier {f:.3}")))
}

/// Runs every check, printing one line each; true when all pass.
pub fn run_all() -> bool {
    let checks: [(&str, Check); 6] = [
        ("free-energy gradient", gradient),
        ("energy stability", stability),
        ("FENE barrier", free_energy_finite),
        ("Oldroyd-B reference", reference),
        ("incompressibility", incompressibility),
        ("determinism and restart", determinism_and_restart),
    ];
    let mut all = true;
    for (name, check) in checks {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        all &= ok;
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    all
}
