//! Homogeneous planar extension of a single material point with
//! `∇u = ε(t) diag(1, -1)`, either switched off after `t = 9/r` (start-up)
//! or held constant.

use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::coupling::{initial_ensemble, StabilityTally};
use crate::energy::{Ensemble, Workspace};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::micro::{deform_in_place, implicit_gradient_step_ws, sde_step_in_place};
use crate::potentials::{Mat2, FEASIBILITY_MARGIN};
use crate::rng;
use crate::scenarios::config::{ExtensionMode, SimConfig};
use crate::scenarios::output::{time_label, write_csv, Cell, TimeSeries};
use crate::scenarios::run::{EnergyLog, RunControl, RunSummary};
use crate::stress::node_stress;

/// Times at which particle snapshots are kept.
pub const SNAPSHOT_TIMES: [f64; 2] = [3.0, 8.0];

/// Random streams of the SDE oracle start here; stream 0 is the particle
/// initialization.
const SDE_STREAM_BASE: u64 = 1 << 32;

pub const SERIES_COLUMNS: [&str; 3] = ["mean_sq_ext_over_b", "normal_stress_diff", "eps_rate"];

/// Extension rate in effect during the step that ends at step index `step`.
pub fn eps_rate(cfg: &SimConfig, step: usize) -> f64 {
    match cfg.mode {
        ExtensionMode::Constant => cfg.rate,
        ExtensionMode::Startup => {
            let t = step as f64 * cfg.dt;
            if t <= 9.0 / cfg.rate + 1e-9 * cfg.dt {
                cfg.rate
            } else {
                0.0
            }
        }
    }
}

fn extension_gradient(rate: f64) -> Mat2 {
    Mat2::new(rate, 0.0, 0.0, -rate)
}

pub struct ExtensionRun {
    /// `mean_sq_ext_over_b, normal_stress_diff, eps_rate` over time.
    pub series: TimeSeries,
    pub snapshots: Vec<(f64, Ensemble)>,
    pub energy: EnergyLog,
    pub summary: RunSummary,
    pub ensemble: Ensemble,
}

fn series_row(cfg: &SimConfig, ens: &Ensemble, rate: f64) -> Result<Vec<f64>> {
    let tau = node_stress(ens, &cfg.potential(), cfg.eps_p, cfg.wi)?;
    Ok(vec![ens.mean_square_extension() / cfg.b, tau.normal_difference(), rate])
}

pub fn run_extension(cfg: &SimConfig, ctl: &RunControl) -> Result<ExtensionRun> {
    let pot = cfg.potential();
    let model = cfg.micro_model();
    let (mut ens, mut step) = match ctl.resume_for(cfg)? {
        Some(c) => (c.to_ensemble()?, c.step),
        None => (initial_ensemble(cfg.seed, cfg.n_particles, &pot)?, 0),
    };
    let snapshot_steps: Vec<(f64, usize)> = SNAPSHOT_TIMES
        .iter()
        .map(|&t| (t, (t / cfg.dt).round() as usize))
        .collect();
    let mut series = TimeSeries::new(&SERIES_COLUMNS);
    let mut snapshots = Vec::new();
    let mut energy = EnergyLog::default();
    let mut tally = StabilityTally::default();
    if step == 0 {
        series.push(0.0, series_row(cfg, &ens, eps_rate(cfg, 0))?);
    }
    let mut ws = Workspace::new();
    let n_steps = cfg.n_steps();
    while step < n_steps {
        step += 1;
        let r = implicit_gradient_step_ws(&ens, &pot, model.bandwidth, &model.step, &mut ws)
            .map_err(|e| e.at_node(step, 0))?;
        tally.record(r.stability_residual, r.stability_ok, r.converged);
        energy.observe(r.stability_residual);
        let rate = eps_rate(cfg, step);
        ens = r.ensemble_out;
        deform_in_place(ens.particles_mut(), &extension_gradient(rate), cfg.dt, &pot);
        let t = step as f64 * cfg.dt;
        if step % cfg.output_every == 0 || step == n_steps {
            series.push(t, series_row(cfg, &ens, rate).map_err(|e| e.at_node(step, 0))?);
            energy.push(step, t, r.energy_after);
        }
        if let Some(&(ts, _)) = snapshot_steps.iter().find(|s| s.1 == step) {
            snapshots.push((ts, ens.clone()));
        }
        ctl.after_step(step, || {
            let tau = node_stress(&ens, &pot, cfg.eps_p, cfg.wi)?;
            Ok(Checkpoint::from_ensemble(cfg, step, &ens, tau))
        })?;
    }
    Ok(ExtensionRun {
        series,
        snapshots,
        energy,
        summary: RunSummary {
            steps: step,
            tally,
            max_divergence: None,
        },
        ensemble: ens,
    })
}

impl ExtensionRun {
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.series.write_csv(&dir.join("hysteresis.csv"))?;
        self.energy.write_csv(&dir.join("energy.csv"))?;
        self.summary.write(&dir.join("summary.toml"))?;
        for (t, ens) in &self.snapshots {
            write_csv(
                &dir.join(format!("particles_t{}.csv", time_label(*t))),
                &["particle_index", "q1", "q2"],
                ens.particles()
                    .iter()
                    .enumerate()
                    .map(|(i, q)| [Cell::from(i), Cell::Real(q.x), Cell::Real(q.y)]),
            )?;
        }
        Ok(())
    }
}

/// Euler-Maruyama reference for the same extension history: the mean of
/// `|q|² / b` over `n_paths` independent dumbbells, recorded every
/// `output_every` steps. Paths are simulated in batches of `batch` with one
/// random stream per batch, so the result does not depend on scheduling.
pub fn sde_extension_series(cfg: &SimConfig, n_paths: usize, batch: usize, exec: Exec) -> Result<TimeSeries> {
    if n_paths == 0 || batch == 0 {
        return Err(Error::Config("the SDE reference needs at least one path".into()));
    }
    let pot = cfg.potential();
    let n_steps = cfg.n_steps();
    let record: Vec<usize> = (0..=n_steps)
        .filter(|&s| s % cfg.output_every == 0 || s == n_steps)
        .collect();
    let batches: Vec<usize> = (0..n_paths.div_ceil(batch))
        .map(|k| batch.min(n_paths - k * batch))
        .collect();
    let sigma = (1.0 / cfg.wi).sqrt();
    let sums = exec.try_map(&batches, |k, &size| -> Result<Vec<f64>> {
        let mut rng = rng::stream(cfg.seed, SDE_STREAM_BASE + k as u64, 0);
        let margin = cfg.dt.sqrt().max(FEASIBILITY_MARGIN);
        let mut q = rng::sample_initial_ensemble(&mut rng, size, 1.0, &pot, margin)?;
        let msq = |q: &[crate::potentials::Vec2]| q.iter().map(|p| p.norm_squared()).sum::<f64>();
        let mut out = Vec::with_capacity(record.len());
        out.push(msq(&q));
        for step in 1..=n_steps {
            // explicit scheme: the rate of the interval's left end
            let grad = extension_gradient(eps_rate(cfg, step - 1));
            sde_step_in_place(&mut q, &grad, &pot, cfg.wi, cfg.dt, sigma, &mut rng)?;
            if step % cfg.output_every == 0 || step == n_steps {
                out.push(msq(&q));
            }
        }
        Ok(out)
    })?;
    let mut series = TimeSeries::new(&["mean_sq_ext_over_b"]);
    for (j, &s) in record.iter().enumerate() {
        let total: f64 = sums.iter().map(|b| b[j]).sum();
        series.push(s as f64 * cfg.dt, vec![total / (n_paths as f64 * cfg.b)]);
    }
    Ok(series)
}
