//! Pieces shared by the scenario runners: checkpoint control, the energy
//! log and the run summary.

use std::path::{Path, PathBuf};

use crate::checkpoint::{self, Checkpoint};
use crate::coupling::StabilityTally;
use crate::error::Result;
use crate::scenarios::config::SimConfig;
use crate::scenarios::output::{write_csv, Cell};

/// Checkpointing and restart options of a run.
#[derive(Clone, Debug, Default)]
pub struct RunControl {
    /// Write a snapshot every this many steps.
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Continue from this snapshot instead of the initial state.
    pub resume: Option<Checkpoint>,
}

impl RunControl {
    pub(crate) fn resume_for(&self, cfg: &SimConfig) -> Result<Option<&Checkpoint>> {
        match &self.resume {
            Some(c) => {
                c.check_compatible(cfg)?;
                Ok(Some(c))
            }
            None => Ok(None),
        }
    }

    pub(crate) fn after_step(&self, step: usize, snapshot: impl FnOnce() -> Result<Checkpoint>) -> Result<()> {
        if let (Some(every), Some(dir)) = (self.checkpoint_every, &self.checkpoint_dir) {
            if every > 0 && step % every == 0 {
                snapshot()?.save(&dir.join(checkpoint::file_name(step)))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    pub free_energy: f64,
    /// Largest stability residual over nodes and over the steps since the
    /// previous row.
    pub stability_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLog {
    pub rows: Vec<EnergyRow>,
    pending: Option<f64>,
}

impl EnergyLog {
    pub fn observe(&mut self, residual: f64) {
        self.pending = Some(self.pending.map_or(residual, |p| p.max(residual)));
    }

    pub fn push(&mut self, step: usize, t: f64, free_energy: f64) {
        let stability_residual = self.pending.take().unwrap_or(f64::NEG_INFINITY);
        self.rows.push(EnergyRow {
            step,
            t,
            free_energy,
            stability_residual,
        });
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["step", "t", "free_energy", "stability_residual"],
            self.rows.iter().map(|r| {
                [
                    Cell::from(r.step),
                    Cell::Real(r.t),
                    Cell::Real(r.free_energy),
                    Cell::Real(r.stability_residual),
                ]
            }),
        )
    }
}

/// Counters reported at the end of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub tally: StabilityTally,
    /// Largest discrete divergence after a projection, for 2D runs.
    pub max_divergence: Option<f64>,
}

impl RunSummary {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = format!(
            "steps = {}\nmicro_steps = {}\nstability_violations = {}\nunconverged_steps = {}\nmax_stability_residual = {:?}\n",
            self.steps, self.tally.steps, self.tally.violations, self.tally.unconverged, self.tally.max_residual
        );
        if let Some(d) = self.max_divergence {
            s.push_str(&format!("max_divergence = {d:?}\n"));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Echoes the effective configuration into `dir/config.toml`.
pub fn write_config_echo(dir: &Path, cfg: &SimConfig) -> Result<()> {
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    Ok(())
}

/// Linear interpolation of nodal values on a uniform grid of `[0, 1]`.
pub(crate) fn sample_uniform(values: &[f64], y: f64) -> f64 {
    let m = values.len() - 1;
    let s = (y * m as f64).clamp(0.0, m as f64);
    let i = (s.floor() as usize).min(m - 1);
    let w = s - i as f64;
    if w == 0.0 {
        values[i]
    } else {
        (1.0 - w) * values[i] + w * values[i + 1]
    }
}
