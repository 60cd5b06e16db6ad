//! Restartable snapshots of a run.
//!
//! A snapshot stores the step index, the time, the configuration and its
//! hash, the macroscopic fields and every particle ensemble as JSON. Floats
//! are written in shortest round-trip form, so a resumed run continues
//! bitwise identically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{CoupledState, CouetteState, ParticleField};
use crate::energy::Ensemble;
use crate::error::{Error, Result};
use crate::fem::flow::MacroState;
use crate::potentials::Vec2;
use crate::scenarios::config::SimConfig;
use crate::stress::{StressField, SymTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub time: f64,
    pub config_hash: String,
    pub config: SimConfig,
    /// Velocity per node; the shear reduction stores `(u, 0)`.
    pub u: Vec<[f64; 2]>,
    pub p: Vec<f64>,
    /// `(τ₁₁, τ₁₂, τ₂₂)` per node.
    pub tau: Vec<[f64; 3]>,
    pub particles: Vec<Vec<[f64; 2]>>,
}

fn pack_tau(tau: &[SymTensor]) -> Vec<[f64; 3]> {
    tau.iter().map(|t| [t.xx, t.xy, t.yy]).collect()
}

fn unpack_tau(tau: &[[f64; 3]]) -> Vec<SymTensor> {
    tau.iter().map(|t| SymTensor::new(t[0], t[1], t[2])).collect()
}

fn pack_particles(field: &ParticleField) -> Vec<Vec<[f64; 2]>> {
    field
        .ensembles()
        .iter()
        .map(|e| e.particles().iter().map(|q| [q.x, q.y]).collect())
        .collect()
}

fn unpack_particles(p: &[Vec<[f64; 2]>]) -> Result<ParticleField> {
    let ensembles = p
        .iter()
        .map(|e| Ensemble::new(e.iter().map(|q| Vec2::new(q[0], q[1])).collect()))
        .collect::<Result<Vec<_>>>()?;
    ParticleField::from_ensembles(ensembles)
}

/// Configuration with the keys that do not affect the trajectory cleared.
fn trajectory_key(cfg: &SimConfig) -> SimConfig {
    SimConfig {
        t_end: 0.0,
        output_every: 1,
        parallel: false,
        ..cfg.clone()
    }
}

impl Checkpoint {
    fn new(cfg: &SimConfig, step: usize) -> Self {
        Checkpoint {
            step,
            time: step as f64 * cfg.dt,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            u: Vec::new(),
            p: Vec::new(),
            tau: Vec::new(),
            particles: Vec::new(),
        }
    }

    pub fn from_couette(cfg: &SimConfig, s: &CouetteState) -> Self {
        Checkpoint {
            u: s.u.iter().map(|&u| [u, 0.0]).collect(),
            tau: pack_tau(&s.tau),
            particles: pack_particles(&s.particles),
            ..Self::new(cfg, s.step)
        }
    }

    pub fn from_coupled(cfg: &SimConfig, s: &CoupledState) -> Self {
        Checkpoint {
            u: s.flow.u.iter().map(|v| [v.x, v.y]).collect(),
            p: s.flow.p.clone(),
            tau: pack_tau(&s.flow.tau.nodal),
            particles: pack_particles(&s.particles),
            ..Self::new(cfg, s.step)
        }
    }

    /// Snapshot of a single homogeneous ensemble.
    pub fn from_ensemble(cfg: &SimConfig, step: usize, ens: &Ensemble, tau: SymTensor) -> Self {
        Checkpoint {
            tau: pack_tau(&[tau]),
            particles: vec![ens.particles().iter().map(|q| [q.x, q.y]).collect()],
            ..Self::new(cfg, step)
        }
    }

    /// Fails unless the snapshot was written by a run with the same
    /// trajectory-relevant configuration as `cfg`.
    pub fn check_compatible(&self, cfg: &SimConfig) -> Result<()> {
        if self.config.hash() != self.config_hash {
            return Err(Error::Checkpoint("configuration hash does not match its configuration".into()));
        }
        if trajectory_key(&self.config) != trajectory_key(cfg) {
            return Err(Error::Checkpoint("snapshot was written with a different configuration".into()));
        }
        Ok(())
    }

    pub fn to_couette(&self) -> Result<CouetteState> {
        Ok(CouetteState {
            step: self.step,
            u: self.u.iter().map(|v| v[0]).collect(),
            tau: unpack_tau(&self.tau),
            particles: unpack_particles(&self.particles)?,
        })
    }

    pub fn to_coupled(&self) -> Result<CoupledState> {
        Ok(CoupledState {
            step: self.step,
            flow: MacroState {
                u: self.u.iter().map(|v| Vec2::new(v[0], v[1])).collect(),
                p: self.p.clone(),
                tau: StressField {
                    nodal: unpack_tau(&self.tau),
                },
            },
            particles: unpack_particles(&self.particles)?,
        })
    }

    pub fn to_ensemble(&self) -> Result<Ensemble> {
        match self.particles.as_slice() {
            [one] => Ensemble::new(one.iter().map(|q| Vec2::new(q[0], q[1])).collect()),
            _ => Err(Error::Checkpoint("expected a single ensemble".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        serde_json::from_reader(r).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

/// File name of the snapshot written at `step`.
pub fn file_name(step: usize) -> String {
    format!("checkpoint_{step:08}.json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::config::ScenarioKind;

    #[test]
    fn round_trip_is_bitwise() {
        let cfg = SimConfig::defaults(ScenarioKind::FeneExtension);
        let ens = Ensemble::new(vec![Vec2::new(0.1 + 1e-17, -1.0 / 3.0), Vec2::new(2.5e-300, 7.0 / 9.0)]).unwrap();
        let c = Checkpoint::from_ensemble(&cfg, 17, &ens, SymTensor::new(1.0 / 7.0, -0.3, 2.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(file_name(17));
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_ensemble().unwrap(), ens);
        back.check_compatible(&SimConfig { t_end: 99.0, ..cfg.clone() }).unwrap();
        assert!(back.check_compatible(&SimConfig { seed: 1, ..cfg }).is_err());
    }
}
