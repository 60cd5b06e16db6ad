//! Start-up shear between parallel planes with the one-dimensional
//! reduction: Hookean dumbbells at low Weissenberg number and FENE dumbbells
//! at high Weissenberg number.

use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::coupling::{initial_ensemble, CouetteModel, CouetteState, StabilityTally};
use crate::error::Result;
use crate::fem::couette::{CouetteConfig, CouetteSolver};
use crate::scenarios::config::{ScenarioKind, SimConfig};
use crate::scenarios::output::{time_label, write_csv, Cell, ProbeSeries};
use crate::scenarios::run::{sample_uniform, EnergyLog, RunControl, RunSummary};

pub const HOOKEAN_PROBES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const SHEAR_PROBES: [f64; 4] = [0.2, 0.5, 0.8, 1.0];

pub fn probe_locations(kind: ScenarioKind) -> &'static [f64] {
    match kind {
        ScenarioKind::FeneShear => &SHEAR_PROBES,
        _ => &HOOKEAN_PROBES,
    }
}

pub fn couette_model(cfg: &SimConfig) -> Result<CouetteModel> {
    let solver = CouetteSolver::new(CouetteConfig {
        re: cfg.re,
        eta_s: cfg.eta_s,
        dt: cfg.dt,
        elements: cfg.elements,
        lid: cfg.lid,
    })?;
    CouetteModel::new(solver, cfg.micro_model())
}

pub struct CouetteRun {
    pub probes: ProbeSeries,
    pub energy: EnergyLog,
    pub summary: RunSummary,
    pub state: CouetteState,
}

fn probe_row(s: &CouetteState, locations: &[f64]) -> (Vec<f64>, (Vec<f64>, Vec<f64>)) {
    let t12: Vec<f64> = s.tau.iter().map(|t| t.xy).collect();
    let n1: Vec<f64> = s.tau.iter().map(|t| t.normal_difference()).collect();
    let u = locations.iter().map(|&y| sample_uniform(&s.u, y)).collect();
    let st = locations.iter().map(|&y| sample_uniform(&t12, y)).collect();
    let sn = locations.iter().map(|&y| sample_uniform(&n1, y)).collect();
    (u, (st, sn))
}

/// Runs the shear reduction to `t_end`, recording probes every
/// `output_every` steps.
pub fn run_couette(cfg: &SimConfig, ctl: &RunControl) -> Result<CouetteRun> {
    let model = couette_model(cfg)?;
    let locations = probe_locations(cfg.scenario);
    let mut state = match ctl.resume_for(cfg)? {
        Some(c) => c.to_couette()?,
        None => model.initial_state(initial_ensemble(cfg.seed, cfg.n_particles, &cfg.potential())?)?,
    };
    let mut probes = ProbeSeries::new(locations, true);
    let mut energy = EnergyLog::default();
    let mut tally = StabilityTally::default();
    if state.step == 0 {
        let (u, st) = probe_row(&state, locations);
        probes.push(0.0, u, Some(st));
    }
    let n_steps = cfg.n_steps();
    while state.step < n_steps {
        let report = model.step(&mut state)?;
        tally.merge(&report.tally);
        energy.observe(report.tally.max_residual);
        let t = state.step as f64 * cfg.dt;
        if state.step % cfg.output_every == 0 || state.step == n_steps {
            let (u, st) = probe_row(&state, locations);
            probes.push(t, u, Some(st));
            energy.push(state.step, t, report.free_energy);
        }
        ctl.after_step(state.step, || Ok(Checkpoint::from_couette(cfg, &state)))?;
    }
    Ok(CouetteRun {
        probes,
        energy,
        summary: RunSummary {
            steps: state.step,
            tally,
            max_divergence: None,
        },
        state,
    })
}

impl CouetteRun {
    pub fn write(&self, dir: &Path, cfg: &SimConfig) -> Result<()> {
        self.probes.write_csv(&dir.join("probes.csv"))?;
        self.energy.write_csv(&dir.join("energy.csv"))?;
        self.summary.write(&dir.join("summary.toml"))?;
        let t = self.state.step as f64 * cfg.dt;
        let rows = self.state.particles.ensembles().iter().enumerate().flat_map(|(node, ens)| {
            ens.particles()
                .iter()
                .enumerate()
                .map(move |(i, q)| [Cell::from(i), Cell::Real(q.x), Cell::Real(q.y), Cell::from(node)])
        });
        write_csv(
            &dir.join(format!("particles_t{}.csv", time_label(t))),
            &["particle_index", "q1", "q2", "node_id"],
            rows,
        )
    }
}
