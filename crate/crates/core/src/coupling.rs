//! Operator splitting between the flow and the particle ensembles.
//!
//! One time step runs, in order: the momentum solve with the old stress, the
//! pressure correction, the implicit free-energy step and the deformation
//! `(I + Δt ∇u^{n+1})` at every node, semi-Lagrangian transport of the
//! ensembles, and the stress refresh from the new particles.

use serde::{Deserialize, Serialize};

use crate::energy::{Ensemble, Workspace};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fem::couette::CouetteSolver;
use crate::fem::flow::{BoundaryData, FlowSolver, MacroState};
use crate::fem::mesh::Triangulation;
use crate::micro::{deformation_update, implicit_gradient_step_ws, MicroStepConfig};
use crate::potentials::{BandwidthPolicy, Mat2, Potential, Vec2, FEASIBILITY_MARGIN};
use crate::rng;
use crate::stress::{node_stress, project_stress, StressField, SymTensor};

/// Random stream used for the initial ensemble.
pub const INIT_STREAM: u64 = 0;

/// Nondimensional groups of the coupled system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub re: f64,
    pub wi: f64,
    pub eta_s: f64,
    pub eps_p: f64,
}

/// Everything needed to advance and evaluate the ensembles.
#[derive(Clone, Copy, Debug)]
pub struct MicroModel {
    pub potential: Potential,
    pub bandwidth: BandwidthPolicy,
    pub step: MicroStepConfig,
    pub eps_p: f64,
    pub exec: Exec,
}

impl MicroModel {
    pub fn stress(&self, ens: &Ensemble) -> Result<SymTensor> {
        node_stress(ens, &self.potential, self.eps_p, self.step.wi)
    }
}

/// Standard-normal sample of `n` configurations, shared by all nodes.
pub fn initial_ensemble(seed: u64, n: usize, pot: &Potential) -> Result<Ensemble> {
    let mut r = rng::stream(seed, INIT_STREAM, 0);
    Ensemble::new(rng::sample_initial_ensemble(&mut r, n, 1.0, pot, FEASIBILITY_MARGIN)?)
}

/// One ensemble per node, all of the same size and sharing index labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleField {
    ensembles: Vec<Ensemble>,
}

impl ParticleField {
    pub fn uniform(ens: Ensemble, n_nodes: usize) -> Self {
        ParticleField {
            ensembles: vec![ens; n_nodes],
        }
    }

    pub fn from_ensembles(ensembles: Vec<Ensemble>) -> Result<Self> {
        let n = ensembles.first().map_or(0, |e| e.len());
        if let Some(e) = ensembles.iter().find(|e| e.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                got: e.len(),
            });
        }
        Ok(ParticleField { ensembles })
    }

    pub fn ensembles(&self) -> &[Ensemble] {
        &self.ensembles
    }

    pub fn n_nodes(&self) -> usize {
        self.ensembles.len()
    }

    pub fn n_particles(&self) -> usize {
        self.ensembles.first().map_or(0, |e| e.len())
    }

    /// Per-node stresses; failures are located at `step`.
    pub fn stresses(&self, model: &MicroModel, step: usize) -> Result<Vec<SymTensor>> {
        model
            .exec
            .try_map(&self.ensembles, |node, e| model.stress(e).map_err(|err| err.at_node(step, node)))
    }
}

/// Energy-stability bookkeeping of implicit micro steps.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StabilityTally {
    pub steps: u64,
    pub violations: u64,
    pub unconverged: u64,
    pub max_residual: f64,
}

impl StabilityTally {
    pub fn merge(&mut self, other: &StabilityTally) {
        self.steps += other.steps;
        self.violations += other.violations;
        self.unconverged += other.unconverged;
        if self.steps == other.steps || other.max_residual > self.max_residual {
            self.max_residual = other.max_residual;
        }
    }

    pub fn record(&mut self, residual: f64, ok: bool, converged: bool) {
        if self.steps == 0 || residual > self.max_residual {
            self.max_residual = residual;
        }
        self.steps += 1;
        self.violations += u64::from(!ok);
        self.unconverged += u64::from(!converged);
    }
}

/// Outcome of the micro update of one time step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MicroReport {
    pub tally: StabilityTally,
    /// Mean over nodes of the free energy after the implicit step.
    pub free_energy: f64,
    pub max_optimizer_iters: usize,
}

/// Implicit step followed by the deformation with the nodal velocity
/// gradient, at every node.
pub fn micro_update(
    model: &MicroModel,
    field: &ParticleField,
    grads: &[Mat2],
    step: usize,
) -> Result<(ParticleField, MicroReport)> {
    if grads.len() != field.n_nodes() {
        return Err(Error::SizeMismatch {
            expected: field.n_nodes(),
            got: grads.len(),
        });
    }
    let results = model.exec.try_map(&field.ensembles, |node, ens| {
        let mut ws = Workspace::new();
        let r = implicit_gradient_step_ws(ens, &model.potential, model.bandwidth, &model.step, &mut ws)
            .map_err(|e| e.at_node(step, node))?;
        let out = deformation_update(&r.ensemble_out, &grads[node], model.step.dt, &model.potential);
        Ok((out, r))
    })?;
    let mut report = MicroReport::default();
    let mut ensembles = Vec::with_capacity(results.len());
    for (out, r) in results {
        report.tally.record(r.stability_residual, r.stability_ok, r.converged);
        report.free_energy += r.energy_after;
        report.max_optimizer_iters = report.max_optimizer_iters.max(r.optimizer_iters);
        ensembles.push(out);
    }
    report.free_energy /= ensembles.len() as f64;
    Ok((ParticleField { ensembles }, report))
}

/// Semi-Lagrangian transport: the new ensemble at node `x` is the
/// index-wise barycentric interpolation of the old field at `x - Δt u(x)`,
/// with departure points clamped into the domain.
pub fn advect_and_interpolate(
    field: &ParticleField,
    u: &[Vec2],
    mesh: &Triangulation,
    dt: f64,
    exec: Exec,
) -> ParticleField {
    let old = &field.ensembles;
    let ensembles = exec.map(old, |node, ens| {
        let disp = u[node] * dt;
        if disp == Vec2::zeros() {
            return ens.clone();
        }
        let (elem, lambda) = mesh.locate(mesh.nodes[node] - disp);
        let verts = mesh.elements[elem].nodes;
        let src = verts.map(|v| old[v].particles());
        let particles = (0..ens.len())
            .map(|i| src[0][i] * lambda[0] + src[1][i] * lambda[1] + src[2][i] * lambda[2])
            .collect();
        Ensemble::from_vec_unchecked(particles)
    });
    ParticleField { ensembles }
}

/// State of the shear reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct CouetteState {
    pub step: usize,
    pub u: Vec<f64>,
    pub tau: Vec<SymTensor>,
    pub particles: ParticleField,
}

pub struct CouetteModel {
    pub solver: CouetteSolver,
    pub micro: MicroModel,
}

impl CouetteModel {
    pub fn new(solver: CouetteSolver, micro: MicroModel) -> Result<Self> {
        if solver.config().dt != micro.step.dt {
            return Err(Error::Config("flow and micro time steps differ".into()));
        }
        Ok(CouetteModel { solver, micro })
    }

    pub fn dt(&self) -> f64 {
        self.micro.step.dt
    }

    pub fn initial_state(&self, ens: Ensemble) -> Result<CouetteState> {
        let particles = ParticleField::uniform(ens, self.solver.n_nodes());
        let tau = particles.stresses(&self.micro, 0)?;
        Ok(CouetteState {
            step: 0,
            u: self.solver.initial_velocity(),
            tau,
            particles,
        })
    }

    pub fn step(&self, s: &mut CouetteState) -> Result<MicroReport> {
        let tau21: Vec<f64> = s.tau.iter().map(|t| t.xy).collect();
        let u = self.solver.step(&s.u, &tau21).map_err(|e| e.at_step(s.step + 1))?;
        let grads: Vec<Mat2> = self
            .solver
            .shear_rate(&u)
            .into_iter()
            .map(|g| Mat2::new(0.0, g, 0.0, 0.0))
            .collect();
        let (particles, report) = micro_update(&self.micro, &s.particles, &grads, s.step + 1)?;
        s.tau = particles.stresses(&self.micro, s.step + 1)?;
        s.particles = particles;
        s.u = u;
        s.step += 1;
        Ok(report)
    }
}

/// State of the 2D coupled problem.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub step: usize,
    pub flow: MacroState,
    pub particles: ParticleField,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub micro: MicroReport,
    /// Max norm of the discrete divergence functional after the projection.
    pub divergence: f64,
}

pub struct CoupledModel<B: BoundaryData> {
    pub solver: FlowSolver,
    pub micro: MicroModel,
    pub bc: B,
}

impl<B: BoundaryData> CoupledModel<B> {
    pub fn new(solver: FlowSolver, micro: MicroModel, bc: B) -> Result<Self> {
        if solver.config().dt != micro.step.dt {
            return Err(Error::Config("flow and micro time steps differ".into()));
        }
        Ok(CoupledModel { solver, micro, bc })
    }

    pub fn dt(&self) -> f64 {
        self.micro.step.dt
    }

    /// Rest state with the same ensemble at every fine node.
    pub fn initial_state(&self, ens: Ensemble) -> Result<CoupledState> {
        let mesh = self.solver.mesh();
        let particles = ParticleField::uniform(ens, mesh.fine.n_nodes());
        let mut flow = MacroState::at_rest(mesh);
        for (i, u) in flow.u.iter_mut().enumerate() {
            if mesh.fine.is_boundary(i) {
                *u = self.bc.velocity(i, mesh.fine.nodes[i], 0.0);
            }
        }
        flow.tau = project_stress(particles.stresses(&self.micro, 0)?, mesh.fine.n_nodes())?;
        Ok(CoupledState {
            step: 0,
            flow,
            particles,
        })
    }

    pub fn step(&self, s: &mut CoupledState) -> Result<StepReport> {
        let n = s.step + 1;
        let t_new = n as f64 * self.dt();
        let mesh = self.solver.mesh();
        let macro_err = |e: Error| e.at_step(n);
        let u_tilde = self
            .solver
            .momentum_step(&s.flow, t_new, &self.bc, None)
            .map_err(macro_err)?;
        let (u, p) = self.solver.pressure_correction(&u_tilde, &s.flow.p).map_err(macro_err)?;
        let divergence = self
            .solver
            .divergence(&u)
            .into_iter()
            .fold(0.0f64, |m, d| m.max(d.abs()));
        let grads = self.solver.velocity_gradients(&u);
        let (deformed, micro) = micro_update(&self.micro, &s.particles, &grads, n)?;
        let particles = advect_and_interpolate(&deformed, &u, &mesh.fine, self.dt(), self.micro.exec);
        let tau = project_stress(
            particles.stresses(&self.micro, n)?,
            mesh.fine.n_nodes(),
        )?;
        s.flow = MacroState { u, p, tau };
        s.particles = particles;
        s.step = n;
        Ok(StepReport { micro, divergence })
    }
}

/// Stress field of a particle field, for callers that only hold the field.
pub fn stress_field(model: &MicroModel, field: &ParticleField) -> Result<StressField> {
    project_stress(field.stresses(model, 0)?, field.n_nodes())
}
