//! Incompressible flow on the isoP2/P1 mesh pair.
//!
//! Velocity is P1 on the fine mesh, pressure P1 on the coarse mesh. One step
//! solves the linearized momentum equation with the lagged pressure
//!
//! ```text
//! Re (ũ - uⁿ)/Δt + Re (uⁿ·∇)ũ - η_s Δũ = -∇pⁿ + ∇·τⁿ
//! ```
//!
//! and then projects `ũ` onto discretely divergence-free fields. The
//! projection uses the algebraic pressure Laplacian `D M_L⁻¹ Dᵀ`, with `D` the
//! divergence functional `(∇·u, ψ_k)` and `M_L` the lumped fine mass, so the
//! corrected velocity satisfies `D u = 0` to solver precision. The velocity
//! correction `M_L⁻¹ Dᵀ δp` is the area-weighted nodal average of `-∇δp`.

use crate::error::{Error, Result};
use crate::fem::banded::{Banded, BandedLu};
use crate::fem::mesh::MeshPair;
use crate::potentials::{Mat2, Vec2};
use crate::stress::StressField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub re: f64,
    pub eta_s: f64,
    pub dt: f64,
}

/// Nodal velocity on the fine mesh, pressure on the coarse mesh and the P1
/// stress field.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroState {
    pub u: Vec<Vec2>,
    pub p: Vec<f64>,
    pub tau: StressField,
}

impl MacroState {
    pub fn at_rest(mesh: &MeshPair) -> Self {
        MacroState {
            u: vec![Vec2::zeros(); mesh.fine.n_nodes()],
            p: vec![0.0; mesh.coarse.n_nodes()],
            tau: StressField::zeros(mesh.fine.n_nodes()),
        }
    }
}

/// Dirichlet velocity at boundary node `node` located at `x`, time `t`.
pub trait BoundaryData: Sync {
    fn velocity(&self, node: usize, x: Vec2, t: f64) -> Vec2;
}

impl<F: Fn(usize, Vec2, f64) -> Vec2 + Sync> BoundaryData for F {
    fn velocity(&self, node: usize, x: Vec2, t: f64) -> Vec2 {
        self(node, x, t)
    }
}

/// Body force density, used by manufactured-solution tests.
pub type BodyForce<'a> = &'a (dyn Fn(Vec2) -> Vec2 + Sync);

pub struct FlowSolver {
    mesh: MeshPair,
    cfg: FlowConfig,
    mass: Banded,
    base: Banded,
    lumped: Vec<f64>,
    coarse_lumped: Vec<f64>,
    /// `(coarse node, (∂_x φ_a, ψ_k), (∂_y φ_a, ψ_k))` for every fine node `a`.
    div: Vec<Vec<(usize, f64, f64)>>,
    /// Interior angle of every element at each of its vertices.
    angles: Vec<[f64; 3]>,
    angle_sum: Vec<f64>,
    pressure: BandedLu,
    stream: BandedLu,
}

impl FlowSolver {
    pub fn new(mesh: MeshPair, cfg: FlowConfig) -> Result<Self> {
        if !(cfg.re > 0.0 && cfg.dt > 0.0 && cfg.eta_s >= 0.0) {
            return Err(Error::Config(format!(
                "flow solver needs Re > 0, dt > 0, eta_s >= 0 (got {cfg:?})"
            )));
        }
        let fine = &mesh.fine;
        let n = fine.n_nodes();
        let bw = fine.nx + 2;
        let mut mass = Banded::zeros(n, bw);
        let mut stiff = Banded::zeros(n, bw);
        for e in &fine.elements {
            for a in 0..3 {
                for b in 0..3 {
                    let m = e.area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    mass.add(e.nodes[a], e.nodes[b], m);
                    stiff.add(e.nodes[a], e.nodes[b], e.area * e.grads[a].dot(&e.grads[b]));
                }
            }
        }
        let mut base = mass.clone();
        base.axpby(cfg.re / cfg.dt, cfg.eta_s, &stiff);

        let angles: Vec<[f64; 3]> = fine
            .elements
            .iter()
            .map(|e| {
                std::array::from_fn(|c| {
                    let p = fine.nodes[e.nodes[c]];
                    let a = fine.nodes[e.nodes[(c + 1) % 3]] - p;
                    let b = fine.nodes[e.nodes[(c + 2) % 3]] - p;
                    a.perp(&b).abs().atan2(a.dot(&b))
                })
            })
            .collect();
        let mut angle_sum = vec![0.0; n];
        for (e, ang) in fine.elements.iter().zip(&angles) {
            for c in 0..3 {
                angle_sum[e.nodes[c]] += ang[c];
            }
        }

        let div = divergence_columns(&mesh);
        let lumped = fine.lumped_mass();
        let coarse_lumped = mesh.coarse.lumped_mass();
        let pressure = pressure_matrix(&mesh, &div, &lumped).factor()?;

        let mut stream = stiff;
        for i in 0..n {
            if fine.is_boundary(i) {
                stream.set_identity_row(i);
            } else {
                for j in stream.row_range(i) {
                    if fine.is_boundary(j) {
                        stream.set(i, j, 0.0);
                    }
                }
            }
        }
        let stream = stream.factor()?;
        Ok(FlowSolver {
            mesh,
            cfg,
            mass,
            base,
            lumped,
            coarse_lumped,
            div,
            angles,
            angle_sum,
            pressure,
            stream,
        })
    }

    pub fn mesh(&self) -> &MeshPair {
        &self.mesh
    }

    pub fn config(&self) -> FlowConfig {
        self.cfg
    }

    /// Step 1.1: intermediate velocity `ũ` with Dirichlet data at `t_new`.
    pub fn momentum_step(
        &self,
        state: &MacroState,
        t_new: f64,
        bc: &dyn BoundaryData,
        force: Option<BodyForce<'_>>,
    ) -> Result<Vec<Vec2>> {
        let fine = &self.mesh.fine;
        let n = fine.n_nodes();
        check_len(n, state.u.len())?;
        check_len(n, state.tau.len())?;
        check_len(self.mesh.coarse.n_nodes(), state.p.len())?;
        let re = self.cfg.re;
        let mut a = self.base.clone();
        let mut rhs = vec![Vec2::zeros(); n];
        for e in &fine.elements {
            let w: [Vec2; 3] = std::array::from_fn(|i| {
                (0..3)
                    .map(|c| state.u[e.nodes[c]] * (e.area / 12.0 * if i == c { 2.0 } else { 1.0 }))
                    .sum()
            });
            for i in 0..3 {
                for j in 0..3 {
                    a.add(e.nodes[i], e.nodes[j], re * w[i].dot(&e.grads[j]));
                }
            }
            let mut div_tau = Vec2::zeros();
            for c in 0..3 {
                let t = state.tau.nodal[e.nodes[c]];
                let g = e.grads[c];
                div_tau += Vec2::new(t.xx * g.x + t.xy * g.y, t.xy * g.x + t.yy * g.y);
            }
            for &v in &e.nodes {
                rhs[v] += div_tau * (e.area / 3.0);
            }
        }
        let (ux, uy) = split(&state.u);
        let (mut mx, mut my) = (vec![0.0; n], vec![0.0; n]);
        self.mass.matvec(&ux, &mut mx);
        self.mass.matvec(&uy, &mut my);
        for i in 0..n {
            rhs[i] += Vec2::new(mx[i], my[i]) * (re / self.cfg.dt);
            for &(k, dx, dy) in &self.div[i] {
                rhs[i] += Vec2::new(dx, dy) * state.p[k];
            }
        }
        if let Some(f) = force {
            let fv: Vec<Vec2> = fine.nodes.iter().map(|&x| f(x)).collect();
            let (fx, fy) = split(&fv);
            self.mass.matvec(&fx, &mut mx);
            self.mass.matvec(&fy, &mut my);
            for i in 0..n {
                rhs[i] += Vec2::new(mx[i], my[i]);
            }
        }
        let g: Vec<Option<Vec2>> = (0..n)
            .map(|i| fine.is_boundary(i).then(|| bc.velocity(i, fine.nodes[i], t_new)))
            .collect();
        for i in 0..n {
            if let Some(gi) = g[i] {
                a.set_identity_row(i);
                rhs[i] = gi;
                continue;
            }
            for j in a.row_range(i) {
                if let Some(gj) = g[j] {
                    rhs[i] -= gj * a.get(i, j);
                    a.set(i, j, 0.0);
                }
            }
        }
        let lu = a.factor()?;
        let (bx, by) = split(&rhs);
        let sx = lu.solve(&bx)?;
        let sy = lu.solve(&by)?;
        Ok(sx.into_iter().zip(sy).map(|(x, y)| Vec2::new(x, y)).collect())
    }

    /// Step 1.2: returns `(u^{n+1}, p^{n+1})`; the pressure has zero mean
    /// with respect to the lumped coarse mass.
    pub fn pressure_correction(&self, u_tilde: &[Vec2], p: &[f64]) -> Result<(Vec<Vec2>, Vec<f64>)> {
        let fine = &self.mesh.fine;
        check_len(fine.n_nodes(), u_tilde.len())?;
        check_len(self.mesh.coarse.n_nodes(), p.len())?;
        let scale = self.cfg.re / self.cfg.dt;
        let mut rhs: Vec<f64> = self.divergence(u_tilde).into_iter().map(|d| -scale * d).collect();
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        for r in rhs.iter_mut() {
            *r -= mean;
        }
        rhs[0] = 0.0;
        let dp = self.pressure.solve(&rhs)?;
        let mut u = u_tilde.to_vec();
        for (a, ua) in u.iter_mut().enumerate() {
            if fine.is_boundary(a) {
                continue;
            }
            let mut g = Vec2::zeros();
            for &(k, dx, dy) in &self.div[a] {
                g += Vec2::new(dx, dy) * dp[k];
            }
            *ua += g / (scale * self.lumped[a]);
        }
        let mut p_new: Vec<f64> = p.iter().zip(&dp).map(|(a, b)| a + b).collect();
        self.gauge(&mut p_new);
        Ok((u, p_new))
    }

    fn gauge(&self, p: &mut [f64]) {
        let total: f64 = self.coarse_lumped.iter().sum();
        let mean = p.iter().zip(&self.coarse_lumped).map(|(a, m)| a * m).sum::<f64>() / total;
        for v in p.iter_mut() {
            *v -= mean;
        }
    }

    /// Pressure mean with respect to the lumped coarse mass.
    pub fn pressure_mean(&self, p: &[f64]) -> f64 {
        let total: f64 = self.coarse_lumped.iter().sum();
        p.iter().zip(&self.coarse_lumped).map(|(a, m)| a * m).sum::<f64>() / total
    }

    /// Discrete divergence functional `(∇·u, ψ_k)` for every coarse node.
    pub fn divergence(&self, u: &[Vec2]) -> Vec<f64> {
        let mut d = vec![0.0; self.mesh.coarse.n_nodes()];
        for (a, col) in self.div.iter().enumerate() {
            for &(k, dx, dy) in col {
                d[k] += dx * u[a].x + dy * u[a].y;
            }
        }
        d
    }

    /// Nodal velocity gradients `(∇u)_{ij} = ∂u_i/∂x_j`, averaged over the
    /// incident fine elements weighted by their interior angle at the node.
    /// The weights are symmetric about the node on both walls and in the
    /// interior, so fields that are invariant along a wall keep identical
    /// gradients on and off that wall.
    pub fn velocity_gradients(&self, u: &[Vec2]) -> Vec<Mat2> {
        let fine = &self.mesh.fine;
        let mut acc = vec![Mat2::zeros(); fine.n_nodes()];
        for (e, ang) in fine.elements.iter().zip(&self.angles) {
            let mut g = Mat2::zeros();
            for c in 0..3 {
                g += u[e.nodes[c]] * e.grads[c].transpose();
            }
            for c in 0..3 {
                acc[e.nodes[c]] += g * ang[c];
            }
        }
        for (a, w) in acc.iter_mut().zip(&self.angle_sum) {
            *a /= *w;
        }
        acc
    }

    /// Streamfunction with `(∇ψ, ∇φ) = (ω, φ)`, `ψ = 0` on the boundary.
    pub fn streamfunction(&self, u: &[Vec2]) -> Result<Vec<f64>> {
        let fine = &self.mesh.fine;
        let mut rhs = vec![0.0; fine.n_nodes()];
        for e in &fine.elements {
            let mut w = 0.0;
            for c in 0..3 {
                let v = u[e.nodes[c]];
                w += v.y * e.grads[c].x - v.x * e.grads[c].y;
            }
            for &v in &e.nodes {
                rhs[v] += w * e.area / 3.0;
            }
        }
        for (i, r) in rhs.iter_mut().enumerate() {
            if fine.is_boundary(i) {
                *r = 0.0;
            }
        }
        self.stream.solve(&rhs)
    }

    /// `½ Re uᵀ M u`.
    pub fn kinetic_energy(&self, u: &[Vec2]) -> f64 {
        let (ux, uy) = split(u);
        let mut m = vec![0.0; ux.len()];
        let mut e = 0.0;
        for comp in [&ux, &uy] {
            self.mass.matvec(comp, &mut m);
            e += comp.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>();
        }
        0.5 * self.cfg.re * e
    }

    /// L² norm of the P1 field with nodal values `v` (consistent mass).
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        let mut m = vec![0.0; v.len()];
        self.mass.matvec(v, &mut m);
        v.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>().sqrt()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

fn split(v: &[Vec2]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|p| p.x).collect(), v.iter().map(|p| p.y).collect())
}

fn divergence_columns(mesh: &MeshPair) -> Vec<Vec<(usize, f64, f64)>> {
    let fine = &mesh.fine;
    let mut cols: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); fine.n_nodes()];
    for (f, e) in fine.elements.iter().enumerate() {
        let parent = mesh.parent[f];
        let pe = &mesh.coarse.elements[parent];
        // ∫_T ψ_k for the three coarse basis functions of the parent
        let mut integral = [0.0; 3];
        for &v in &e.nodes {
            let l = mesh.coarse_barycentric(parent, fine.nodes[v]);
            for k in 0..3 {
                integral[k] += l[k] * e.area / 3.0;
            }
        }
        for c in 0..3 {
            let a = e.nodes[c];
            for k in 0..3 {
                let node = pe.nodes[k];
                let (dx, dy) = (e.grads[c].x * integral[k], e.grads[c].y * integral[k]);
                match cols[a].iter_mut().find(|t| t.0 == node) {
                    Some(t) => {
                        t.1 += dx;
                        t.2 += dy;
                    }
                    None => cols[a].push((node, dx, dy)),
                }
            }
        }
    }
    for c in cols.iter_mut() {
        c.sort_by_key(|t| t.0);
    }
    cols
}

fn pressure_matrix(mesh: &MeshPair, div: &[Vec<(usize, f64, f64)>], lumped: &[f64]) -> Banded {
    let fine = &mesh.fine;
    let np = mesh.coarse.n_nodes();
    let bw = div
        .iter()
        .map(|c| c.last().map_or(0, |l| l.0) - c.first().map_or(0, |f| f.0))
        .max()
        .unwrap_or(0);
    let mut p = Banded::zeros(np, bw);
    for (a, col) in div.iter().enumerate() {
        if fine.is_boundary(a) {
            continue;
        }
        for &(k, dxk, dyk) in col {
            for &(l, dxl, dyl) in col {
                p.add(k, l, (dxk * dxl + dyk * dyl) / lumped[a]);
            }
        }
    }
    // pin the first node to remove the constant null space
    p.set_identity_row(0);
    for k in 1..=bw.min(np - 1) {
        p.set(k, 0, 0.0);
    }
    p
}
