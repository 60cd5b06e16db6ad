//! One micro time step at one material point.
//!
//! The relaxation part of the particle dynamics is advanced by implicit Euler,
//! written as the minimization of the proximal objective
//!
//! ```text
//! J(q) = (1/N) Σ_i (Wi/Δt) |q_i - q_i^n|² + F(q)
//! ```
//!
//! whose stationarity condition is `q_i = q_i^n - (Δt/(2 Wi)) ∇_i (N F)(q)`.
//! The minimizer is found with Barzilai–Borwein steps and a monotone Armijo
//! backtracking, so every accepted iterate lowers `J` below its value at
//! `q^n` and the discrete energy inequality follows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{self, proximal_term, Ensemble, Workspace};
use crate::error::{Error, Result};
use crate::potentials::{BandwidthPolicy, Kernel, Mat2, Potential, Vec2, FEASIBILITY_MARGIN};

/// Relative shell `|q|² > b (1 - δ)` that the flow deformation may not enter.
/// It scales with `√Δt` so a particle parked on the shell carries a stress
/// bounded independently of how hard the flow pushed it.
pub fn projection_margin(dt: f64) -> f64 {
    dt.sqrt().clamp(FEASIBILITY_MARGIN, 0.5)
}

/// Slack allowed in the discrete energy inequality.
pub const STABILITY_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Tolerance on the implicit-Euler residual `max_i |Δt_eff N ∇_i J|`,
    /// measured in configuration-space units.
    pub grad_tol: f64,
    /// First trial step as a multiple of the proximal step `N Δt_eff`.
    pub step_init: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 500,
            grad_tol: 1e-8,
            step_init: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroStepConfig {
    pub dt: f64,
    pub wi: f64,
    pub optimizer: OptimizerConfig,
    pub feasibility_margin: f64,
}

impl MicroStepConfig {
    pub fn new(dt: f64, wi: f64) -> Self {
        MicroStepConfig {
            dt,
            wi,
            optimizer: OptimizerConfig::default(),
            feasibility_margin: FEASIBILITY_MARGIN,
        }
    }

    /// Proximal step `Δt / (2 Wi)`.
    pub fn dt_eff(&self) -> f64 {
        self.dt / (2.0 * self.wi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.wi > 0.0) {
            return Err(Error::Config(format!(
                "micro step needs dt > 0 and Wi > 0 (dt = {}, Wi = {})",
                self.dt, self.wi
            )));
        }
        if !(self.optimizer.grad_tol > 0.0) || self.optimizer.max_iters == 0 {
            return Err(Error::Config("optimizer needs grad_tol > 0 and max_iters >= 1".into()));
        }
        if !(self.feasibility_margin > 0.0 && self.feasibility_margin < 1.0) {
            return Err(Error::Config("feasibility margin must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub ensemble_out: Ensemble,
    pub energy_before: f64,
    pub energy_after: f64,
    pub optimizer_iters: usize,
    pub converged: bool,
    /// Final implicit-Euler residual, configuration-space units.
    pub residual: f64,
    pub bandwidth: f64,
    /// `F(out) - F(in) + Σ|Δq|² / (2 N Δt_eff)`; must not exceed the slack.
    pub stability_residual: f64,
    pub stability_ok: bool,
}

fn feasible_all(pot: &Potential, q: &[Vec2], margin: f64) -> bool {
    !pot.is_fene() || q.iter().all(|p| pot.is_feasible(p, margin))
}

/// Implicit gradient step of the regularized free energy at one node.
pub fn implicit_gradient_step(
    ens: &Ensemble,
    pot: &Potential,
    policy: BandwidthPolicy,
    cfg: &MicroStepConfig,
) -> Result<StepResult> {
    implicit_gradient_step_ws(ens, pot, policy, cfg, &mut Workspace::new())
}

pub fn implicit_gradient_step_ws(
    ens: &Ensemble,
    pot: &Potential,
    policy: BandwidthPolicy,
    cfg: &MicroStepConfig,
    ws: &mut Workspace,
) -> Result<StepResult> {
    cfg.validate()?;
    let q0: &[Vec2] = ens;
    let n = q0.len();
    if let Some(p) = q0.iter().find(|p| pot.is_fene() && !pot.is_feasible(p, cfg.feasibility_margin)) {
        return Err(Error::FeasibilityViolation {
            r2: p.norm_squared(),
            b: pot.b(),
        });
    }
    let h = policy.select(q0)?;
    let kernel = Kernel::new(h);
    let dt_eff = cfg.dt_eff();
    let prox = 1.0 / (n as f64 * dt_eff);
    let to_residual = n as f64 * dt_eff;

    let mut x = q0.to_vec();
    let mut g = vec![Vec2::zeros(); n];
    let f0 = energy::evaluate(&x, pot, &kernel, ws, Some(&mut g))?;
    let j0 = f0;
    let mut j = j0;
    let mut f = f0;

    let residual_of = |g: &[Vec2]| g.iter().map(|v| v.amax()).fold(0.0, f64::max) * to_residual;
    let mut residual = residual_of(&g);

    let alpha0 = cfg.optimizer.step_init * n as f64 * dt_eff;
    let mut alpha = alpha0;
    let mut trial = vec![Vec2::zeros(); n];
    let mut g_trial = vec![Vec2::zeros(); n];
    let mut iters = 0;
    let mut stalled = false;

    while residual > cfg.optimizer.grad_tol && iters < cfg.optimizer.max_iters {
        iters += 1;
        let gg: f64 = g.iter().map(|v| v.norm_squared()).sum();
        let mut accepted = None;
        let mut step = alpha;
        for _ in 0..60 {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&g) {
                *t = xi - gi * step;
            }
            if feasible_all(pot, &trial, cfg.feasibility_margin) {
                let ft = energy::evaluate(&trial, pot, &kernel, ws, Some(&mut g_trial))?;
                let jt = ft + proximal_term(&trial, q0, dt_eff);
                // tolerance of a few ulps of J for steps at rounding level
                let slack = 4.0 * f64::EPSILON * (j.abs() + ft.abs() + 1.0);
                if jt <= j - 1e-4 * step * gg + slack {
                    accepted = Some((ft, jt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((ft, jt)) = accepted else {
            stalled = true;
            break;
        };
        // add the proximal gradient to the free-energy gradient at the trial point
        for ((gt, t), q) in g_trial.iter_mut().zip(&trial).zip(q0) {
            *gt += (t - q) * prox;
        }
        let mut sty = 0.0;
        let mut sts = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            let y = g_trial[i] - g[i];
            sts += s.norm_squared();
            sty += s.dot(&y);
        }
        alpha = if sty > 0.0 {
            (sts / sty).clamp(1e-6 * alpha0, 1e3 * alpha0)
        } else {
            alpha0
        };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        j = jt;
        f = ft;
        residual = residual_of(&g);
    }

    let converged = residual <= cfg.optimizer.grad_tol;
    if !converged && !stalled && j >= j0 {
        return Err(Error::OptimizerDivergence { iters, residual });
    }
    let moved: f64 = x.iter().zip(q0).map(|(a, b)| (a - b).norm_squared()).sum();
    let stability_residual = f - f0 + moved / (2.0 * n as f64 * dt_eff);
    Ok(StepResult {
        ensemble_out: Ensemble::from_vec_unchecked(x),
        energy_before: f0,
        energy_after: f,
        optimizer_iters: iters,
        converged,
        residual,
        bandwidth: h,
        stability_residual,
        stability_ok: stability_residual <= STABILITY_SLACK,
    })
}

/// `q ← (I + Δt ∇u) q`. Under FENE, images outside `|q|² <= b(1 - δ)` with
/// `δ = projection_margin(Δt)` are pulled back radially onto that sphere.
pub fn deformation_update(ens: &Ensemble, grad_u: &Mat2, dt: f64, pot: &Potential) -> Ensemble {
    let mut out = ens.clone();
    deform_in_place(out.particles_mut(), grad_u, dt, pot);
    out
}

pub fn deform_in_place(particles: &mut [Vec2], grad_u: &Mat2, dt: f64, pot: &Potential) {
    let map = Mat2::identity() + grad_u * dt;
    let limit = pot.b() * (1.0 - projection_margin(dt));
    for q in particles.iter_mut() {
        *q = map * *q;
        if pot.is_fene() {
            let r2 = q.norm_squared();
            if r2 > limit {
                *q *= (limit / r2).sqrt();
            }
        }
    }
}

/// Euler–Maruyama step of the dumbbell SDE
/// `dq = [(∇u) q - ∇Ψ(q) / (2 Wi)] dt + sqrt(1/Wi) dW`.
pub fn sde_oracle_step<R: Rng + ?Sized>(
    ens: &Ensemble,
    grad_u: &Mat2,
    pot: &Potential,
    wi: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Ensemble> {
    let mut out = ens.clone();
    sde_step_in_place(out.particles_mut(), grad_u, pot, wi, dt, (1.0 / wi).sqrt(), rng)?;
    Ok(out)
}

/// Same update with an explicit diffusion coefficient `sigma`. FENE proposals
/// with `|q|² > b(1 - √Δt)` are redrawn, up to 1000 times per particle; the
/// shell keeps the explicit drift of the next step inside the ball.
pub fn sde_step_in_place<R: Rng + ?Sized>(
    particles: &mut [Vec2],
    grad_u: &Mat2,
    pot: &Potential,
    wi: f64,
    dt: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<()> {
    const MAX_RESAMPLES: usize = 1000;
    let noise = sigma * dt.sqrt();
    let margin = dt.sqrt().max(FEASIBILITY_MARGIN);
    for q in particles.iter_mut() {
        let drift = grad_u * *q - pot.grad(q)? / (2.0 * wi);
        let base = *q + drift * dt;
        let mut tries = 0;
        loop {
            let prop = base + crate::rng::standard_normal2(rng) * noise;
            if !pot.is_fene() || pot.is_feasible(&prop, margin) {
                *q = prop;
                break;
            }
            tries += 1;
            if tries >= MAX_RESAMPLES {
                return Err(Error::RejectionOverflow(MAX_RESAMPLES));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ens(points: &[[f64; 2]]) -> Ensemble {
        Ensemble::from_points(points).unwrap()
    }

    #[test]
    fn single_hookean_particle_closed_form() {
        let cfg = MicroStepConfig::new(0.1, 1.0);
        let r = implicit_gradient_step(
            &ens(&[[1.0, 0.0]]),
            &Potential::hookean(),
            BandwidthPolicy::Fixed(1.0),
            &cfg,
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.ensemble_out[0] - Vec2::new(1.0 / 1.05, 0.0)).amax() < 1e-8);
        assert!(r.stability_ok);
        assert!(r.energy_after < r.energy_before);
    }

    #[test]
    fn stationary_point_is_fixed() {
        // a lone particle at the origin is stationary
        let cfg = MicroStepConfig::new(0.01, 1.0);
        let r = implicit_gradient_step(
            &ens(&[[0.0, 0.0]]),
            &Potential::fene(7.0),
            BandwidthPolicy::Fixed(0.3),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.optimizer_iters, 0);
        assert_eq!(r.ensemble_out[0], Vec2::zeros());
    }

    #[test]
    fn symmetric_pair_matches_grid_search_oracle() {
        // q1 = -q2 = (a, 0) stays symmetric; J reduces to a function of a alone.
        let (dt, wi, h) = (0.01, 1.0, 1.0);
        let cfg = MicroStepConfig::new(dt, wi);
        let r = implicit_gradient_step(
            &ens(&[[2.0, 0.0], [-2.0, 0.0]]),
            &Potential::hookean(),
            BandwidthPolicy::Fixed(h),
            &cfg,
        )
        .unwrap();
        let dt_eff = dt / (2.0 * wi);
        let j_of = |a: f64| {
            let k0 = 1.0 / (2.0 * std::f64::consts::PI * h * h);
            let s = 0.5 * k0 * (1.0 + (-(2.0 * a) * (2.0 * a) / (2.0 * h * h)).exp());
            (a - 2.0).powi(2) / (2.0 * dt_eff) + s.ln() + 0.5 * a * a
        };
        let (mut lo, mut hi) = (1.5, 2.5);
        for _ in 0..12 {
            let step = (hi - lo) / 100.0;
            let best = (0..=100)
                .map(|k| lo + step * k as f64)
                .min_by(|a, b| j_of(*a).total_cmp(&j_of(*b)))
                .unwrap();
            lo = best - step;
            hi = best + step;
        }
        let a_star = 0.5 * (lo + hi);
        assert!((r.ensemble_out[0] - Vec2::new(a_star, 0.0)).norm() < 1e-4);
        assert!((r.ensemble_out[1] - Vec2::new(-a_star, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn infeasible_input_is_rejected() {
        let cfg = MicroStepConfig::new(0.01, 1.0);
        let r = implicit_gradient_step(
            &ens(&[[2.0, 0.0]]),
            &Potential::fene(4.0),
            BandwidthPolicy::Fixed(0.1),
            &cfg,
        );
        assert!(matches!(r, Err(Error::FeasibilityViolation { .. })));
    }

    #[test]
    fn deformation_examples() {
        let hk = Potential::hookean();
        let e = ens(&[[0.3, -0.2], [1.0, 4.0]]);
        assert_eq!(deformation_update(&e, &Mat2::zeros(), 0.1, &hk), e);
        let shear = Mat2::new(0.0, 1.0, 0.0, 0.0);
        let out = deformation_update(&ens(&[[0.0, 1.0]]), &shear, 0.1, &hk);
        assert_relative_eq!(out[0].x, 0.1, max_relative = 1e-15);
        assert_eq!(out[0].y, 1.0);
        let ext = Mat2::new(4.0, 0.0, 0.0, -4.0);
        let out = deformation_update(&ens(&[[1.0, 1.0]]), &ext, 1e-3, &hk);
        assert_relative_eq!(out[0].x, 1.004, max_relative = 1e-15);
        assert_relative_eq!(out[0].y, 0.996, max_relative = 1e-15);
    }

    #[test]
    fn deformation_projects_onto_fene_ball() {
        let pot = Potential::fene(4.0);
        let out = deformation_update(&ens(&[[1.99, 0.0]]), &Mat2::new(10.0, 0.0, 0.0, 0.0), 0.1, &pot);
        let r2 = out[0].norm_squared();
        assert_relative_eq!(r2, 4.0 * (1.0 - projection_margin(0.1)), max_relative = 1e-14);
        assert!(out[0].y == 0.0 && out[0].x > 0.0);
    }

    #[test]
    fn zero_noise_sde_is_explicit_euler() {
        let pot = Potential::hookean();
        let gu = Mat2::new(0.0, 2.0, 0.0, 0.0);
        let mut p = vec![Vec2::new(1.0, 0.5)];
        let mut rng = crate::rng::stream(0, 0, 0);
        sde_step_in_place(&mut p, &gu, &pot, 0.5, 0.01, 0.0, &mut rng).unwrap();
        let q = Vec2::new(1.0, 0.5);
        let expect = q + (gu * q - q / (2.0 * 0.5)) * 0.01;
        assert!((p[0] - expect).amax() < 1e-15);
    }

    #[test]
    fn sde_ou_stationary_variance() {
        // Wi = 1, Hookean, no flow: stationary covariance is the identity.
        let pot = Potential::hookean();
        let mut rng = crate::rng::stream(5, 0, 0);
        let mut p = vec![Vec2::zeros(); 100_000];
        for _ in 0..800 {
            sde_step_in_place(&mut p, &Mat2::zeros(), &pot, 1.0, 0.01, 1.0, &mut rng).unwrap();
        }
        let n = p.len() as f64;
        let vx = p.iter().map(|q| q.x * q.x).sum::<f64>() / n;
        let vy = p.iter().map(|q| q.y * q.y).sum::<f64>() / n;
        assert!((vx - 1.0).abs() < 0.05 && (vy - 1.0).abs() < 0.05, "{vx} {vy}");
    }

    #[test]
    fn sde_mean_square_extension_decay_rate() {
        // d<|q|²>/dt = -<|q|²>/Wi + 2/Wi from <|q|²>(0) = 4
        let wi = 1.0;
        let pot = Potential::hookean();
        let mut rng = crate::rng::stream(6, 0, 0);
        let s = 2f64.sqrt();
        let mut p: Vec<Vec2> = (0..100_000)
            .map(|_| crate::rng::standard_normal2(&mut rng) * s)
            .collect();
        let dt = 1e-3;
        let mut ts = Vec::new();
        let mut ys = Vec::new();
        for k in 1..=1500 {
            sde_step_in_place(&mut p, &Mat2::zeros(), &pot, wi, dt, (1.0 / wi).sqrt(), &mut rng)
                .unwrap();
            if k % 100 == 0 {
                let m = p.iter().map(|q| q.norm_squared()).sum::<f64>() / p.len() as f64;
                ts.push(k as f64 * dt);
                ys.push((m - 2.0).ln());
            }
        }
        let rate = -crate::scenarios::analysis::linear_fit(&ts, &ys).0;
        assert!((rate - 1.0 / wi).abs() < 0.05 / wi, "fitted rate {rate}");
    }
}
