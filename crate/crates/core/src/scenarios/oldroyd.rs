//! Closed Oldroyd-B model for start-up plane Couette flow, used as the
//! reference for Hookean dumbbells.
//!
//! Unknowns live on a staggered grid: velocities at the `M + 1` nodes,
//! polymer stresses at the `M` cell centres. With `τ₂₂ = 0` from rest, the
//! constitutive laws are linear in `u` and the shear stress can be eliminated
//! from each Crank-Nicolson step, leaving a tridiagonal solve for `u`. The
//! first two steps are replaced by four backward Euler half steps to damp
//! the start-up discontinuity at the moving plane.

use crate::coupling::Physics;
use crate::error::{Error, Result};
use crate::fem::banded::{Banded, BandedLu};
use crate::scenarios::output::ProbeSeries;

#[derive(Clone, Debug, PartialEq)]
pub struct OldroydConfig {
    pub physics: Physics,
    /// Velocity of the lower plane.
    pub lid: f64,
    pub m_fine: usize,
    pub dt_fine: f64,
    pub t_end: f64,
    /// Recording interval; rounded to a whole number of steps.
    pub record_dt: f64,
    pub probes: Vec<f64>,
}

impl OldroydConfig {
    pub fn new(physics: Physics, probes: &[f64]) -> Self {
        OldroydConfig {
            physics,
            lid: 1.0,
            m_fine: 400,
            dt_fine: 1e-4,
            t_end: 1.0,
            record_dt: 0.01,
            probes: probes.to_vec(),
        }
    }
}

struct Stepper {
    theta: f64,
    dt: f64,
    kappa: f64,
    lu: BandedLu,
}

struct Grid<'a> {
    cfg: &'a OldroydConfig,
    dy: f64,
}

impl Grid<'_> {
    fn stepper(&self, theta: f64, dt: f64) -> Result<Stepper> {
        let Physics { re, wi, eta_s, eps_p } = self.cfg.physics;
        let m = self.cfg.m_fine;
        let kappa = theta * dt * eps_p / wi / (1.0 + theta * dt / wi);
        let d = theta * (eta_s + kappa) / (self.dy * self.dy);
        let mut a = Banded::zeros(m + 1, 1);
        for i in 1..m {
            a.set(i, i - 1, -d);
            a.set(i, i, re / dt + 2.0 * d);
            a.set(i, i + 1, -d);
        }
        a.set_identity_row(0);
        a.set_identity_row(m);
        Ok(Stepper {
            theta,
            dt,
            kappa,
            lu: a.factor()?,
        })
    }

    fn slopes(&self, u: &[f64]) -> Vec<f64> {
        u.windows(2).map(|w| (w[1] - w[0]) / self.dy).collect()
    }

    /// Advances `(u, τ₁₂, N₁)` by one θ-step.
    fn advance(&self, s: &Stepper, u: &mut Vec<f64>, t12: &mut Vec<f64>, n1: &mut [f64]) -> Result<()> {
        let Physics { re, wi, eta_s, eps_p } = self.cfg.physics;
        let (th, dt, dy) = (s.theta, s.dt, self.dy);
        let m = self.cfg.m_fine;
        let denom = 1.0 + th * dt / wi;
        let keep = (1.0 - (1.0 - th) * dt / wi) / denom;
        let g_old = self.slopes(u);
        // stress at the new level is t_star + kappa * g_new
        let t_star: Vec<f64> = t12
            .iter()
            .zip(&g_old)
            .map(|(&t, &g)| keep * t + (1.0 - th) * dt * eps_p / wi * g / denom)
            .collect();
        let mut rhs = vec![0.0; m + 1];
        for i in 1..m {
            let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dy * dy);
            rhs[i] = re / dt * u[i]
                + th * (t_star[i] - t_star[i - 1]) / dy
                + (1.0 - th) * (eta_s * lap + (t12[i] - t12[i - 1]) / dy);
        }
        rhs[0] = self.cfg.lid;
        rhs[m] = 0.0;
        let u_new = s.lu.solve(&rhs)?;
        let g_new = self.slopes(&u_new);
        let t_new: Vec<f64> = t_star.iter().zip(&g_new).map(|(&ts, &g)| ts + s.kappa * g).collect();
        for c in 0..m {
            let src = th * 2.0 * t_new[c] * g_new[c] + (1.0 - th) * 2.0 * t12[c] * g_old[c];
            n1[c] = keep * n1[c] + dt * src / denom;
        }
        *u = u_new;
        *t12 = t_new;
        Ok(())
    }

    fn sample_nodes(&self, v: &[f64], y: f64) -> f64 {
        let m = self.cfg.m_fine;
        let s = (y / self.dy).clamp(0.0, m as f64);
        let i = (s.floor() as usize).min(m - 1);
        let w = s - i as f64;
        (1.0 - w) * v[i] + w * v[i + 1]
    }

    fn sample_cells(&self, v: &[f64], y: f64) -> f64 {
        let m = self.cfg.m_fine;
        let s = (y / self.dy - 0.5).clamp(0.0, (m - 1) as f64);
        let i = (s.floor() as usize).min(m - 2);
        let w = s - i as f64;
        (1.0 - w) * v[i] + w * v[i + 1]
    }
}

/// Integrates the Oldroyd-B Couette problem and records `u`, `τ₁₂` and
/// `N₁ = τ₁₁ - τ₂₂` at the probe locations every `record_dt`.
pub fn oldroyd_b_reference(cfg: &OldroydConfig) -> Result<ProbeSeries> {
    let Physics { re, wi, eta_s, eps_p } = cfg.physics;
    if !(re > 0.0 && wi > 0.0 && eta_s >= 0.0 && eps_p >= 0.0 && eta_s + eps_p > 0.0) {
        return Err(Error::Config("Oldroyd-B reference needs positive parameters".into()));
    }
    if cfg.m_fine < 2 || !(cfg.dt_fine > 0.0 && cfg.t_end > 0.0 && cfg.record_dt > 0.0) {
        return Err(Error::Config("Oldroyd-B reference needs a nontrivial grid".into()));
    }
    let m = cfg.m_fine;
    let grid = Grid { cfg, dy: 1.0 / m as f64 };
    let per_record = ((cfg.record_dt / cfg.dt_fine).round() as usize).max(1);
    let n_steps = (cfg.t_end / cfg.dt_fine - 1e-9).ceil() as usize;

    let mut u = vec![0.0; m + 1];
    u[0] = cfg.lid;
    let mut t12 = vec![0.0; m];
    let mut n1 = vec![0.0; m];
    let mut out = ProbeSeries::new(&cfg.probes, true);
    let record = |out: &mut ProbeSeries, t: f64, u: &[f64], t12: &[f64], n1: &[f64]| {
        let (us, (ss, ns)) = cfg
            .probes
            .iter()
            .map(|&y| (grid.sample_nodes(u, y), (grid.sample_cells(t12, y), grid.sample_cells(n1, y))))
            .unzip();
        out.push(t, us, Some((ss, ns)));
    };
    record(&mut out, 0.0, &u, &t12, &n1);

    let start = grid.stepper(1.0, 0.5 * cfg.dt_fine)?;
    let cn = grid.stepper(0.5, cfg.dt_fine)?;
    for step in 1..=n_steps {
        if step <= 2 {
            grid.advance(&start, &mut u, &mut t12, &mut n1)?;
            grid.advance(&start, &mut u, &mut t12, &mut n1)?;
        } else {
            grid.advance(&cn, &mut u, &mut t12, &mut n1)?;
        }
        if step % per_record == 0 || step == n_steps {
            let t = step as f64 * cfg.dt_fine;
            if out.t.last().is_none_or(|&last| t > last + 1e-12) {
                record(&mut out, t, &u, &t12, &n1);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> Physics {
        Physics {
            re: 0.11,
            wi: 0.1,
            eta_s: 0.11,
            eps_p: 0.89,
        }
    }

    /// Start-up Couette solution of the heat equation with kinematic
    /// viscosity `nu`.
    fn fourier(y: f64, t: f64, nu: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let mut s = 1.0 - y;
        for n in 1..2000 {
            let k = n as f64 * pi;
            let decay = (-k * k * nu * t).exp();
            if decay < 1e-18 {
                break;
            }
            s -= 2.0 / k * (k * y).sin() * decay;
        }
        s
    }

    #[test]
    fn newtonian_limit_matches_series() {
        let physics = Physics { eps_p: 0.0, ..paper() };
        let probes = [0.2, 0.4, 0.6, 0.8];
        let r = oldroyd_b_reference(&OldroydConfig::new(physics, &probes)).unwrap();
        let mut worst: f64 = 0.0;
        for (k, &t) in r.t.iter().enumerate().filter(|(_, &t)| t >= 0.01) {
            for (j, &y) in probes.iter().enumerate() {
                worst = worst.max((r.u[k][j] - fourier(y, t, 1.0)).abs());
            }
        }
        assert!(worst < 1e-4, "max deviation {worst}");
    }

    #[test]
    fn steady_state_is_linear_with_constant_shear_stress() {
        let mut cfg = OldroydConfig::new(paper(), &[0.1, 0.5, 0.9]);
        cfg.m_fine = 100;
        cfg.dt_fine = 1e-3;
        cfg.t_end = 5.0;
        cfg.record_dt = 1.0;
        let r = oldroyd_b_reference(&cfg).unwrap();
        let last = r.t.len() - 1;
        for (j, &y) in cfg.probes.iter().enumerate() {
            assert!((r.u[last][j] - (1.0 - y)).abs() < 1e-8);
            assert!((r.tau12.as_ref().unwrap()[last][j] + 0.89).abs() < 1e-8);
            // N1 = 2 Wi τ12 γ̇ at steady state
            assert!((r.n1.as_ref().unwrap()[last][j] - 2.0 * 0.1 * 0.89).abs() < 1e-8);
        }
    }

    #[test]
    fn halving_the_step_changes_little() {
        let probes = [0.2, 0.4, 0.6, 0.8];
        let a = oldroyd_b_reference(&OldroydConfig::new(paper(), &probes)).unwrap();
        let mut fine = OldroydConfig::new(paper(), &probes);
        fine.dt_fine = 5e-5;
        let b = oldroyd_b_reference(&fine).unwrap();
        assert_eq!(a.t.len(), b.t.len());
        let mut worst: f64 = 0.0;
        for k in 0..a.t.len() {
            assert!((a.t[k] - b.t[k]).abs() < 1e-12);
            if a.t[k] >= 0.05 {
                for j in 0..probes.len() {
                    worst = worst.max((a.u[k][j] - b.u[k][j]).abs());
                }
            }
        }
        assert!(worst < 1e-5, "{worst}");
    }
}
