//! One-dimensional shear reduction between two parallel planes.
//!
//! With `u = (u(y, t), 0)` and configurations independent of `x`, the flow
//! reduces to `Re ∂u/∂t = η_s ∂²u/∂y² + ∂τ₂₁/∂y` on `[0, 1]` with the lower
//! plane moving at `u(0) = 1` and the upper plane at rest. P1 elements in
//! space, backward Euler for the viscous term and an explicit stress source.

use crate::error::{Error, Result};
use crate::fem::banded::{Banded, BandedLu};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouetteConfig {
    pub re: f64,
    pub eta_s: f64,
    pub dt: f64,
    /// Number of elements `M`.
    pub elements: usize,
    /// Velocity of the lower plane.
    pub lid: f64,
}

pub struct CouetteSolver {
    cfg: CouetteConfig,
    h: f64,
    mass: Banded,
    lu: BandedLu,
}

impl CouetteSolver {
    pub fn new(cfg: CouetteConfig) -> Result<Self> {
        if cfg.elements < 2 || !(cfg.re > 0.0 && cfg.dt > 0.0 && cfg.eta_s >= 0.0) {
            return Err(Error::Config(format!("invalid shear solver parameters {cfg:?}")));
        }
        let m = cfg.elements;
        let h = 1.0 / m as f64;
        let mut mass = Banded::zeros(m + 1, 1);
        let mut a = Banded::zeros(m + 1, 1);
        for e in 0..m {
            for (i, j) in [(e, e), (e, e + 1), (e + 1, e), (e + 1, e + 1)] {
                let (mm, kk) = if i == j { (h / 3.0, 1.0 / h) } else { (h / 6.0, -1.0 / h) };
                mass.add(i, j, mm);
                a.add(i, j, cfg.re / cfg.dt * mm + cfg.eta_s * kk);
            }
        }
        a.set_identity_row(0);
        a.set_identity_row(m);
        a.set(1, 0, 0.0);
        a.set(m - 1, m, 0.0);
        let lu = a.factor()?;
        Ok(CouetteSolver { cfg, h, mass, lu })
    }

    pub fn config(&self) -> CouetteConfig {
        self.cfg
    }

    pub fn n_nodes(&self) -> usize {
        self.cfg.elements + 1
    }

    pub fn node_y(&self, k: usize) -> f64 {
        if k == self.cfg.elements {
            1.0
        } else {
            k as f64 * self.h
        }
    }

    /// Initial state: fluid at rest except the moving plane.
    pub fn initial_velocity(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.n_nodes()];
        u[0] = self.cfg.lid;
        u
    }

    /// Advances `u` by one step with the shear stress `tau21` of the old level.
    pub fn step(&self, u: &[f64], tau21: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_nodes();
        for len in [u.len(), tau21.len()] {
            if len != n {
                return Err(Error::SizeMismatch { expected: n, got: len });
            }
        }
        let mut rhs = vec![0.0; n];
        self.mass.matvec(u, &mut rhs);
        let c = self.cfg.re / self.cfg.dt;
        for r in rhs.iter_mut() {
            *r *= c;
        }
        for i in 1..n - 1 {
            rhs[i] += 0.5 * (tau21[i + 1] - tau21[i - 1]);
        }
        // boundary values moved to the right-hand side
        let a = self.lu.matrix();
        let (m, lid) = (n - 1, self.cfg.lid);
        rhs[1] -= (c * self.h / 6.0 - self.cfg.eta_s / self.h) * lid;
        debug_assert_eq!(a.get(1, 0), 0.0);
        rhs[0] = lid;
        rhs[m] = 0.0;
        self.lu.solve(&rhs)
    }

    /// Nodal `∂u/∂y`: mean of the adjacent element slopes, one-sided at the
    /// planes.
    pub fn shear_rate(&self, u: &[f64]) -> Vec<f64> {
        let m = self.cfg.elements;
        let slope: Vec<f64> = (0..m).map(|e| (u[e + 1] - u[e]) / self.h).collect();
        (0..=m)
            .map(|k| match k {
                0 => slope[0],
                k if k == m => slope[m - 1],
                k => 0.5 * (slope[k - 1] + slope[k]),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(m: usize, dt: f64) -> CouetteSolver {
        CouetteSolver::new(CouetteConfig {
            re: 0.11,
            eta_s: 0.11,
            dt,
            elements: m,
            lid: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn newtonian_steady_state() {
        let s = solver(40, 1e-2);
        let mut u = s.initial_velocity();
        let tau = vec![0.0; s.n_nodes()];
        for _ in 0..2000 {
            u = s.step(&u, &tau).unwrap();
        }
        for (k, v) in u.iter().enumerate() {
            assert!((v - (1.0 - s.node_y(k))).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_stress_is_no_source() {
        let s = solver(20, 1e-3);
        let u0 = s.initial_velocity();
        let a = s.step(&u0, &vec![0.0; 21]).unwrap();
        let b = s.step(&u0, &vec![-0.89; 21]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shear_rate_of_linear_profile() {
        let s = solver(10, 1e-3);
        let u: Vec<f64> = (0..=10).map(|k| 1.0 - s.node_y(k)).collect();
        for g in s.shear_rate(&u) {
            assert!((g + 1.0).abs() < 1e-12);
        }
    }
}
