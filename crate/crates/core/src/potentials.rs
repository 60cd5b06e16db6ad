//! Spring potentials, the Gaussian mollifier and bandwidth selection.
//!
//! Configuration space is two-dimensional throughout. In nondimensional units
//! the Hookean spring is `Ψ(q) = |q|²/2` and the FENE spring is
//! `Ψ(q) = -(b/2) ln(1 - |q|²/b)`, defined on the open ball `|q|² < b`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Default guard band for FENE feasibility: `|q|² <= b (1 - FEASIBILITY_MARGIN)`.
pub const FEASIBILITY_MARGIN: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Hookean,
    Fene,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    /// FENE extensibility; ignored for Hookean springs.
    pub b: f64,
}

impl Potential {
    pub const fn hookean() -> Self {
        Potential {
            kind: PotentialKind::Hookean,
            b: f64::INFINITY,
        }
    }

    pub fn fene(b: f64) -> Self {
        assert!(b > 0.0, "FENE extensibility must be positive");
        Potential {
            kind: PotentialKind::Fene,
            b,
        }
    }

    /// Extensibility bound on `|q|²` (infinite for Hookean).
    pub fn b(&self) -> f64 {
        match self.kind {
            PotentialKind::Hookean => f64::INFINITY,
            PotentialKind::Fene => self.b,
        }
    }

    pub fn is_fene(&self) -> bool {
        self.kind == PotentialKind::Fene
    }

    /// `|q|² <= b (1 - margin)` for FENE; finite for Hookean.
    #[inline]
    pub fn is_feasible(&self, q: &Vec2, margin: f64) -> bool {
        let r2 = q.norm_squared();
        match self.kind {
            PotentialKind::Hookean => r2.is_finite(),
            PotentialKind::Fene => r2 <= self.b * (1.0 - margin),
        }
    }

    #[inline]
    fn check(&self, r2: f64) -> Result<()> {
        if !r2.is_finite() || (self.is_fene() && r2 >= self.b) {
            return Err(Error::FeasibilityViolation { r2, b: self.b() });
        }
        Ok(())
    }

    pub fn value(&self, q: &Vec2) -> Result<f64> {
        let r2 = q.norm_squared();
        self.check(r2)?;
        Ok(match self.kind {
            PotentialKind::Hookean => 0.5 * r2,
            PotentialKind::Fene => -0.5 * self.b * (-r2 / self.b).ln_1p(),
        })
    }

    pub fn grad(&self, q: &Vec2) -> Result<Vec2> {
        let r2 = q.norm_squared();
        self.check(r2)?;
        Ok(match self.kind {
            PotentialKind::Hookean => *q,
            PotentialKind::Fene => q / (1.0 - r2 / self.b),
        })
    }

    /// Value and gradient together.
    #[inline]
    pub fn value_grad(&self, q: &Vec2) -> Result<(f64, Vec2)> {
        let r2 = q.norm_squared();
        self.check(r2)?;
        Ok(match self.kind {
            PotentialKind::Hookean => (0.5 * r2, *q),
            PotentialKind::Fene => {
                let s = 1.0 - r2 / self.b;
                (-0.5 * self.b * (-r2 / self.b).ln_1p(), q / s)
            }
        })
    }
}

/// Isotropic Gaussian mollifier in two dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    h: f64,
}

impl Kernel {
    pub const DIM: usize = 2;

    pub fn new(h: f64) -> Self {
        assert!(h > 0.0 && h.is_finite(), "kernel bandwidth must be positive, got {h}");
        Kernel { h }
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    /// Peak value `(2π h²)^-1`, attained at zero separation.
    #[inline]
    pub fn peak(&self) -> f64 {
        1.0 / (2.0 * PI * self.h * self.h)
    }

    #[inline]
    pub fn value(&self, q1: &Vec2, q2: &Vec2) -> f64 {
        let r2 = (q1 - q2).norm_squared();
        self.peak() * (-r2 / (2.0 * self.h * self.h)).exp()
    }

    /// Gradient with respect to the first argument.
    #[inline]
    pub fn grad(&self, q1: &Vec2, q2: &Vec2) -> Vec2 {
        let d = q1 - q2;
        -d / (self.h * self.h) * self.value(q1, q2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// `h = med² / ln N`, med the lower median of all pairwise distances.
    MedianRule,
    Fixed(f64),
}

impl BandwidthPolicy {
    pub fn select(&self, ensemble: &[Vec2]) -> Result<f64> {
        match *self {
            BandwidthPolicy::Fixed(h) => {
                if h > 0.0 && h.is_finite() {
                    Ok(h)
                } else {
                    Err(Error::Config(format!("fixed bandwidth must be positive, got {h}")))
                }
            }
            BandwidthPolicy::MedianRule => {
                let n = ensemble.len();
                if n < 2 {
                    return Err(Error::Config(
                        "median bandwidth rule needs at least two particles".into(),
                    ));
                }
                let med2 = lower_median_sq_distance(ensemble);
                if med2 <= 0.0 {
                    return Err(Error::DegenerateEnsemble);
                }
                Ok(med2 / (n as f64).ln())
            }
        }
    }
}

pub fn select_bandwidth(policy: BandwidthPolicy, ensemble: &[Vec2]) -> Result<f64> {
    policy.select(ensemble)
}

/// Squared lower median of the `N(N-1)/2` pairwise distances.
fn lower_median_sq_distance(ensemble: &[Vec2]) -> f64 {
    let n = ensemble.len();
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d2.push((ensemble[i] - ensemble[j]).norm_squared());
        }
    }
    let k = (d2.len() - 1) / 2;
    let (_, m, _) = d2.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *m
}
