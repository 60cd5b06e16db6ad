//! Gaussian kernel density estimates of configuration ensembles on a square
//! lattice, and a mode detector.

use crate::energy::Ensemble;
use crate::potentials::Vec2;

/// Square lattice of `n × n` points with spacing `step`, lower-left point
/// `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub origin: Vec2,
    pub step: f64,
    pub n: usize,
}

impl Lattice {
    /// Lattice covering `[-radius, radius]²` with `n` points per axis.
    pub fn covering(radius: f64, n: usize) -> Self {
        assert!(n >= 2 && radius > 0.0);
        Lattice {
            origin: Vec2::new(-radius, -radius),
            step: 2.0 * radius / (n - 1) as f64,
            n,
        }
    }

    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64, j as f64) * self.step
    }

    pub fn cell_area(&self) -> f64 {
        self.step * self.step
    }
}

/// `N^(-1/6)` times the root mean per-axis variance, floored at two lattice
/// spacings.
pub fn default_bandwidth(ens: &Ensemble, lattice: &Lattice) -> f64 {
    let n = ens.len() as f64;
    let mean = ens.iter().fold(Vec2::zeros(), |a, q| a + q) / n;
    let var = ens.iter().map(|q| (q - mean).norm_squared()).sum::<f64>() / (2.0 * n);
    (n.powf(-1.0 / 6.0) * var.sqrt()).max(2.0 * lattice.step)
}

/// Density values in row-major order (`j * n + i`), normalized so that the
/// lattice sum times the cell area is one.
pub fn kde_density(ens: &Ensemble, lattice: &Lattice, h: f64) -> Vec<f64> {
    let n = lattice.n;
    let inv = 1.0 / (2.0 * h * h);
    // separable Gaussian factors per axis
    let factors = |axis: usize| -> Vec<Vec<f64>> {
        ens.iter()
            .map(|q| {
                (0..n)
                    .map(|k| {
                        let c = lattice.origin[axis] + k as f64 * lattice.step;
                        (-(c - q[axis]).powi(2) * inv).exp()
                    })
                    .collect()
            })
            .collect()
    };
    let (fx, fy) = (factors(0), factors(1));
    let mut d = vec![0.0; n * n];
    for (gx, gy) in fx.iter().zip(&fy) {
        for j in 0..n {
            if gy[j] == 0.0 {
                continue;
            }
            let row = &mut d[j * n..(j + 1) * n];
            for (r, g) in row.iter_mut().zip(gx) {
                *r += gy[j] * g;
            }
        }
    }
    let total: f64 = d.iter().sum::<f64>() * lattice.cell_area();
    if total > 0.0 {
        for v in &mut d {
            *v /= total;
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub at: Vec2,
    pub density: f64,
}

/// Lattice points that are not exceeded by any of their eight neighbours
/// (ties resolved towards the first in row-major order) and whose density
/// is at least `fraction` of the global maximum. Sorted by decreasing
/// density.
pub fn local_maxima(density: &[f64], lattice: &Lattice, fraction: f64) -> Vec<Mode> {
    let n = lattice.n;
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let mut modes = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let v = density[k];
            if v <= 0.0 || v < fraction * peak {
                continue;
            }
            let mut is_max = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                        continue;
                    }
                    let kk = jj as usize * n + ii as usize;
                    if density[kk] > v || (density[kk] == v && kk < k) {
                        is_max = false;
                    }
                }
            }
            if is_max {
                modes.push(Mode {
                    at: lattice.point(i, j),
                    density: v,
                });
            }
        }
    }
    modes.sort_by(|a, b| b.density.total_cmp(&a.density));
    modes
}

/// The two strongest modes above 20% of the maximum that are more than
/// `min_separation` apart, if any.
pub fn bimodal_modes(density: &[f64], lattice: &Lattice, min_separation: f64) -> Option<(Mode, Mode)> {
    let modes = local_maxima(density, lattice, 0.2);
    for (a, ma) in modes.iter().enumerate() {
        for mb in &modes[a + 1..] {
            if (ma.at - mb.at).norm() > min_separation {
                return Some((*ma, *mb));
            }
        }
    }
    None
}
