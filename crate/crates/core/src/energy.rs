//! Kernel-regularized free energy of a particle ensemble.
//!
//! For an ensemble `{q_i}` of `N` equally weighted particles,
//!
//! ```text
//! F(q) = (1/N) Σ_i [ ln( (1/N) Σ_j K_h(q_i - q_j) ) + Ψ(q_i) ]
//! ```
//!
//! and its gradient with respect to `q_i` is
//!
//! ```text
//! ∇_i F = (1/N) [ Σ_j ∇_1K(q_i,q_j) / S_i + Σ_k ∇_2K(q_k,q_i) / S_k + ∇Ψ(q_i) ],
//! S_i = Σ_j K_h(q_i - q_j).
//! ```
//!
//! The self term `j = i` is included in every `S_i`.
//!
//! Pair interactions whose Gaussian factor falls below `exp(-PAIR_CUTOFF)` are
//! skipped: relative to the self term (factor 1) they are below the resolution
//! of an f64 row sum.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::potentials::{Kernel, Potential, Vec2};

const PAIR_CUTOFF: f64 = 40.0;

/// Ordered list of equally weighted configuration vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble(Vec<Vec2>);

impl Ensemble {
    pub fn new(particles: Vec<Vec2>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::SizeMismatch {
                expected: 1,
                got: 0,
            });
        }
        if let Some(q) = particles.iter().find(|q| !q.x.is_finite() || !q.y.is_finite()) {
            return Err(Error::FeasibilityViolation {
                r2: q.norm_squared(),
                b: f64::INFINITY,
            });
        }
        Ok(Ensemble(particles))
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec2::new(p[0], p[1])).collect())
    }

    pub(crate) fn from_vec_unchecked(particles: Vec<Vec2>) -> Self {
        Ensemble(particles)
    }

    pub fn particles(&self) -> &[Vec2] {
        &self.0
    }

    pub fn particles_mut(&mut self) -> &mut [Vec2] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Vec2> {
        self.0
    }

    /// `(1/N) Σ |q_i|²`.
    pub fn mean_square_extension(&self) -> f64 {
        self.0.iter().map(|q| q.norm_squared()).sum::<f64>() / self.0.len() as f64
    }

    /// Second moment `(1/N) Σ q_i ⊗ q_i` (not mean-centred).
    pub fn second_moment(&self) -> crate::potentials::Mat2 {
        let mut m = crate::potentials::Mat2::zeros();
        for q in &self.0 {
            m += q * q.transpose();
        }
        m / self.0.len() as f64
    }
}

impl Deref for Ensemble {
    type Target = [Vec2];
    fn deref(&self) -> &[Vec2] {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub value: f64,
    pub gradient: Vec<Vec2>,
    pub bandwidth_used: f64,
}

/// Scratch buffers reused across evaluations of the same ensemble size.
#[derive(Default, Debug)]
pub struct Workspace {
    order: Vec<u32>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row `a` interacts with sorted indices `a+1 .. row_end[a]`; the factors
    /// are stored contiguously starting at `row_start[a]`.
    row_start: Vec<usize>,
    row_end: Vec<usize>,
    factors: Vec<f64>,
    rowsum: Vec<f64>,
    inv_rowsum: Vec<f64>,
    tx: Vec<f64>,
    ty: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// `exp(x)` for `x` in `[-PAIR_CUTOFF - 1, 0]`, written without calls or
/// branches so the pair loops vectorize. Cody–Waite reduction to
/// `|r| <= ln2/2` and a degree-13 Taylor polynomial; agrees with the libm
/// result to a few ulp.
#[inline(always)]
fn exp_pruned(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const INV_LN2: f64 = std::f64::consts::LOG2_E;
    // 1.5 * 2^52 rounds to nearest integer in the low mantissa bits
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let t = x * INV_LN2 + SHIFTER;
    let kf = t - SHIFTER;
    let r = (x - kf * LN2_HI) - kf * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // the low mantissa bits of `t` hold k in two's complement
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    p * scale
}

/// Sum with four interleaved partial sums (fixed order, vectorizable).
fn lane_sum(v: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let chunks = v.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        for k in 0..4 {
            lanes[k] += c[k];
        }
    }
    let mut s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for &x in rest {
        s += x;
    }
    s
}

/// Evaluates `F` and, when `grad` is given, writes `∇F` into it.
///
/// Summation follows a fixed order determined only by the particle positions,
/// so results are bitwise reproducible.
pub fn evaluate(
    particles: &[Vec2],
    pot: &Potential,
    kernel: &Kernel,
    ws: &mut Workspace,
    grad: Option<&mut [Vec2]>,
) -> Result<f64> {
    let n = particles.len();
    let h = kernel.bandwidth();
    let inv_h2 = 1.0 / (h * h);
    let c = 0.5 * inv_h2;
    let cutoff_r2 = PAIR_CUTOFF / c;

    // Particles sorted by first coordinate; partners further apart than the
    // cutoff in x alone are never visited.
    ws.order.clear();
    ws.order.extend(0..n as u32);
    ws.order.sort_unstable_by(|&a, &b| {
        particles[a as usize].x.total_cmp(&particles[b as usize].x).then(a.cmp(&b))
    });
    ws.xs.clear();
    ws.ys.clear();
    for &k in &ws.order {
        ws.xs.push(particles[k as usize].x);
        ws.ys.push(particles[k as usize].y);
    }
    let (xs, ys) = (&ws.xs, &ws.ys);
    ws.row_start.clear();
    ws.row_end.clear();
    let mut end = 0;
    let mut total = 0;
    for a in 0..n {
        end = end.max(a + 1);
        while end < n && (xs[end] - xs[a]) * (xs[end] - xs[a]) <= cutoff_r2 {
            end += 1;
        }
        ws.row_start.push(total);
        ws.row_end.push(end);
        total += end - a - 1;
    }
    ws.factors.clear();
    ws.factors.resize(total, 0.0);
    ws.rowsum.clear();
    ws.rowsum.resize(n, 1.0);
    for a in 0..n {
        let (xa, ya) = (xs[a], ys[a]);
        let lo = a + 1;
        let hi = ws.row_end[a];
        let seg = &mut ws.factors[ws.row_start[a]..ws.row_start[a] + (hi - lo)];
        for ((f, &xb), &yb) in seg.iter_mut().zip(&xs[lo..hi]).zip(&ys[lo..hi]) {
            let dx = xb - xa;
            let dy = yb - ya;
            let r2 = dx * dx + dy * dy;
            let e = exp_pruned(-c * r2.min(cutoff_r2));
            *f = if r2 <= cutoff_r2 { e } else { 0.0 };
        }
        for (s, &f) in ws.rowsum[lo..hi].iter_mut().zip(seg.iter()) {
            *s += f;
        }
        let acc = lane_sum(seg);
        ws.rowsum[a] += acc;
    }

    let log_norm = (kernel.peak() / n as f64).ln();
    let mut value = 0.0;
    let inv_n = 1.0 / n as f64;
    match grad {
        Some(g) => {
            if g.len() != n {
                return Err(Error::SizeMismatch {
                    expected: n,
                    got: g.len(),
                });
            }
            ws.inv_rowsum.clear();
            ws.inv_rowsum.extend(ws.rowsum.iter().map(|s| inv_h2 / s));
            ws.tx.resize(n, 0.0);
            ws.ty.resize(n, 0.0);
            // accumulated in sorted order, scattered at the end
            let mut gx = vec![0.0; n];
            let mut gy = vec![0.0; n];
            for a in 0..n {
                let (xa, ya, ia) = (xs[a], ys[a], ws.inv_rowsum[a]);
                let lo = a + 1;
                let hi = ws.row_end[a];
                let seg = &ws.factors[ws.row_start[a]..ws.row_start[a] + (hi - lo)];
                let m = hi - lo;
                let (tx, ty) = (&mut ws.tx[..m], &mut ws.ty[..m]);
                for ((((((&f, &xb), &yb), &ib), tx), ty), (gxb, gyb)) in seg
                    .iter()
                    .zip(&xs[lo..hi])
                    .zip(&ys[lo..hi])
                    .zip(&ws.inv_rowsum[lo..hi])
                    .zip(tx.iter_mut())
                    .zip(ty.iter_mut())
                    .zip(gx[lo..hi].iter_mut().zip(gy[lo..hi].iter_mut()))
                {
                    let w = f * (ia + ib);
                    *tx = (xb - xa) * w;
                    *ty = (yb - ya) * w;
                    *gxb -= *tx;
                    *gyb -= *ty;
                }
                let sx = lane_sum(tx);
                let sy = lane_sum(ty);
                gx[a] += sx;
                gy[a] += sy;
            }
            for (a, &k) in ws.order.iter().enumerate() {
                let k = k as usize;
                let (psi, dpsi) = pot.value_grad(&particles[k])?;
                value += log_norm + ws.rowsum[a].ln() + psi;
                g[k] = (dpsi + Vec2::new(gx[a], gy[a])) * inv_n;
            }
        }
        None => {
            for (a, &k) in ws.order.iter().enumerate() {
                value += log_norm + ws.rowsum[a].ln() + pot.value(&particles[k as usize])?;
            }
        }
    }
    Ok(value * inv_n)
}

/// Discrete free energy `F`.
pub fn discrete_free_energy(ens: &Ensemble, pot: &Potential, kernel: &Kernel) -> Result<f64> {
    evaluate(ens, pot, kernel, &mut Workspace::new(), None)
}

/// Gradient `∇F`, one entry per particle (includes the `1/N` weight).
pub fn free_energy_gradient(
    ens: &Ensemble,
    pot: &Potential,
    kernel: &Kernel,
) -> Result<Vec<Vec2>> {
    let mut g = vec![Vec2::zeros(); ens.len()];
    evaluate(ens, pot, kernel, &mut Workspace::new(), Some(&mut g))?;
    Ok(g)
}

pub fn energy_report(ens: &Ensemble, pot: &Potential, kernel: &Kernel) -> Result<EnergyReport> {
    let mut gradient = vec![Vec2::zeros(); ens.len()];
    let value = evaluate(ens, pot, kernel, &mut Workspace::new(), Some(&mut gradient))?;
    Ok(EnergyReport {
        value,
        gradient,
        bandwidth_used: kernel.bandwidth(),
    })
}

/// The entropic part `(1/N) Σ ln((1/N) Σ_j K(q_i - q_j))` alone.
pub fn regularized_entropy(particles: &[Vec2], kernel: &Kernel) -> f64 {
    let free = Potential::hookean();
    let mut ws = Workspace::new();
    let total = evaluate(particles, &free, kernel, &mut ws, None).expect("Hookean is total");
    let mean_psi = particles.iter().map(|q| 0.5 * q.norm_squared()).sum::<f64>()
        / particles.len() as f64;
    total - mean_psi
}

/// Proximal objective `(1/N) Σ |q_i - q_i^n|² / (2 dt) + F(q)`.
pub fn step_objective(
    trial: &Ensemble,
    prev: &Ensemble,
    pot: &Potential,
    kernel: &Kernel,
    dt: f64,
) -> Result<f64> {
    if trial.len() != prev.len() {
        return Err(Error::SizeMismatch {
            expected: prev.len(),
            got: trial.len(),
        });
    }
    let f = discrete_free_energy(trial, pot, kernel)?;
    Ok(proximal_term(trial, prev, dt) + f)
}

pub(crate) fn proximal_term(trial: &[Vec2], prev: &[Vec2], dt: f64) -> f64 {
    let s: f64 = trial.iter().zip(prev).map(|(a, b)| (a - b).norm_squared()).sum();
    s / (2.0 * dt * trial.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pruned_exp_matches_libm() {
        let mut worst = 0.0f64;
        for k in 0..=200_000 {
            let x = -(PAIR_CUTOFF + 1.0) * k as f64 / 200_000.0;
            let (a, b) = (exp_pruned(x), x.exp());
            worst = worst.max(((a - b) / b).abs());
        }
        assert!(worst < 4.0 * f64::EPSILON, "worst relative error {worst:e}");
    }
    use approx::assert_relative_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    fn ens(points: &[[f64; 2]]) -> Ensemble {
        Ensemble::from_points(points).unwrap()
    }

    #[test]
    fn single_particle_energy() {
        let k = Kernel::new(1.0);
        let hk = Potential::hookean();
        let e0 = discrete_free_energy(&ens(&[[0.0, 0.0]]), &hk, &k).unwrap();
        assert_relative_eq!(e0, (1.0 / (2.0 * PI)).ln(), max_relative = 1e-15);
        assert_relative_eq!(e0, -1.837877, epsilon = 1e-6);
        let e2 = discrete_free_energy(&ens(&[[2.0, 0.0]]), &hk, &k).unwrap();
        assert_relative_eq!(e2, 0.162123, epsilon = 1e-6);
    }

    #[test]
    fn two_particle_energy_matches_hand_sum() {
        let k = Kernel::new(1.0);
        let hk = Potential::hookean();
        let e = discrete_free_energy(&ens(&[[0.0, 0.0], [1.0, 0.0]]), &hk, &k).unwrap();
        // both log arguments equal (1/2)(1/2π)(1 + e^{-1/2}); Ψ contributes (0 + 1/2)/2
        let arg = 0.5 / (2.0 * PI) * (1.0 + (-0.5f64).exp());
        assert_relative_eq!(e, arg.ln() + 0.25, max_relative = 1e-14);
    }

    #[test]
    fn single_particle_gradient_is_potential_gradient() {
        let k = Kernel::new(0.7);
        for pot in [Potential::hookean(), Potential::fene(50f64.sqrt())] {
            let q = Vec2::new(0.4, -1.1);
            let g = free_energy_gradient(&ens(&[[q.x, q.y]]), &pot, &k).unwrap();
            assert_eq!(g[0], pot.grad(&q).unwrap());
        }
    }

    #[test]
    fn symmetric_pair_gradients_are_opposite() {
        let k = Kernel::new(1.0);
        let g = free_energy_gradient(&ens(&[[0.8, -0.3], [-0.8, 0.3]]), &Potential::hookean(), &k)
            .unwrap();
        assert_eq!(g[0], -g[1]);
    }

    fn random_ensemble(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<Vec2> {
        (0..n)
            .map(|_| Vec2::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
            .collect()
    }

    /// Central differences of `evaluate` in every coordinate.
    fn fd_gradient(p: &[Vec2], pot: &Potential, k: &Kernel, step: f64) -> Vec<Vec2> {
        let mut ws = Workspace::new();
        let mut out = vec![Vec2::zeros(); p.len()];
        let mut q = p.to_vec();
        for i in 0..p.len() {
            for c in 0..2 {
                let x0 = q[i][c];
                q[i][c] = x0 + step;
                let fp = evaluate(&q, pot, k, &mut ws, None).unwrap();
                let xp = q[i][c];
                q[i][c] = x0 - step;
                let fm = evaluate(&q, pot, k, &mut ws, None).unwrap();
                let xm = q[i][c];
                q[i][c] = x0;
                out[i][c] = (fp - fm) / (xp - xm);
            }
        }
        out
    }

    #[test]
    fn random_ensemble_gradient_matches_fd() {
        let mut rng = crate::rng::stream(11, 0, 0);
        let k = Kernel::new(0.8);
        let p = random_ensemble(&mut rng, 5, 1.5);
        let g = free_energy_gradient(&Ensemble::new(p.clone()).unwrap(), &Potential::hookean(), &k)
            .unwrap();
        let fd = fd_gradient(&p, &Potential::hookean(), &k, 1e-6);
        let scale = g.iter().map(|v| v.amax()).fold(0.0, f64::max);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).amax() / scale < 1e-5, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn lower_bound_and_permutation() {
        let mut rng = crate::rng::stream(12, 0, 0);
        let k = Kernel::new(0.5);
        let pot = Potential::fene(50f64.sqrt());
        for n in [1usize, 2, 7, 30] {
            let p = random_ensemble(&mut rng, n, 1.5);
            let e = Ensemble::new(p.clone()).unwrap();
            let f = discrete_free_energy(&e, &pot, &k).unwrap();
            let bound = (1.0 / (n as f64 * 2.0 * PI * 0.25)).ln();
            assert!(f >= bound);

            let mut perm: Vec<usize> = (0..n).collect();
            perm.reverse();
            perm.rotate_left(n / 3);
            let pp: Vec<Vec2> = perm.iter().map(|&i| p[i]).collect();
            let ep = Ensemble::new(pp).unwrap();
            assert_relative_eq!(discrete_free_energy(&ep, &pot, &k).unwrap(), f, max_relative = 1e-13);
            let g = free_energy_gradient(&e, &pot, &k).unwrap();
            let gp = free_energy_gradient(&ep, &pot, &k).unwrap();
            for (slot, &i) in perm.iter().enumerate() {
                assert!((gp[slot] - g[i]).amax() <= 1e-13 * (1.0 + g[i].amax()));
            }
        }
    }

    #[test]
    fn entropy_translation_invariant() {
        let mut rng = crate::rng::stream(13, 0, 0);
        let k = Kernel::new(0.6);
        let p = random_ensemble(&mut rng, 12, 2.0);
        let shifted: Vec<Vec2> = p.iter().map(|q| q + Vec2::new(3.5, -1.25)).collect();
        assert_relative_eq!(
            regularized_entropy(&p, &k),
            regularized_entropy(&shifted, &k),
            max_relative = 1e-12
        );
    }

    #[test]
    fn objective_examples() {
        let k = Kernel::new(1.0);
        let hk = Potential::hookean();
        let prev = ens(&[[1.0, 0.0]]);
        let trial = ens(&[[0.0, 0.0]]);
        let j = step_objective(&trial, &prev, &hk, &k, 0.5).unwrap();
        assert_relative_eq!(j, 1.0 + (1.0 / (2.0 * PI)).ln(), max_relative = 1e-14);
        assert_relative_eq!(j, -0.837877, epsilon = 1e-6);

        let e = ens(&[[0.2, 0.1], [-0.5, 0.9]]);
        assert_eq!(
            step_objective(&e, &e, &hk, &k, 0.1).unwrap(),
            discrete_free_energy(&e, &hk, &k).unwrap()
        );
        assert!(matches!(
            step_objective(&e, &prev, &hk, &k, 0.1),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn fene_infeasible_particle_is_reported() {
        let k = Kernel::new(1.0);
        let pot = Potential::fene(1.0);
        let e = ens(&[[0.0, 0.0], [1.0, 0.5]]);
        assert!(matches!(
            discrete_free_energy(&e, &pot, &k),
            Err(Error::FeasibilityViolation { .. })
        ));
    }
}
