//! Kramers stress of particle ensembles and the nodal stress field.

use crate::energy::Ensemble;
use crate::error::{Error, Result};
use crate::potentials::{Mat2, Potential};

/// Symmetric 2×2 tensor stored by its three independent components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymTensor { xx, xy, yy }
    }

    pub fn to_matrix(self) -> Mat2 {
        Mat2::new(self.xx, self.xy, self.xy, self.yy)
    }

    /// First normal stress difference `τ11 - τ22`.
    pub fn normal_difference(self) -> f64 {
        self.xx - self.yy
    }

    pub fn is_finite(self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }
}

/// `τ = (ε_p / Wi) (1/N) Σ ∇Ψ(q_i) ⊗ q_i`.
///
/// The off-diagonal entry is the average of the two mixed products, which
/// coincide for radially symmetric potentials.
pub fn node_stress(ens: &Ensemble, pot: &Potential, eps_p: f64, wi: f64) -> Result<SymTensor> {
    let mut acc = SymTensor::default();
    for q in ens.iter() {
        let g = pot.grad(q)?;
        acc.xx += g.x * q.x;
        acc.xy += 0.5 * (g.x * q.y + g.y * q.x);
        acc.yy += g.y * q.y;
    }
    let c = eps_p / (wi * ens.len() as f64);
    Ok(SymTensor::new(acc.xx * c, acc.xy * c, acc.yy * c))
}

/// P1 stress field on the fine mesh: one tensor per node, linear inside
/// every element.
#[derive(Clone, Debug, PartialEq)]
pub struct StressField {
    pub nodal: Vec<SymTensor>,
}

impl StressField {
    pub fn zeros(n: usize) -> Self {
        StressField {
            nodal: vec![SymTensor::default(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.nodal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodal.is_empty()
    }

    /// Value at barycentric coordinates `lambda` inside the triangle `tri`.
    pub fn sample(&self, tri: [usize; 3], lambda: [f64; 3]) -> SymTensor {
        let mut out = SymTensor::default();
        for (&v, &l) in tri.iter().zip(&lambda) {
            let t = self.nodal[v];
            out.xx += l * t.xx;
            out.xy += l * t.xy;
            out.yy += l * t.yy;
        }
        out
    }
}

/// Nodal interpolation into the P1 stress space, which stores the nodal
/// values as they are.
pub fn project_stress(nodal: Vec<SymTensor>, n_fine_nodes: usize) -> Result<StressField> {
    if nodal.len() != n_fine_nodes {
        return Err(Error::SizeMismatch {
            expected: n_fine_nodes,
            got: nodal.len(),
        });
    }
    Ok(StressField { nodal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Vec2;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ens(points: &[[f64; 2]]) -> Ensemble {
        Ensemble::from_points(points).unwrap()
    }

    #[test]
    fn examples() {
        let t = node_stress(&ens(&[[1.0, 0.0]]), &Potential::hookean(), 1.0, 1.0).unwrap();
        assert_eq!(t, SymTensor::new(1.0, 0.0, 0.0));
        let t = node_stress(&ens(&[[1.0, 0.0], [0.0, 1.0]]), &Potential::hookean(), 1.0, 1.0).unwrap();
        assert_eq!(t, SymTensor::new(0.5, 0.0, 0.5));
        let b = 50f64.sqrt();
        let t = node_stress(&ens(&[[1.0, 0.0]]), &Potential::fene(b), 1.0, 1.0).unwrap();
        assert_relative_eq!(t.xx, 1.0 / (1.0 - 1.0 / b), max_relative = 1e-14);
        assert_relative_eq!(t.xx, 1.1647, max_relative = 1e-4);
        assert_eq!((t.xy, t.yy), (0.0, 0.0));
    }

    #[test]
    fn fene_infeasible_is_error() {
        assert!(node_stress(&ens(&[[3.0, 0.0]]), &Potential::fene(4.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn projection_is_nodal_identity() {
        let vals = vec![SymTensor::new(1.0, 2.0, 3.0); 3];
        let f = project_stress(vals.clone(), 3).unwrap();
        assert_eq!(f.nodal, vals);
        let s = f.sample([0, 1, 2], [0.2, 0.3, 0.5]);
        assert_relative_eq!(s.xy, 2.0, max_relative = 1e-15);
        assert!(project_stress(vals, 4).is_err());
        // linear field sampled at the centroid is the mean vertex value
        let f = project_stress(
            vec![SymTensor::new(0.0, 0.0, 0.0), SymTensor::new(1.0, 0.0, 0.0), SymTensor::new(0.5, 0.0, 0.0)],
            3,
        )
        .unwrap();
        let third = 1.0 / 3.0;
        assert_relative_eq!(f.sample([0, 1, 2], [third; 3]).xx, 0.5, max_relative = 1e-15);
    }

    fn points(max_r: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0..max_r, 0.0..std::f64::consts::TAU), 1..30)
            .prop_map(|v| v.into_iter().map(|(r, a)| (r * a.cos(), r * a.sin())).collect())
    }

    proptest! {
        #[test]
        fn fene_offdiagonal_two_ways(pts in points(2.6)) {
            let pot = Potential::fene(50f64.sqrt());
            let e = Ensemble::new(pts.iter().map(|p| Vec2::new(p.0, p.1)).collect()).unwrap();
            let (mut a, mut b) = (0.0, 0.0);
            for q in e.iter() {
                let g = pot.grad(q).unwrap();
                a += g.x * q.y;
                b += g.y * q.x;
            }
            prop_assert!((a - b).abs() / e.len() as f64 <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn hookean_stress_is_psd(pts in points(5.0)) {
            let e = Ensemble::new(pts.iter().map(|p| Vec2::new(p.0, p.1)).collect()).unwrap();
            let t = node_stress(&e, &Potential::hookean(), 0.7, 0.3).unwrap().to_matrix();
            let eig = t.symmetric_eigenvalues();
            prop_assert!(eig.min() >= -1e-12);
        }

        #[test]
        fn merged_ensemble_is_mean(a in points(2.0), b in points(2.0)) {
            let n = a.len().min(b.len());
            let ea: Vec<Vec2> = a[..n].iter().map(|p| Vec2::new(p.0, p.1)).collect();
            let eb: Vec<Vec2> = b[..n].iter().map(|p| Vec2::new(p.0, p.1)).collect();
            let merged: Vec<Vec2> = ea.iter().chain(&eb).copied().collect();
            let pot = Potential::fene(50f64.sqrt());
            let ta = node_stress(&Ensemble::new(ea).unwrap(), &pot, 1.0, 1.0).unwrap();
            let tb = node_stress(&Ensemble::new(eb).unwrap(), &pot, 1.0, 1.0).unwrap();
            let tm = node_stress(&Ensemble::new(merged).unwrap(), &pot, 1.0, 1.0).unwrap();
            let mean = (ta.to_matrix() + tb.to_matrix()) * 0.5;
            prop_assert!((tm.to_matrix() - mean).amax() <= 1e-12 * (1.0 + mean.amax()));
        }
    }
}
