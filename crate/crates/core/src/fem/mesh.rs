//! Structured triangulations of a rectangle and the isoP2/P1 mesh pair.
//!
//! A grid of `nx × ny` rectangular cells is split along the lower-left to
//! upper-right diagonal of every cell. Refining each triangle at its edge
//! midpoints gives the same pattern on the `2nx × 2ny` grid, so the fine mesh
//! is again structured and coarse node `(i, j)` is fine node `(2i, 2j)`.

use std::io::Write;

use crate::error::Result;
use crate::potentials::Vec2;

/// Boundary segment bits of a node.
pub mod tag {
    pub const BOTTOM: u8 = 1;
    pub const RIGHT: u8 = 2;
    pub const TOP: u8 = 4;
    pub const LEFT: u8 = 8;

    pub fn names(mask: u8) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (bit, name) in [(BOTTOM, "bottom"), (RIGHT, "right"), (TOP, "top"), (LEFT, "left")] {
            if mask & bit != 0 {
                v.push(name);
            }
        }
        v
    }
}

/// Shape data of one P1 triangle.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub nodes: [usize; 3],
    pub area: f64,
    /// Constant gradients of the three barycentric basis functions.
    pub grads: [Vec2; 3],
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub nodes: Vec<Vec2>,
    pub elements: Vec<Element>,
    pub boundary: Vec<u8>,
}

impl Triangulation {
    pub fn structured(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity(nodes.capacity());
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { lx } else { i as f64 * hx };
                let y = if j == ny { ly } else { j as f64 * hy };
                nodes.push(Vec2::new(x, y));
                let mut m = 0;
                if j == 0 {
                    m |= tag::BOTTOM;
                }
                if j == ny {
                    m |= tag::TOP;
                }
                if i == 0 {
                    m |= tag::LEFT;
                }
                if i == nx {
                    m |= tag::RIGHT;
                }
                boundary.push(m);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let ll = j * (nx + 1) + i;
                let (lr, ul) = (ll + 1, ll + nx + 1);
                let ur = ul + 1;
                for tri in [[ll, lr, ur], [ll, ur, ul]] {
                    elements.push(element(&nodes, tri));
                }
            }
        }
        Triangulation {
            nx,
            ny,
            lx,
            ly,
            nodes,
            elements,
            boundary,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node] != 0
    }

    /// Locates `p` (clamped into the rectangle) and returns the containing
    /// element index and barycentric coordinates.
    pub fn locate(&self, p: Vec2) -> (usize, [f64; 3]) {
        let (hx, hy) = (self.lx / self.nx as f64, self.ly / self.ny as f64);
        let x = p.x.clamp(0.0, self.lx);
        let y = p.y.clamp(0.0, self.ly);
        let i = ((x / hx).floor() as usize).min(self.nx - 1);
        let j = ((y / hy).floor() as usize).min(self.ny - 1);
        let s = ((x - i as f64 * hx) / hx).clamp(0.0, 1.0);
        let t = ((y - j as f64 * hy) / hy).clamp(0.0, 1.0);
        let cell = 2 * (j * self.nx + i);
        if t <= s {
            (cell, [1.0 - s, s - t, t])
        } else {
            (cell + 1, [1.0 - t, s, t - s])
        }
    }

    /// Lumped (row-sum) mass of every node.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes()];
        for e in &self.elements {
            for &v in &e.nodes {
                m[v] += e.area / 3.0;
            }
        }
        m
    }
}

fn element(nodes: &[Vec2], tri: [usize; 3]) -> Element {
    let [a, b, c] = tri.map(|k| nodes[k]);
    let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let inv = 1.0 / det;
    let grads = [
        Vec2::new(b.y - c.y, c.x - b.x) * inv,
        Vec2::new(c.y - a.y, a.x - c.x) * inv,
        Vec2::new(a.y - b.y, b.x - a.x) * inv,
    ];
    Element {
        nodes: tri,
        area: 0.5 * det,
        grads,
    }
}

/// Coarse (pressure) and fine (velocity, stress, particles) triangulations.
#[derive(Clone, Debug)]
pub struct MeshPair {
    pub coarse: Triangulation,
    pub fine: Triangulation,
    /// Coarse element containing each fine element.
    pub parent: Vec<usize>,
    /// Fine node coinciding with each coarse node.
    pub coarse_to_fine: Vec<usize>,
}

impl MeshPair {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        let coarse = Triangulation::structured(nx, ny, lx, ly);
        let fine = Triangulation::structured(2 * nx, 2 * ny, lx, ly);
        let mut parent = Vec::with_capacity(fine.elements.len());
        for jf in 0..2 * ny {
            for if_ in 0..2 * nx {
                let base = 2 * ((jf / 2) * nx + if_ / 2);
                let (a, b) = (if_ % 2, jf % 2);
                for kind in 0..2 {
                    let lower = match (a, b) {
                        (1, 0) => true,
                        (0, 1) => false,
                        _ => kind == 0,
                    };
                    parent.push(if lower { base } else { base + 1 });
                }
            }
        }
        let coarse_to_fine = (0..=ny)
            .flat_map(|j| (0..=nx).map(move |i| (i, j)))
            .map(|(i, j)| fine.node_index(2 * i, 2 * j))
            .collect();
        MeshPair {
            coarse,
            fine,
            parent,
            coarse_to_fine,
        }
    }

    /// Barycentric coordinates of a fine node with respect to a coarse element.
    pub fn coarse_barycentric(&self, coarse_elem: usize, p: Vec2) -> [f64; 3] {
        let e = &self.coarse.elements[coarse_elem];
        let a = self.coarse.nodes[e.nodes[0]];
        let mut l = [0.0; 3];
        for k in 0..3 {
            let base = if k == 0 { 1.0 } else { 0.0 };
            l[k] = base + e.grads[k].dot(&(p - a));
        }
        l
    }

    /// Plain-text listing of both meshes: nodes, elements and boundary tags.
    pub fn export<W: Write>(&self, mut w: W) -> Result<()> {
        for (name, t) in [("coarse", &self.coarse), ("fine", &self.fine)] {
            writeln!(w, "# {name} mesh")?;
            writeln!(w, "nodes {}", t.n_nodes())?;
            for (k, p) in t.nodes.iter().enumerate() {
                writeln!(w, "{k} {:?} {:?}", p.x, p.y)?;
            }
            writeln!(w, "elements {}", t.elements.len())?;
            for (k, e) in t.elements.iter().enumerate() {
                writeln!(w, "{k} {} {} {}", e.nodes[0], e.nodes[1], e.nodes[2])?;
            }
            let tagged: Vec<usize> = (0..t.n_nodes()).filter(|&k| t.is_boundary(k)).collect();
            writeln!(w, "boundary {}", tagged.len())?;
            for k in tagged {
                writeln!(w, "{k} {}", tag::names(t.boundary[k]).join(","))?;
            }
        }
        writeln!(w, "# parent")?;
        for (k, p) in self.parent.iter().enumerate() {
            writeln!(w, "{k} {p}")?;
        }
        Ok(())
    }
}
