//! Banded matrices and their LU factorization.
//!
//! Every system in the flow solver lives on a structured grid numbered row by
//! row, so its bandwidth is a small multiple of the grid width. Factorization
//! uses no pivoting: the matrices are either symmetric positive definite or
//! dominated by the mass term `(Re/Δt) M`. A residual check with a few rounds
//! of iterative refinement guards the result.

use crate::error::{Error, Result};

const REFINEMENT_ROUNDS: usize = 3;
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Banded {
    n: usize,
    bw: usize,
    /// Row-major storage, row `i` holds columns `i - bw ..= i + bw`.
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Banded {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw, "({i}, {j}) outside band {}", self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Columns of row `i` inside the band.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in self.row_range(i) {
                s += self.data[self.idx(i, j)] * x[j];
            }
            *yi = s;
        }
    }

    /// `self = a * self + b * other` for matrices of equal shape.
    pub fn axpby(&mut self, a: f64, b: f64, other: &Banded) {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x = a * *x + b * y;
        }
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        for j in self.row_range(i) {
            self.set(i, j, if i == j { 1.0 } else { 0.0 });
        }
    }

    pub fn factor(&self) -> Result<BandedLu> {
        let mut lu = self.data.clone();
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        for k in 0..n {
            let pivot = lu[at(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::LinearSolveFailure(format!("zero pivot in row {k}")));
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let l = lu[at(i, k)] / pivot;
                if l == 0.0 {
                    continue;
                }
                lu[at(i, k)] = l;
                let (ri, rk) = (at(i, k + 1), at(k, k + 1));
                for d in 0..end - k - 1 {
                    lu[ri + d] -= l * lu[rk + d];
                }
            }
        }
        Ok(BandedLu {
            matrix: self.clone(),
            lu,
        })
    }
}

/// LU factors together with the original matrix for residual checks.
#[derive(Clone, Debug)]
pub struct BandedLu {
    matrix: Banded,
    lu: Vec<f64>,
}

impl BandedLu {
    pub fn matrix(&self) -> &Banded {
        &self.matrix
    }

    fn substitute(&self, x: &mut [f64]) {
        let (n, bw) = (self.matrix.n, self.matrix.bw);
        let w = 2 * bw + 1;
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let row = i * w + bw - i;
            let mut s = x[i];
            for j in start..i {
                s -= self.lu[row + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let row = i * w + bw - i;
            let mut s = x[i];
            for j in i + 1..end {
                s -= self.lu[row + j] * x[j];
            }
            x[i] = s / self.lu[row + i];
        }
    }

    /// Solves `A x = b` with relative residual at most [`SOLVE_TOL`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.n;
        if b.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut x = b.to_vec();
        self.substitute(&mut x);
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = vec![0.0; n];
        let mut rel = f64::INFINITY;
        for round in 0..=REFINEMENT_ROUNDS {
            self.matrix.matvec(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            rel = r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / bnorm;
            if !rel.is_finite() {
                break;
            }
            if rel <= SOLVE_TOL * 1e-3 || round == REFINEMENT_ROUNDS {
                break;
            }
            self.substitute(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        if rel.is_finite() && rel <= SOLVE_TOL {
            Ok(x)
        } else {
            Err(Error::LinearSolveFailure(format!(
                "relative residual {rel:e} above {SOLVE_TOL:e}"
            )))
        }
    }
}
