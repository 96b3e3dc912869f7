//! Small symmetric matrices (n ≤ 3) and their orthonormal coordinates.
//!
//! The coordinate basis of `Sym(n)` is fixed throughout the crate: the
//! diagonal units `e_i ⊗ e_i` first, then the off-diagonal units
//! `(e_j ⊗ e_k + e_k ⊗ e_j) / √2` for `j < k` in lexicographic order. In this
//! basis the Frobenius inner product is the Euclidean one, so a symmetric
//! matrix `ξ` has coordinates `ξ_ii` and `√2 ξ_jk`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::ops::{Add, Mul, Sub};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;
/// Largest coordinate count, `MAX_DIM (MAX_DIM + 1) / 2`.
pub const MAX_SYM: usize = 6;

/// Number of coordinates of `Sym(n)`.
pub const fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index pairs `(j, k)` of the basis elements for dimension `n`.
pub fn basis_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    let diag = (0..n).map(|i| (i, i));
    let off = (0..n).flat_map(move |j| (j + 1..n).map(move |k| (j, k)));
    diag.chain(off)
}

/// Coordinates of a symmetric matrix in the orthonormal basis.
#[derive(Clone, Copy, PartialEq)]
pub struct SymCoords {
    pub n: usize,
    pub c: [f64; MAX_SYM],
}

impl SymCoords {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            c: [0.0; MAX_SYM],
        }
    }

    pub fn len(&self) -> usize {
        sym_dim(self.n)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.len()]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let d = self.len();
        &mut self.c[..d]
    }

    pub fn trace(&self) -> f64 {
        self.c[..self.n].iter().sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for x in self.as_mut_slice() {
            *x *= s;
        }
        self
    }

    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        let d = self.len();
        for i in 0..d {
            self.c[i] += s * other.c[i];
        }
    }

    pub fn to_matrix(&self) -> SymMat {
        let mut m = SymMat::zeros(self.n);
        for (idx, (j, k)) in basis_pairs(self.n).enumerate() {
            if j == k {
                m.m[j][j] = self.c[idx];
            } else {
                let val = self.c[idx] / SQRT_2;
                m.m[j][k] = val;
                m.m[k][j] = val;
            }
        }
        m
    }
}

impl fmt::Debug for SymCoords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Add for SymCoords {
    type Output = SymCoords;
    fn add(mut self, rhs: SymCoords) -> SymCoords {
        self.add_scaled(1.0, &rhs);
        self
    }
}

impl Sub for SymCoords {
    type Output = SymCoords;
    fn sub(mut self, rhs: SymCoords) -> SymCoords {
        self.add_scaled(-1.0, &rhs);
        self
    }
}

/// Dense symmetric matrix of size `n × n`, `n ≤ 3`.
#[derive(Clone, Copy, PartialEq)]
pub struct SymMat {
    pub n: usize,
    pub m: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM, "dimension {n} exceeds {MAX_DIM}");
        Self {
            n,
            m: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.m[i][i] = 1.0;
        }
        s
    }

    /// Builds the symmetric part of a general row-major `n × n` matrix.
    pub fn sym_part(n: usize, a: &[[f64; MAX_DIM]; MAX_DIM]) -> Self {
        let mut s = Self::zeros(n);
        for j in 0..n {
            for k in 0..n {
                s.m[j][k] = 0.5 * (a[j][k] + a[k][j]);
            }
        }
        s
    }

    /// Symmetrized tensor product `w ⊙ z = (w ⊗ z + z ⊗ w) / 2`.
    pub fn sym_product(w: &[f64], z: &[f64]) -> Self {
        assert_eq!(w.len(), z.len());
        let n = w.len();
        let mut s = Self::zeros(n);
        for j in 0..n {
            for k in 0..n {
                s.m[j][k] = 0.5 * (w[j] * z[k] + w[k] * z[j]);
            }
        }
        s
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut s = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            s.m[i][i] = *v;
        }
        s
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.m[j][k]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.m[i][i]).sum()
    }

    pub fn frob_dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                s += self.m[j][k] * other.m[j][k];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.frob_dot(self).sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|j| (0..self.n).all(|k| (self.m[j][k] - self.m[k][j]).abs() <= tol))
    }

    pub fn coords(&self) -> SymCoords {
        let mut c = SymCoords::zeros(self.n);
        for (idx, (j, k)) in basis_pairs(self.n).enumerate() {
            c.c[idx] = if j == k {
                self.m[j][j]
            } else {
                SQRT_2 * 0.5 * (self.m[j][k] + self.m[k][j])
            };
        }
        c
    }
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.n).map(|j| &self.m[j][..self.n]).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(mut self, rhs: SymMat) -> SymMat {
        for j in 0..self.n {
            for k in 0..self.n {
                self.m[j][k] += rhs.m[j][k];
            }
        }
        self
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(mut self, rhs: SymMat) -> SymMat {
        for j in 0..self.n {
            for k in 0..self.n {
                self.m[j][k] -= rhs.m[j][k];
            }
        }
        self
    }
}

impl Mul<f64> for SymMat {
    type Output = SymMat;
    fn mul(mut self, s: f64) -> SymMat {
        for j in 0..self.n {
            for k in 0..self.n {
                self.m[j][k] *= s;
            }
        }
        self
    }
}
