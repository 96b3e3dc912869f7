//! Closed-form vector fields of degree at most two.
//!
//! These carry exact gradients, so the strain of a kernel candidate, a
//! Dirichlet datum or a template side can be evaluated without finite
//! differences.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sym::{SymMat, MAX_DIM};

/// `u_i(x) = b_i + Σ_j B_ij x_j + ½ Σ_jk C_ijk x_j x_k`, with `C_ijk = C_ikj`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticField {
    pub constant: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadratic: Vec<Vec<Vec<f64>>>,
}

impl QuadraticField {
    pub fn zero(n: usize) -> Self {
        Self {
            constant: vec![0.0; n],
            linear: Vec::new(),
            quadratic: Vec::new(),
        }
    }

    pub fn constant(b: &[f64]) -> Self {
        Self {
            constant: b.to_vec(),
            linear: Vec::new(),
            quadratic: Vec::new(),
        }
    }

    /// `x ↦ B x + b` with `B` given row-major.
    pub fn affine(linear: Vec<Vec<f64>>, b: &[f64]) -> Self {
        Self {
            constant: b.to_vec(),
            linear,
            quadratic: Vec::new(),
        }
    }

    /// Rigid motion `x ↦ M x + b`; `M` must be skew.
    pub fn rigid(skew: Vec<Vec<f64>>, b: &[f64]) -> Result<Self> {
        let n = b.len();
        check_square(&skew, n, "skew")?;
        for j in 0..n {
            for k in 0..n {
                if (skew[j][k] + skew[k][j]).abs() > 1e-12 * (1.0 + skew[j][k].abs()) {
                    return Err(invalid("skew", "matrix is not skew-symmetric"));
                }
            }
        }
        Ok(Self::affine(skew, b))
    }

    /// Conformal Killing field `x ↦ M x + b + 2 (a·x) x − |x|² a`.
    pub fn conformal_killing(skew: Vec<Vec<f64>>, b: &[f64], a: &[f64]) -> Result<Self> {
        let n = b.len();
        if a.len() != n {
            return Err(invalid("a", format!("expected {n} entries")));
        }
        let mut f = Self::rigid(skew, b)?;
        let mut c = vec![vec![vec![0.0; n]; n]; n];
        for (i, ci) in c.iter_mut().enumerate() {
            for (j, cij) in ci.iter_mut().enumerate() {
                for (k, cijk) in cij.iter_mut().enumerate() {
                    let dik = if i == k { 1.0 } else { 0.0 };
                    let dij = if i == j { 1.0 } else { 0.0 };
                    let djk = if j == k { 1.0 } else { 0.0 };
                    *cijk = 2.0 * (a[j] * dik + a[k] * dij) - 2.0 * djk * a[i];
                }
            }
        }
        f.quadratic = c;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.constant.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || n > MAX_DIM {
            return Err(invalid(
                "constant",
                format!("dimension {n} not in 1..={MAX_DIM}"),
            ));
        }
        if !self.linear.is_empty() {
            check_square(&self.linear, n, "linear")?;
        }
        if !self.quadratic.is_empty() {
            if self.quadratic.len() != n {
                return Err(invalid("quadratic", format!("expected {n} blocks")));
            }
            for block in &self.quadratic {
                check_square(block, n, "quadratic")?;
                for j in 0..n {
                    for k in 0..n {
                        if (block[j][k] - block[k][j]).abs() > 1e-12 * (1.0 + block[j][k].abs()) {
                            return Err(invalid("quadratic", "blocks must be symmetric"));
                        }
                    }
                }
            }
        }
        let all = self
            .constant
            .iter()
            .chain(self.linear.iter().flatten())
            .chain(self.quadratic.iter().flatten().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("field", "non-finite coefficient"));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let n = self.dim();
        let mut out = [0.0; MAX_DIM];
        for i in 0..n {
            let mut s = self.constant[i];
            if !self.linear.is_empty() {
                for j in 0..n {
                    s += self.linear[i][j] * x[j];
                }
            }
            if !self.quadratic.is_empty() {
                for j in 0..n {
                    for k in 0..n {
                        s += 0.5 * self.quadratic[i][j][k] * x[j] * x[k];
                    }
                }
            }
            out[i] = s;
        }
        out
    }

    /// `∂_j u_i(x)` as `g[i][j]`.
    pub fn gradient(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let n = self.dim();
        let mut g = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                let mut s = if self.linear.is_empty() {
                    0.0
                } else {
                    self.linear[i][j]
                };
                if !self.quadratic.is_empty() {
                    for k in 0..n {
                        s += self.quadratic[i][j][k] * x[k];
                    }
                }
                g[i][j] = s;
            }
        }
        g
    }

    pub fn strain(&self, x: &[f64]) -> SymMat {
        SymMat::sym_part(self.dim(), &self.gradient(x))
    }

    /// Sum of two fields of equal dimension.
    pub fn plus(&self, other: &Self) -> Self {
        let n = self.dim();
        assert_eq!(n, other.dim());
        let constant = (0..n)
            .map(|i| self.constant[i] + other.constant[i])
            .collect();
        let lin = |f: &Self, i: usize, j: usize| {
            if f.linear.is_empty() {
                0.0
            } else {
                f.linear[i][j]
            }
        };
        let quad = |f: &Self, i: usize, j: usize, k: usize| {
            if f.quadratic.is_empty() {
                0.0
            } else {
                f.quadratic[i][j][k]
            }
        };
        let linear = if self.linear.is_empty() && other.linear.is_empty() {
            Vec::new()
        } else {
            (0..n)
                .map(|i| (0..n).map(|j| lin(self, i, j) + lin(other, i, j)).collect())
                .collect()
        };
        let quadratic = if self.quadratic.is_empty() && other.quadratic.is_empty() {
            Vec::new()
        } else {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|k| quad(self, i, j, k) + quad(other, i, j, k))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            constant,
            linear,
            quadratic,
        }
    }
}

fn check_square(m: &[Vec<f64>], n: usize, name: &'static str) -> Result<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(invalid(name, format!("expected a {n}x{n} matrix")));
    }
    Ok(())
}
