//! The bulk density family
//!
//! ```text
//! f(ξ) = (1/p) ((Σξ:ξ + μ)^{p/2} − μ^{p/2}),   Σξ = λ₁ ξ + (λ₂/2)(tr ξ) Id
//! ```
//!
//! together with its gradient `(Σξ:ξ + μ)^{p/2−1} Σξ`, its recession function
//! `f̃(ξ) = (1/p)(Σξ:ξ)^{p/2}` and the cohesive surface norm
//! `f̃^{1/p}(w ⊗_𝔸 z)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::{tensor_a, FirstOrderOperator};
use crate::rng;
use crate::sym::{sym_dim, SymCoords, SymMat};

/// Floor applied under fractional powers of `Σξ:ξ + μ`.
pub const POWER_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HookeTensor {
    pub lambda1: f64,
    pub lambda2: f64,
    pub dim: usize,
}

impl HookeTensor {
    pub fn new(lambda1: f64, lambda2: f64, dim: usize) -> Result<Self> {
        if !(lambda1.is_finite() && lambda2.is_finite()) {
            return Err(invalid("lambda1", "Lamé coefficients must be finite"));
        }
        if !(lambda1 > 0.0) {
            return Err(invalid(
                "lambda1",
                format!("must be positive, got {lambda1}"),
            ));
        }
        if !(lambda1 + dim as f64 * lambda2 / 2.0 > 0.0) {
            return Err(invalid("lambda2", "lambda1 + n*lambda2/2 must be positive"));
        }
        Ok(Self {
            lambda1,
            lambda2,
            dim,
        })
    }

    /// `Σξ` in coordinates.
    pub fn stress(&self, c: &SymCoords) -> SymCoords {
        let mut out = c.scaled(self.lambda1);
        let t = 0.5 * self.lambda2 * c.trace();
        for i in 0..self.dim {
            out.c[i] += t;
        }
        out
    }

    /// `Σξ:ξ = λ₁|ξ|² + (λ₂/2)(tr ξ)²`.
    pub fn quad(&self, c: &SymCoords) -> f64 {
        let t = c.trace();
        self.lambda1 * c.norm_sq() + 0.5 * self.lambda2 * t * t
    }

    /// Extreme eigenvalues of the quadratic form on unit symmetric matrices.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        let volumetric = self.lambda1 + self.dim as f64 * self.lambda2 / 2.0;
        if self.dim == 1 {
            return (volumetric, volumetric);
        }
        (self.lambda1.min(volumetric), self.lambda1.max(volumetric))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkDensity {
    pub p: f64,
    pub mu: f64,
    pub hooke: HookeTensor,
}

impl BulkDensity {
    pub fn new(p: f64, mu: f64, hooke: HookeTensor) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid(
                "p",
                format!("growth exponent must exceed 1, got {p}"),
            ));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(
                "mu",
                format!("offset must be nonnegative, got {mu}"),
            ));
        }
        Ok(Self { p, mu, hooke })
    }

    /// Linear elasticity `p = 2, μ = 0`.
    pub fn linear_elastic(lambda1: f64, lambda2: f64, dim: usize) -> Result<Self> {
        Self::new(2.0, 0.0, HookeTensor::new(lambda1, lambda2, dim)?)
    }

    pub fn dim(&self) -> usize {
        self.hooke.dim
    }

    pub fn eval_coords(&self, c: &SymCoords) -> f64 {
        let s = self.hooke.quad(c);
        if self.p == 2.0 {
            return 0.5 * s;
        }
        let half = 0.5 * self.p;
        ((s + self.mu).max(POWER_FLOOR).powf(half) - self.mu.powf(half)) / self.p
    }

    /// Value and gradient (in coordinates) in one pass.
    pub fn eval_grad_coords(&self, c: &SymCoords) -> (f64, SymCoords) {
        let s = self.hooke.quad(c);
        let stress = self.hooke.stress(c);
        if self.p == 2.0 {
            return (0.5 * s, stress);
        }
        let half = 0.5 * self.p;
        let base = (s + self.mu).max(POWER_FLOOR);
        let factor = base.powf(half - 1.0);
        let value = (base * factor - self.mu.powf(half)) / self.p;
        (value, stress.scaled(factor))
    }

    /// Scalar weight `(Σξ:ξ + μ)^{p/2−1}` of the secant stiffness.
    pub fn secant_factor(&self, c: &SymCoords) -> f64 {
        if self.p == 2.0 {
            return 1.0;
        }
        (self.hooke.quad(c) + self.mu)
            .max(POWER_FLOOR)
            .powf(0.5 * self.p - 1.0)
    }

    pub fn eval(&self, xi: &SymMat) -> f64 {
        self.eval_coords(&xi.coords())
    }

    pub fn grad(&self, xi: &SymMat) -> SymMat {
        self.eval_grad_coords(&xi.coords()).1.to_matrix()
    }

    pub fn recession_coords(&self, c: &SymCoords) -> f64 {
        self.hooke.quad(c).max(0.0).powf(0.5 * self.p) / self.p
    }

    /// `f̃(ξ) = lim f(sξ)/s^p = (1/p)(Σξ:ξ)^{p/2}`.
    pub fn recession(&self, xi: &SymMat) -> f64 {
        self.recession_coords(&xi.coords())
    }

    /// `sup_ξ |f(sξ)^{1/p}/s − f̃(ξ)^{1/p}|` over `n_dirs` seeded unit directions.
    pub fn recession_gap(&self, s: f64, n_dirs: usize, seed: u64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(invalid("s", "scale must be positive"));
        }
        let n = self.dim();
        let mut rng = rng::stream(seed, 10);
        let inv_p = 1.0 / self.p;
        let mut gap: f64 = 0.0;
        for _ in 0..n_dirs {
            let dir = unit_coords(&mut rng, n);
            let scaled = self.eval_coords(&dir.scaled(s)).powf(inv_p) / s;
            gap = gap.max((scaled - self.recession_coords(&dir).powf(inv_p)).abs());
        }
        Ok(gap)
    }

    /// Empirical `(c_lower, c_upper)` with
    /// `c_lower (|ξ|^p − 1) < f(ξ) < c_upper (|ξ|^p + 1)` on every sample.
    /// The fitted constants are widened by a relative margin of `1e-9`.
    ///
    /// Samples mix radii from `1e-3` to `1e3`; the recession function on the
    /// sampled directions bounds the large-strain ratios.
    pub fn growth_check(&self, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
        let n = self.dim();
        let mut rng = rng::stream(seed, 11);
        let p = self.p;
        let mut samples = Vec::with_capacity(n_samples);
        let mut c_lower = f64::INFINITY;
        let mut c_upper: f64 = 0.0;
        for k in 0..n_samples.max(1) {
            let dir = unit_coords(&mut rng, n);
            let radius = 10f64.powf(-3.0 + 6.0 * (k as f64 + 0.5) / n_samples.max(1) as f64);
            let xi = dir.scaled(radius);
            let f = self.eval_coords(&xi);
            let rp = radius.powf(p);
            c_upper = c_upper.max(f / (rp + 1.0)).max(self.recession_coords(&dir));
            if radius > 1.0 {
                c_lower = c_lower.min(f / (rp - 1.0));
            }
            c_lower = c_lower.min(self.recession_coords(&dir));
            samples.push((f, rp));
        }
        c_lower *= 1.0 - 1e-9;
        c_upper *= 1.0 + 1e-9;
        if !(c_lower.is_finite() && c_lower > 0.0 && c_upper.is_finite()) {
            return Err(Error::DensityCheck(format!(
                "no finite positive growth constants fit (lower {c_lower}, upper {c_upper})"
            )));
        }
        for (f, rp) in samples {
            if !(c_lower * (rp - 1.0) < f && f < c_upper * (rp + 1.0)) {
                return Err(Error::DensityCheck(format!(
                    "sample violates growth bounds: f = {f}, |xi|^p = {rp}"
                )));
            }
        }
        Ok((c_lower, c_upper))
    }

    /// Cohesive surface norm `f̃^{1/p}(w ⊗_𝔸 z)`.
    pub fn surface_norm(&self, op: &FirstOrderOperator, w: &[f64], z: &[f64]) -> Result<f64> {
        let t = tensor_a(op, w, z)?;
        Ok(self.recession(&t).powf(1.0 / self.p))
    }
}

fn unit_coords<R: rand::Rng>(rng: &mut R, n: usize) -> SymCoords {
    let v = rng::unit_vector(rng, sym_dim(n));
    let mut c = SymCoords::zeros(n);
    c.as_mut_slice().copy_from_slice(&v);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn density(p: f64, mu: f64, l1: f64, l2: f64, n: usize) -> BulkDensity {
        BulkDensity::new(p, mu, HookeTensor::new(l1, l2, n).unwrap()).unwrap()
    }

    fn e11(n: usize) -> SymMat {
        let mut d = vec![0.0; n];
        d[0] = 1.0;
        SymMat::diag(&d)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(
            density(2.0, 0.0, 1.0, 0.0, 2).eval(&SymMat::identity(2)),
            1.0
        );
        assert_eq!(density(3.0, 0.7, 1.3, 0.4, 3).eval(&SymMat::zeros(3)), 0.0);
        assert!((density(4.0, 1.0, 1.0, 0.0, 2).eval(&e11(2)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn grad_examples() {
        let f = density(2.0, 0.0, 1.0, 0.0, 3);
        let xi = SymMat::sym_product(&[0.3, 1.0, -0.2], &[1.0, 0.5, 0.25]);
        assert!((f.grad(&xi) - xi).norm() < 1e-15);
        let g = density(3.0, 0.5, 1.0, 0.2, 2);
        assert_eq!(g.grad(&SymMat::zeros(2)).norm(), 0.0);
        // μ = 0, p < 2 at the origin uses the zero subgradient
        let h = density(1.5, 0.0, 1.0, 0.0, 2);
        assert_eq!(h.grad(&SymMat::zeros(2)).norm(), 0.0);
    }

    #[test]
    fn recession_examples() {
        let f = density(2.0, 0.9, 1.0, 0.3, 2);
        let xi = SymMat::sym_product(&[0.3, 1.0], &[1.0, -0.5]);
        let g = density(2.0, 0.0, 1.0, 0.3, 2);
        assert!((f.recession(&xi) - g.eval(&xi)).abs() < 1e-15);
        assert!((density(4.0, 1.0, 1.0, 0.0, 2).recession(&e11(2)) - 0.25).abs() < 1e-15);
        let h = density(3.0, 1.0, 1.0, 0.5, 3);
        let xi = SymMat::sym_product(&[0.3, 1.0, 2.0], &[1.0, -0.5, 0.1]);
        assert!((h.recession(&(xi * 2.0)) - 8.0 * h.recession(&xi)).abs() < 1e-12);
    }

    #[test]
    fn recession_gap_examples() {
        assert!(
            density(2.0, 0.0, 1.0, 0.0, 2)
                .recession_gap(3.0, 50, 1)
                .unwrap()
                < 1e-15
        );
        // p = 2: the offset cancels exactly, so the gap is zero up to rounding
        // and in particular below the closed-form bound.
        let f = density(2.0, 0.5, 1.0, 0.0, 2);
        let (_, smax) = f.hooke.extreme_eigenvalues();
        for s in [1.0, 2.0, 5.0, 10.0, 100.0] {
            let gap = f.recession_gap(s, 100, 2).unwrap();
            let bound = ((smax * s * s + 0.5).sqrt() - (smax * s * s).sqrt()) / s;
            assert!(gap <= 1e-14);
            assert!(gap <= bound + 1e-14 && bound <= 0.5f64.sqrt() / s);
        }
        let h = density(3.0, 0.5, 1.0, 0.2, 2);
        let mut prev = f64::INFINITY;
        for s in [1.0, 2.0, 5.0, 10.0, 100.0] {
            let gap = h.recession_gap(s, 100, 2).unwrap();
            assert!(gap < prev);
            prev = gap;
        }
        let g = density(4.0, 1.0, 1.0, 0.0, 2);
        assert!(g.recession_gap(10.0, 100, 3).unwrap() < g.recession_gap(2.0, 100, 3).unwrap());
        assert!(g.recession_gap(0.0, 1, 0).is_err());
    }

    #[test]
    fn growth_examples() {
        let (lo, hi) = density(2.0, 0.0, 1.0, 0.0, 2).growth_check(500, 4).unwrap();
        assert!(lo <= 0.5 + 1e-12 && 0.5 <= hi + 1e-12);
        let (lo, hi) = density(3.0, 1.0, 1.0, 0.0, 3).growth_check(500, 5).unwrap();
        assert!(lo > 0.0 && hi.is_finite());
        assert!(HookeTensor::new(0.0, 1.0, 2).is_err());
        assert!(HookeTensor::new(1.0, -1.5, 2).is_err());
        assert!(BulkDensity::new(1.0, 0.0, HookeTensor::new(1.0, 0.0, 1).unwrap()).is_err());
    }

    #[test]
    fn surface_norm_examples() {
        let op = FirstOrderOperator::full_strain(2).unwrap();
        let f = density(2.0, 0.0, 1.0, 0.0, 2);
        let delta = -1.7;
        let s = f.surface_norm(&op, &[0.0, delta], &[0.0, 1.0]).unwrap();
        assert!((s - delta.abs() / SQRT_2).abs() < 1e-15);
        assert_eq!(f.surface_norm(&op, &[0.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }
}
