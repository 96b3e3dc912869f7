//! Planar jump templates and the sharp-interface energy `D(u, 1)`.
//!
//! The jump plane is `{x_n = c}` with `n` the last axis. Below the plane
//! `u = lower`; above it `u = upper + φ(x′) jump`, where `φ ≡ 1` for a
//! uniform jump and `φ` is a product of tents for a bump.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::constants::{conjugate, limit_constants, LimitConstants, PhaseParams};
use crate::density::BulkDensity;
use crate::error::{invalid, Error, Result};
use crate::field::QuadraticField;
use crate::grid::{Face, Side};
use crate::operator::FirstOrderOperator;
use crate::quadrature::gauss_composite;
use crate::rng;
use crate::sym::{SymMat, MAX_DIM};

/// Operator, bulk density and phase parameters shared by the limit tools.
#[derive(Clone, Debug)]
pub struct LimitModel {
    pub op: FirstOrderOperator,
    pub density: BulkDensity,
    pub phase: PhaseParams,
}

impl LimitModel {
    pub fn new(op: FirstOrderOperator, density: BulkDensity, phase: PhaseParams) -> Result<Self> {
        if op.dim() != density.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                got: density.dim(),
            });
        }
        phase.validate()?;
        Ok(Self { op, density, phase })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn constants(&self) -> LimitConstants {
        limit_constants(&self.phase, self.density.p).expect("validated at construction")
    }

    /// `f(𝔸ξ) + f(ξ − 𝔸ξ)`.
    pub fn bulk(&self, xi: &SymMat) -> f64 {
        let a = self.op.apply(xi);
        self.density.eval(&a) + self.density.eval(&(*xi - a))
    }

    fn surface(&self, w: &[f64], normal: &[f64]) -> f64 {
        if w.iter().all(|x| *x == 0.0) {
            return 0.0;
        }
        self.density
            .surface_norm(&self.op, w, normal)
            .expect("dimensions checked")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JumpShape {
    Uniform,
    /// Tent in each tangential direction, vanishing outside `[lo, hi]`.
    Bump {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMismatch {
    pub faces: Vec<Face>,
    pub datum: QuadraticField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpTemplate {
    pub extents: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    /// Position of the plane along the last axis, relative to the origin.
    pub plane: f64,
    pub lower: QuadraticField,
    pub upper: QuadraticField,
    pub jump: Vec<f64>,
    pub shape: JumpShape,
    pub lipschitz_l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<BoundaryMismatch>,
}

const VALIDATION_SAMPLES: usize = 4096;

impl JumpTemplate {
    /// Constant jump `δ` across `{x_n = c}` on the box `(0, L)`, zero sides.
    pub fn uniform(extents: &[f64], plane: f64, jump: &[f64]) -> Result<Self> {
        let n = extents.len();
        let t = Self {
            extents: extents.to_vec(),
            origin: None,
            plane,
            lower: QuadraticField::zero(n),
            upper: QuadraticField::constant(jump),
            jump: vec![0.0; n],
            shape: JumpShape::Uniform,
            lipschitz_l: 0.0,
            mismatch: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn origin(&self) -> [f64; MAX_DIM] {
        let mut o = [0.0; MAX_DIM];
        if let Some(v) = &self.origin {
            o[..v.len()].copy_from_slice(v);
        }
        o
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let n = self.dim();
        let o = self.origin();
        let mut t = self.clone();
        t.origin = Some((0..n).map(|i| o[i] + shift[i]).collect());
        t.lower = shift_field(&self.lower, shift);
        t.upper = shift_field(&self.upper, shift);
        if let Some(m) = &mut t.mismatch {
            m.datum = shift_field(&m.datum, shift);
        }
        t
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || n > MAX_DIM {
            return Err(invalid(
                "extents",
                format!("dimension {n} not in 1..={MAX_DIM}"),
            ));
        }
        if self.extents.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(invalid("extents", "must be positive"));
        }
        if self.origin.as_ref().is_some_and(|o| o.len() != n) {
            return Err(invalid("origin", format!("expected {n} entries")));
        }
        if !(self.plane > 0.0 && self.plane < self.extents[n - 1]) {
            return Err(invalid("plane", "must lie strictly inside the box"));
        }
        for f in [&self.lower, &self.upper] {
            f.validate()?;
            if f.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: f.dim(),
                });
            }
        }
        if self.jump.len() != n || self.jump.iter().any(|x| !x.is_finite()) {
            return Err(invalid("jump", format!("expected {n} finite entries")));
        }
        if !(self.lipschitz_l >= 0.0) {
            return Err(invalid("lipschitz_l", "must be nonnegative"));
        }
        if let JumpShape::Bump { lo, hi } = &self.shape {
            if n == 1 {
                return Err(invalid(
                    "shape",
                    "a bump needs at least one tangential axis",
                ));
            }
            if lo.len() != n - 1 || hi.len() != n - 1 {
                return Err(invalid(
                    "shape",
                    format!("bump bounds need {} entries", n - 1),
                ));
            }
            for j in 0..n - 1 {
                if !(0.0 <= lo[j] && lo[j] < hi[j] && hi[j] <= self.extents[j]) {
                    return Err(invalid(
                        "shape",
                        "bump bounds must be ordered inside the box",
                    ));
                }
            }
        }
        if let Some(m) = &self.mismatch {
            m.datum.validate()?;
            if m.datum.dim() != n || m.faces.iter().any(|f| f.axis >= n) {
                return Err(invalid(
                    "mismatch",
                    "faces or datum do not match the dimension",
                ));
            }
        }

        let mut rng = rng::stream(0x7e3, 0);
        let o = self.origin();
        let l_tol = self.lipschitz_l * (1.0 + 1e-9) + 1e-12;
        for _ in 0..VALIDATION_SAMPLES {
            let mut x = [0.0; MAX_DIM];
            for (j, xj) in x.iter_mut().enumerate().take(n) {
                *xj = rng.random_range(0.0..self.extents[j]);
            }
            let lip = frob(&self.lower.gradient(&abs(&o, &x, n)), n)
                .max(frob(&self.upper_gradient(&x), n));
            if lip > l_tol {
                return Err(invalid(
                    "lipschitz_l",
                    format!("sampled gradient norm {lip} exceeds the bound"),
                ));
            }
            if matches!(self.shape, JumpShape::Bump { .. }) {
                let mut xp = x;
                xp[n - 1] = self.plane;
                let (a, b) = (
                    self.lower.eval(&abs(&o, &xp, n)),
                    self.upper.eval(&abs(&o, &xp, n)),
                );
                if (0..n).any(|i| (a[i] - b[i]).abs() > 1e-10 * (1.0 + a[i].abs())) {
                    return Err(invalid(
                        "upper",
                        "sides must agree on the plane when the jump is a bump",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Tangential factor `φ(x′)` and its gradient (local coordinates).
    pub fn shape_factor(&self, x: &[f64]) -> (f64, [f64; MAX_DIM]) {
        let n = self.dim();
        let mut g = [0.0; MAX_DIM];
        match &self.shape {
            JumpShape::Uniform => (1.0, g),
            JumpShape::Bump { lo, hi } => {
                let mut vals = [1.0; MAX_DIM];
                let mut ders = [0.0; MAX_DIM];
                for j in 0..n - 1 {
                    let half = 0.5 * (hi[j] - lo[j]);
                    let d = x[j] - 0.5 * (hi[j] + lo[j]);
                    if d.abs() < half {
                        vals[j] = 1.0 - d.abs() / half;
                        ders[j] = -d.signum() / half;
                    } else {
                        vals[j] = 0.0;
                    }
                }
                let phi: f64 = vals[..n - 1].iter().product();
                for j in 0..n - 1 {
                    let others: f64 = (0..n - 1).filter(|&k| k != j).map(|k| vals[k]).product();
                    g[j] = ders[j] * others;
                }
                (phi, g)
            }
        }
    }

    fn upper_gradient(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let n = self.dim();
        let mut g = self.upper.gradient(&abs(&self.origin(), x, n));
        let (_, dphi) = self.shape_factor(x);
        for (i, row) in g.iter_mut().enumerate().take(n) {
            for j in 0..n {
                row[j] += self.jump[i] * dphi[j];
            }
        }
        g
    }

    /// `u(x)` at local coordinates; the upper side owns the plane.
    pub fn displacement(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let n = self.dim();
        let xa = abs(&self.origin(), x, n);
        if x[n - 1] < self.plane {
            return self.lower.eval(&xa);
        }
        self.upper_value(x)
    }

    pub fn lower_value(&self, x: &[f64]) -> [f64; MAX_DIM] {
        self.lower.eval(&abs(&self.origin(), x, self.dim()))
    }

    pub fn upper_value(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let n = self.dim();
        let mut u = self.upper.eval(&abs(&self.origin(), x, n));
        let (phi, _) = self.shape_factor(x);
        for i in 0..n {
            u[i] += phi * self.jump[i];
        }
        u
    }

    pub fn strain(&self, x: &[f64]) -> SymMat {
        let n = self.dim();
        if x[n - 1] < self.plane {
            self.lower.strain(&abs(&self.origin(), x, n))
        } else {
            SymMat::sym_part(n, &self.upper_gradient(x))
        }
    }

    /// `[u](x′) = u⁺ − u⁻` on the plane; `x` holds the tangential coordinates.
    pub fn jump_at(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let n = self.dim();
        let mut xp = [0.0; MAX_DIM];
        xp[..n - 1].copy_from_slice(&x[..n - 1]);
        xp[n - 1] = self.plane;
        let (a, b) = (self.lower_value(&xp), self.upper_value(&xp));
        let mut out = [0.0; MAX_DIM];
        for i in 0..n {
            out[i] = b[i] - a[i];
        }
        out
    }

    /// Closed tangential box containing `J_u`, or `None` when `[u] ≡ 0`.
    pub fn jump_support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        match &self.shape {
            JumpShape::Bump { lo, hi } => self
                .jump
                .iter()
                .any(|x| *x != 0.0)
                .then(|| (lo.clone(), hi.clone())),
            JumpShape::Uniform => {
                // The trace difference is a polynomial: either identically zero
                // or nonzero almost everywhere.
                let mut rng = rng::stream(0x7e3, 1);
                let nonzero = (0..64).any(|_| {
                    let mut x = [0.0; MAX_DIM];
                    for (j, xj) in x.iter_mut().enumerate().take(n - 1) {
                        *xj = rng.random_range(0.0..self.extents[j]);
                    }
                    self.jump_at(&x)[..n].iter().any(|v| v.abs() > 1e-14)
                });
                nonzero.then(|| (vec![0.0; n - 1], self.extents[..n - 1].to_vec()))
            }
        }
    }

    /// `ℋ^{n−1}(J_u)`; the cross-section of a bar counts as one point.
    pub fn jump_measure(&self) -> f64 {
        match self.jump_support() {
            None => 0.0,
            Some((lo, hi)) => lo.iter().zip(&hi).map(|(a, b)| b - a).product(),
        }
    }

    /// Breakpoints along axis `j` where the integrand has kinks.
    fn breaks(&self, j: usize) -> Vec<f64> {
        let n = self.dim();
        let mut b = Vec::new();
        if j == n - 1 {
            b.push(self.plane);
        } else if let JumpShape::Bump { lo, hi } = &self.shape {
            b.extend([lo[j], 0.5 * (lo[j] + hi[j]), hi[j]]);
        }
        b
    }

    fn rule(&self, j: usize, lo: f64, hi: f64, res: &LimitQuadrature) -> Vec<(f64, f64)> {
        let mut cuts = self.breaks(j);
        let pieces = res.pieces.max(1);
        cuts.extend((1..pieces).map(|k| lo + (hi - lo) * k as f64 / pieces as f64));
        gauss_composite(lo, hi, &cuts, res.points)
    }
}

fn abs(o: &[f64; MAX_DIM], x: &[f64], n: usize) -> [f64; MAX_DIM] {
    let mut out = [0.0; MAX_DIM];
    for i in 0..n {
        out[i] = o[i] + x[i];
    }
    out
}

fn frob(g: &[[f64; MAX_DIM]; MAX_DIM], n: usize) -> f64 {
    g[..n]
        .iter()
        .map(|r| r[..n].iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// `x ↦ f(x − s)` written as a new quadratic field.
fn shift_field(f: &QuadraticField, s: &[f64]) -> QuadraticField {
    let n = f.dim();
    let back: Vec<f64> = s.iter().map(|x| -x).collect();
    let mut shifted = f.clone();
    shifted.constant = f.eval(&back)[..n].to_vec();
    if !f.linear.is_empty() || !f.quadratic.is_empty() {
        let g = f.gradient(&back);
        shifted.linear = (0..n).map(|i| g[i][..n].to_vec()).collect();
    }
    shifted
}

/// Tensor Gauss rule: `points` nodes on each of `pieces` subintervals per
/// axis, on top of the template's kink lines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitQuadrature {
    pub points: usize,
    pub pieces: usize,
}

impl Default for LimitQuadrature {
    fn default() -> Self {
        Self {
            points: 4,
            pieces: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitEnergy {
    pub bulk: f64,
    pub jump: f64,
    pub boundary: f64,
    pub total: f64,
}

fn tensor_points(rules: &[Vec<(f64, f64)>]) -> Vec<([f64; MAX_DIM], f64)> {
    let mut out = vec![([0.0; MAX_DIM], 1.0)];
    for (j, rule) in rules.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * rule.len());
        for (x, w) in &out {
            for (xj, wj) in rule {
                let mut y = *x;
                y[j] = *xj;
                next.push((y, w * wj));
            }
        }
        out = next;
    }
    out
}

/// Bulk part `∫ f(𝔸e(u)) + f(e(u) − 𝔸e(u))` with analytic strains.
pub fn bulk_energy(t: &JumpTemplate, model: &LimitModel, res: &LimitQuadrature) -> f64 {
    let n = t.dim();
    let rules: Vec<_> = (0..n).map(|j| t.rule(j, 0.0, t.extents[j], res)).collect();
    tensor_points(&rules)
        .iter()
        .map(|(x, w)| w * model.bulk(&t.strain(x)))
        .sum()
}

/// Jump part `∫_{J_u ∩ W} a + b f̃^{1/p}([u] ⊗_𝔸 e_n)` over the tangential
/// window `W = [lo, hi]` (the whole cross-section by default).
pub fn jump_energy(
    t: &JumpTemplate,
    model: &LimitModel,
    res: &LimitQuadrature,
    window: Option<(&[f64], &[f64])>,
) -> f64 {
    let n = t.dim();
    let k = model.constants();
    let mut normal = [0.0; MAX_DIM];
    normal[n - 1] = 1.0;
    let Some((slo, shi)) = t.jump_support() else {
        return 0.0;
    };
    let (wlo, whi) = window
        .map(|(a, b)| (a.to_vec(), b.to_vec()))
        .unwrap_or((slo.clone(), shi.clone()));
    let lo: Vec<f64> = (0..n - 1).map(|j| slo[j].max(wlo[j])).collect();
    let hi: Vec<f64> = (0..n - 1).map(|j| shi[j].min(whi[j])).collect();
    if (0..n - 1).any(|j| lo[j] >= hi[j]) {
        return 0.0;
    }
    let area: f64 = (0..n - 1).map(|j| hi[j] - lo[j]).product();
    let rules: Vec<_> = (0..n - 1).map(|j| t.rule(j, lo[j], hi[j], res)).collect();
    let cohesive: f64 = tensor_points(&rules)
        .iter()
        .map(|(x, w)| w * model.surface(&t.jump_at(x)[..n], &normal[..n]))
        .sum();
    k.a * area + k.b * cohesive
}

/// Boundary part over the declared mismatch faces.
pub fn boundary_energy(t: &JumpTemplate, model: &LimitModel, res: &LimitQuadrature) -> f64 {
    let Some(m) = &t.mismatch else {
        return 0.0;
    };
    let n = t.dim();
    let k = model.constants();
    let o = t.origin();
    let mut total = 0.0;
    for face in &m.faces {
        let fixed = match face.side {
            Side::Min => 0.0,
            Side::Max => t.extents[face.axis],
        };
        let rules: Vec<_> = (0..n)
            .map(|j| {
                if j == face.axis {
                    vec![(fixed, 1.0)]
                } else {
                    t.rule(j, 0.0, t.extents[j], res)
                }
            })
            .collect();
        let normal = face.normal(n);
        for (x, w) in tensor_points(&rules) {
            let u = t.displacement(&x);
            let u0 = m.datum.eval(&abs(&o, &x, n));
            let d: Vec<f64> = (0..n).map(|i| u0[i] - u[i]).collect();
            if d.iter().any(|x| x.abs() > 1e-12) {
                total += w * (k.a + k.b * model.surface(&d, &normal));
            }
        }
    }
    total
}

/// `D(u, 1)` split into bulk, jump and boundary parts.
pub fn limit_energy(
    t: &JumpTemplate,
    model: &LimitModel,
    res: &LimitQuadrature,
) -> Result<LimitEnergy> {
    t.validate()?;
    if model.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            got: model.dim(),
        });
    }
    let bulk = bulk_energy(t, model, res);
    let jump = jump_energy(t, model, res, None);
    let boundary = boundary_energy(t, model, res);
    Ok(LimitEnergy {
        bulk,
        jump,
        boundary,
        total: bulk + jump + boundary,
    })
}

/// Half-width `σ(x′)` of the fully cracked layer.
pub fn sigma_k(t: &JumpTemplate, model: &LimitModel, eps: f64, x: &[f64]) -> f64 {
    let n = t.dim();
    let p = model.density.p;
    let pc = conjugate(p);
    let mut normal = [0.0; MAX_DIM];
    normal[n - 1] = 1.0;
    let sn = model.surface(&t.jump_at(x)[..n], &normal[..n]);
    eps / (2.0 * pc * model.phase.psi.at_zero().powf(1.0 / pc))
        * p.powf(1.0 / p)
        * pc.powf(1.0 / pc)
        * sn
}

/// Minimum of `D(·, 1)` for a bar `(0, L)` pulled to `u(L) − u(0) = δ`,
/// allowing one interior jump `s` with the rest taken up elastically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarLimit {
    pub energy: f64,
    pub elastic: f64,
    pub jump: f64,
}

pub fn bar_limit_minimum(model: &LimitModel, length: f64, delta: f64) -> Result<BarLimit> {
    if model.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: model.dim(),
        });
    }
    if !(length > 0.0 && delta.is_finite()) {
        return Err(invalid(
            "delta",
            "needs a positive length and finite displacement",
        ));
    }
    let k = model.constants();
    let sign = delta.signum();
    let d = delta.abs();
    let bulk = |s: f64| length * model.bulk(&SymMat::diag(&[(d - s) / length]));
    let cracked = |s: f64| bulk(s) + k.a + k.b * model.surface(&[s], &[1.0]);
    let elastic = bulk(0.0);
    // Convex in s: golden-section search on [0, d].
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, d);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (cracked(x1), cracked(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + d) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cracked(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cracked(x2);
        }
    }
    let s = 0.5 * (lo + hi);
    let (crack_e, crack_s) = [(cracked(s), s), (cracked(0.0), 0.0), (cracked(d), d)]
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    if elastic <= crack_e {
        Ok(BarLimit {
            energy: elastic,
            elastic,
            jump: 0.0,
        })
    } else {
        Ok(BarLimit {
            energy: crack_e,
            elastic,
            jump: sign * crack_s,
        })
    }
}

/// Smallest `δ > 0` at which cracking the bar becomes optimal.
pub fn bar_transition(model: &LimitModel, length: f64) -> Result<f64> {
    let gap = |d: f64| -> Result<f64> {
        let r = bar_limit_minimum(model, length, d)?;
        Ok(r.elastic - r.energy)
    };
    let mut hi = 1.0;
    while gap(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::OutOfRange("no transition below 1e12".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
