//! The optimal transition profile `w` and the far-field level `ρ`.
//!
//! `w` solves `w' = (q'/(γq))^{1/q} ε^{-1} ψ^{1/q}(w)`, `w(0) = 0`, and is
//! represented as the inverse of
//! `Z(z) = (γq/q')^{1/q} ε ∫₀^z ψ^{-1/q}(s) ds`.

use serde::{Deserialize, Serialize};

use super::constants::{conjugate, PhaseParams};
use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;

/// Intervals of the dense profile table.
pub const TABLE_INTERVALS: usize = 32768;

/// How `ρ` is tied to `ε` through `h₁(ρ) = ψ(1−ρ)` and
/// `h₂(ρ) = (∫₀^{1−ρ} ψ^{-1/q})^{-1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoRule {
    /// `h = (h₁h₂)^{1/2}`; both `h₁/ε` and `ε/h₂` vanish as `ε → 0`.
    #[default]
    GeometricMean,
    /// `h = h₁h₂`; here `h₁/ε = 1/h₂` grows without bound.
    Product,
}

fn exponent_ratio(phase: &PhaseParams) -> f64 {
    phase.psi.m / phase.q
}

fn scale(phase: &PhaseParams) -> f64 {
    (phase.gamma * phase.q / conjugate(phase.q)).powf(1.0 / phase.q)
}

/// `∫₀^z ψ^{-1/q}` in closed form.
pub fn psi_inv_integral(phase: &PhaseParams, z: f64) -> f64 {
    let r = exponent_ratio(phase);
    let c = phase.psi.psi0.powf(-1.0 / phase.q);
    if z >= 1.0 {
        return if r < 1.0 {
            c / (1.0 - r)
        } else {
            f64::INFINITY
        };
    }
    if r == 1.0 {
        -c * (1.0 - z).ln()
    } else {
        c * (1.0 - (1.0 - z).powf(1.0 - r)) / (1.0 - r)
    }
}

/// `∫₀^z ψ^{-1/q}` by adaptive quadrature in the variable `y = −ln(1−s)`,
/// which removes the endpoint singularity.
pub fn psi_inv_integral_quadrature(phase: &PhaseParams, z: f64, tol: f64) -> f64 {
    inverse_integral_to(phase, -(-z).ln_1p(), tol)
}

/// Same integral up to `s = 1 − e^{−y_max}`.
fn inverse_integral_to(phase: &PhaseParams, ymax: f64, tol: f64) -> f64 {
    let inv_q = 1.0 / phase.q;
    integrate(
        |y: f64| {
            let r = (-y).exp();
            phase.psi.eval_below_one(r).powf(-inv_q) * r
        },
        0.0,
        ymax,
        tol,
    )
}

pub fn h1(phase: &PhaseParams, rho: f64) -> f64 {
    phase.psi.eval(1.0 - rho)
}

/// `h₂` by quadrature.
pub fn h2(phase: &PhaseParams, rho: f64) -> f64 {
    1.0 / inverse_integral_to(phase, -rho.ln(), 1e-13)
}

/// `h₂` in closed form.
pub fn h2_closed(phase: &PhaseParams, rho: f64) -> f64 {
    let r = exponent_ratio(phase);
    let c = phase.psi.psi0.powf(-1.0 / phase.q);
    let integral = if r == 1.0 {
        -c * rho.ln()
    } else {
        c * (1.0 - rho.powf(1.0 - r)) / (1.0 - r)
    };
    1.0 / integral
}

pub fn h_of_rho(phase: &PhaseParams, rho: f64, rule: RhoRule) -> f64 {
    let (a, b) = (h1(phase, rho), h2(phase, rho));
    match rule {
        RhoRule::GeometricMean => (a * b).sqrt(),
        RhoRule::Product => a * b,
    }
}

/// `ρ = h^{-1}(ε)` by bisection in `log ρ`.
pub fn rho_of_eps(phase: &PhaseParams, eps: f64, rule: RhoRule) -> Result<f64> {
    phase.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("eps", "must be positive"));
    }
    let (mut lo, mut hi) = (1e-30f64.ln(), (1.0 - 1e-15f64).ln());
    let h = |lr: f64| h_of_rho(phase, lr.exp(), rule);
    if h(hi) <= eps {
        return Err(Error::OutOfRange(format!(
            "eps = {eps} is not below h(1-) = {}",
            h(hi)
        )));
    }
    if h(lo) >= eps {
        return Err(Error::OutOfRange(format!("eps = {eps} is below h(1e-30)")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Right-hand side `(q'/(γq))^{1/q} ε^{-1} ψ^{1/q}(w)`.
pub fn profile_rhs(phase: &PhaseParams, eps: f64, w: f64) -> f64 {
    phase.psi.eval(w).powf(1.0 / phase.q) / (scale(phase) * eps)
}

/// `Z(z)`, the time at which the profile reaches `z`.
pub fn time_to_reach(phase: &PhaseParams, eps: f64, z: f64) -> f64 {
    scale(phase) * eps * psi_inv_integral(phase, z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSolution {
    pub eps: f64,
    pub phase: PhaseParams,
    /// Time at which `w` reaches 1; `None` when it only does so asymptotically.
    pub horizon: Option<f64>,
    pub rho: f64,
    pub tau: f64,
    pub t_end: f64,
    step: f64,
    w: Vec<f64>,
    dw: Vec<f64>,
}

/// Inverse of `Z` on `[0, 1)` by monotone bisection.
fn invert(phase: &PhaseParams, eps: f64, t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if time_to_reach(phase, eps, mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * 0.5 {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn optimal_profile(phase: &PhaseParams, eps: f64, rule: RhoRule) -> Result<ProfileSolution> {
    let rho = rho_of_eps(phase, eps, rule)?;
    let r = exponent_ratio(phase);
    let horizon = (r < 1.0).then(|| time_to_reach(phase, eps, 1.0));
    let tau = time_to_reach(phase, eps, 1.0 - rho);
    let mut t_end = time_to_reach(phase, eps, 1.0 - 1e-12).max(tau);
    if let Some(t) = horizon {
        t_end = t_end.min(t);
    }
    let step = t_end / TABLE_INTERVALS as f64;
    let mut w = Vec::with_capacity(TABLE_INTERVALS + 1);
    let mut dw = Vec::with_capacity(TABLE_INTERVALS + 1);
    for i in 0..=TABLE_INTERVALS {
        let wi = if i == 0 {
            0.0
        } else {
            invert(phase, eps, i as f64 * step)
        };
        w.push(wi);
        dw.push(profile_rhs(phase, eps, wi));
    }
    Ok(ProfileSolution {
        eps,
        phase: *phase,
        horizon,
        rho,
        tau,
        t_end,
        step,
        w,
        dw,
    })
}

impl ProfileSolution {
    /// `w(t)` by monotone cubic Hermite interpolation of the table.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.t_end {
            return match self.horizon {
                Some(h) if t >= h => 1.0,
                _ => invert(&self.phase, self.eps, t),
            };
        }
        let s = t / self.step;
        let i = (s.floor() as usize).min(TABLE_INTERVALS - 1);
        let x = s - i as f64;
        let (y0, y1) = (self.w[i], self.w[i + 1]);
        let delta = (y1 - y0) / self.step;
        let (mut d0, mut d1) = (self.dw[i], self.dw[i + 1]);
        if delta == 0.0 {
            d0 = 0.0;
            d1 = 0.0;
        } else {
            // Fritsch–Carlson limiter.
            let (a, b) = (d0 / delta, d1 / delta);
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let k = 3.0 / r2.sqrt();
                d0 = k * a * delta;
                d1 = k * b * delta;
            }
        }
        let h = self.step;
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * y0
            + (x3 - 2.0 * x2 + x) * h * d0
            + (-2.0 * x3 + 3.0 * x2) * y1
            + (x3 - x2) * h * d1
    }

    /// `w'(t)` from the differential equation.
    pub fn derivative(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        profile_rhs(&self.phase, self.eps, self.eval(t))
    }

    pub fn table(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..=TABLE_INTERVALS).map(move |i| (i as f64 * self.step, self.w[i], self.dw[i]))
    }

    /// `max ε |Δw/Δt − rhs(w)|` over interior table points with centered
    /// differences.
    pub fn ode_residual(&self) -> f64 {
        (1..TABLE_INTERVALS)
            .map(|i| {
                let fd = (self.w[i + 1] - self.w[i - 1]) / (2.0 * self.step);
                self.eps * (fd - self.dw[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |α^q − β^{q'}|` with `α = (γqε^{q−1}w'^q)^{1/q}` and
    /// `β = (q'ψ(w)/ε)^{1/q'}` along the table.
    pub fn young_residual(&self) -> f64 {
        let (g, q) = (self.phase.gamma, self.phase.q);
        let qc = conjugate(q);
        self.table()
            .map(|(_, w, dw)| {
                let alpha_q = g * q * self.eps.powf(q - 1.0) * dw.powf(q);
                let beta_qc = qc * self.phase.psi.eval(w) / self.eps;
                (alpha_q - beta_qc).abs() * self.eps
            })
            .fold(0.0, f64::max)
    }

    /// `max |ψ(w)/ε + γε^{q−1}w'^q − (q')^{1/q'}(γq)^{1/q} ψ^{1/q'}(w) w'|`,
    /// scaled by `ε`.
    pub fn calibration_residual(&self) -> f64 {
        let (g, q) = (self.phase.gamma, self.phase.q);
        let qc = conjugate(q);
        let k = qc.powf(1.0 / qc) * (g * q).powf(1.0 / q);
        self.table()
            .map(|(_, w, dw)| {
                let psi = self.phase.psi.eval(w);
                let lhs = psi / self.eps + g * self.eps.powf(q - 1.0) * dw.powf(q);
                let rhs = k * psi.powf(1.0 / qc) * dw;
                (lhs - rhs).abs() * self.eps
            })
            .fold(0.0, f64::max)
    }
}
