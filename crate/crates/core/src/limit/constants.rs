use serde::{Deserialize, Serialize};

use crate::energy::{EpsParams, PsiSpec};
use crate::error::{invalid, Result};
use crate::quadrature::integrate;

/// The `ε`-independent parameters of the phase-field terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub gamma: f64,
    pub q: f64,
    pub psi: PsiSpec,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            q: 2.0,
            psi: PsiSpec::default(),
        }
    }
}

impl PhaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(invalid("q", "must exceed 1"));
        }
        self.psi.validate()
    }
}

impl From<&EpsParams> for PhaseParams {
    fn from(p: &EpsParams) -> Self {
        Self {
            gamma: p.gamma,
            q: p.q,
            psi: p.psi,
        }
    }
}

/// Hölder conjugate `p/(p−1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub a: f64,
    pub b: f64,
}

/// `∫₀¹ ψ^{1/q'}` in closed form.
pub fn psi_root_integral(phase: &PhaseParams) -> f64 {
    let qc = conjugate(phase.q);
    phase.psi.psi0.powf(1.0 / qc) / (phase.psi.m / qc + 1.0)
}

/// `∫₀¹ ψ^{1/q'}` by adaptive quadrature.
pub fn psi_root_integral_quadrature(phase: &PhaseParams, tol: f64) -> f64 {
    let e = 1.0 / conjugate(phase.q);
    integrate(|s| phase.psi.eval(s).powf(e), 0.0, 1.0, tol)
}

fn assemble(phase: &PhaseParams, p: f64, integral: f64) -> LimitConstants {
    let (q, pc, qc) = (phase.q, conjugate(p), conjugate(phase.q));
    let a = 2.0 * qc.powf(1.0 / qc) * (phase.gamma * q).powf(1.0 / q) * integral;
    let b = p.powf(1.0 / p) * pc.powf(1.0 / pc) * phase.psi.at_zero().powf(1.0 / p);
    LimitConstants { a, b }
}

/// Surface activation `a` and cohesive slope `b` of the limit energy.
pub fn limit_constants(phase: &PhaseParams, p: f64) -> Result<LimitConstants> {
    phase.validate()?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", "must exceed 1"));
    }
    Ok(assemble(phase, p, psi_root_integral(phase)))
}

/// Same constants with the `ψ` integral computed by quadrature.
pub fn limit_constants_quadrature(phase: &PhaseParams, p: f64, tol: f64) -> Result<LimitConstants> {
    limit_constants(phase, p)?;
    Ok(assemble(phase, p, psi_root_integral_quadrature(phase, tol)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constants() {
        let c = limit_constants(&PhaseParams::default(), 2.0).unwrap();
        assert!((c.a - 2.0).abs() < 1e-14 && (c.b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneity_in_psi0() {
        for (q, m, p) in [(2.0, 2.0, 2.0), (3.0, 1.5, 2.5), (1.5, 4.0, 3.0)] {
            let base = PhaseParams {
                gamma: 0.7,
                q,
                psi: PsiSpec::new(1.0, m).unwrap(),
            };
            let scaled = PhaseParams {
                psi: PsiSpec::new(4.0, m).unwrap(),
                ..base
            };
            let c0 = limit_constants(&base, p).unwrap();
            let c1 = limit_constants(&scaled, p).unwrap();
            assert!((c1.a / c0.a - 4f64.powf(1.0 / conjugate(q))).abs() < 1e-13);
            assert!((c1.b / c0.b - 4f64.powf(1.0 / p)).abs() < 1e-13);
        }
    }

    #[test]
    fn gamma_scaling_and_p_near_one() {
        let four = PhaseParams {
            gamma: 4.0,
            ..Default::default()
        };
        let a4 = limit_constants(&four, 2.0).unwrap().a;
        assert!((a4 - 4.0).abs() < 1e-13);
        let b = limit_constants(&PhaseParams::default(), 1.01).unwrap().b;
        let expected = 1.01f64.powf(1.0 / 1.01) * 101f64.powf(1.0 / 101.0);
        assert!((b - expected).abs() < 1e-14);
        assert!(limit_constants(&PhaseParams::default(), 1.0).is_err());
    }

    #[test]
    fn quadrature_cross_check() {
        for m in [1.0, 1.5, 2.0, 3.0, 5.0] {
            for q in [1.5, 2.0, 3.0] {
                let phase = PhaseParams {
                    gamma: 1.3,
                    q,
                    psi: PsiSpec::new(2.0, m).unwrap(),
                };
                let closed = psi_root_integral(&phase);
                let quad = psi_root_integral_quadrature(&phase, 1e-14);
                assert!((closed - quad).abs() < 1e-12, "m={m} q={q}");
            }
        }
    }
}
