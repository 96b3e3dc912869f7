//! Finite-difference checks of the analytic energy gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{pairwise_sum, Functional};
use crate::grid::GridField;
use crate::rng;

/// Central-difference step for directional derivatives.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub states: usize,
    /// Worst `|∇_u E − FD| / |∇_u E|` over the states.
    pub worst_u: f64,
    pub worst_v: f64,
}

impl GradientCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_u <= tol && self.worst_v <= tol
    }
}

/// `u ~ N(0, 0.3²)` per component, `v ~ U(0.05, 0.95)`, no pins.
pub fn random_state<R: Rng>(func: &Functional, rng: &mut R) -> GridField {
    let mut f = GridField::new(func.grid);
    for u in f.u.iter_mut() {
        *u = 0.3 * rng::gaussian(rng);
    }
    for v in f.v.iter_mut() {
        *v = rng.random_range(0.05..0.95);
    }
    f
}

fn rel_error(fd: &[f64], an: &[f64]) -> f64 {
    let diff: Vec<f64> = fd.iter().zip(an).map(|(a, b)| (a - b).powi(2)).collect();
    let scale: Vec<f64> = an.iter().map(|a| a * a).collect();
    (pairwise_sum(&diff) / pairwise_sum(&scale).max(1e-300)).sqrt()
}

/// Central differences of `energy` in every coordinate of `x`.
fn fd_gradient(x: &[f64], energy: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + FD_STEP;
            let plus = energy(&y);
            y[i] = x[i] - FD_STEP;
            let minus = energy(&y);
            y[i] = x[i];
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Compares both analytic gradients with componentwise central differences
/// on `states` random states; errors are relative in the Euclidean norm.
/// `corrupt` scales the analytic gradients and exists only to exercise the
/// failure path.
pub fn gradient_check(func: &Functional, states: usize, seed: u64, corrupt: f64) -> GradientCheck {
    let mut rng = rng::stream(seed, 40);
    let (mut worst_u, mut worst_v) = (0.0f64, 0.0f64);
    for _ in 0..states {
        let f = random_state(func, &mut rng);
        let free = vec![false; f.n_nodes()];

        let gu: Vec<f64> = func
            .gradient_u_raw(&f.u, &f.v, &free)
            .iter()
            .map(|g| corrupt * g)
            .collect();
        let fd_u = fd_gradient(&f.u, |u| func.total(u, &f.v));
        worst_u = worst_u.max(rel_error(&fd_u, &gu));

        let bulk = func.cell_bulk(&f.u);
        let gv: Vec<f64> = func
            .gradient_v_cached(&bulk, &f.v, &free)
            .iter()
            .map(|g| corrupt * g)
            .collect();
        let fd_v = fd_gradient(&f.v, |v| func.energy_cached(&bulk, v).total);
        worst_v = worst_v.max(rel_error(&fd_v, &gv));
    }
    GradientCheck {
        states,
        worst_u,
        worst_v,
    }
}
