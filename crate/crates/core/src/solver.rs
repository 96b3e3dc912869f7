//! Alternating minimization and ε-continuation.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::density::BulkDensity;
use crate::energy::{
    pairwise_sum, EnergyBreakdown, EpsParams, Functional, PsiSpec, SublevelDiagnostics,
};
use crate::error::{invalid, Error, Result};
use crate::field::QuadraticField;
use crate::grid::{Face, Grid, GridField};
use crate::operator::FirstOrderOperator;
use crate::rng;
use crate::snapshot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_rel: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Dual-norm tolerance on subproblem gradients.
    pub inner_tol: f64,
    pub seed: u64,
    /// Use the linear solve for `p = 2`.
    pub exact_u: bool,
    /// Use the clipped linear solve for `q = m = 2`.
    pub exact_v: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_snapshot: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_rel: 1e-9,
            max_outer: 5000,
            max_inner: 5000,
            inner_tol: 1e-10,
            seed: 0,
            exact_u: true,
            exact_v: true,
            log_path: None,
            abort_snapshot: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0) {
            return Err(invalid("tol_rel", "must be positive"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(invalid("inner_tol", "must be positive"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid("max_outer", "iteration caps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InnerStats {
    pub iterations: usize,
    pub grad_norm: f64,
    pub energy_before: f64,
    pub energy_after: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iter: usize,
    pub energy: EnergyBreakdown,
    /// Energy after the `u` half-step.
    pub energy_after_u: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub inner_u: usize,
    pub inner_v: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveHistory {
    pub initial: EnergyBreakdown,
    pub records: Vec<OuterRecord>,
    pub converged: bool,
}

impl SolveHistory {
    pub fn final_energy(&self) -> EnergyBreakdown {
        self.records.last().map_or(self.initial, |r| r.energy)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,E_total,E_A,E_rest,E_psi,E_gradv,grad_u,grad_v\n");
        for r in &self.records {
            let e = &r.energy;
            writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.iter,
                e.total,
                e.term_a,
                e.term_rest,
                e.term_psi,
                e.term_gradv,
                r.grad_u,
                r.grad_v
            )
            .unwrap();
        }
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prod)
}

fn nonfinite(
    func: &Functional,
    field: &GridField,
    cfg: &SolverConfig,
    context: &str,
    last: f64,
) -> Error {
    if let Some(path) = &cfg.abort_snapshot {
        let _ = snapshot::save(path, func.grid, field);
    }
    Error::NonFinite {
        context: context.into(),
        last_energy: last,
    }
}

/// Preconditioned conjugate gradients for `H x = rhs`. Returns the solution,
/// the iteration count and the final residual norm.
fn pcg<F, N>(
    apply: F,
    rhs: &[f64],
    diag: &[f64],
    norm: N,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize, f64)
where
    F: Fn(&[f64]) -> Vec<f64>,
    N: Fn(&[f64]) -> f64,
{
    let mut x = vec![0.0; rhs.len()];
    let mut r = rhs.to_vec();
    let mut rn = norm(&r);
    let stop = tol.max(1e-14 * rn);
    if rn <= stop {
        return (x, 0, rn);
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let hp = apply(&p);
        let php = dot(&p, &hp);
        if !(php > 0.0) {
            return (x, it, rn);
        }
        let alpha = rz / php;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        rn = norm(&r);
        if rn <= stop {
            return (x, it, rn);
        }
        for i in 0..z.len() {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, max_iter, rn)
}

/// Minimizes over unpinned `u` at fixed `v`.
pub fn minimize_u(
    func: &Functional,
    field: &mut GridField,
    cfg: &SolverConfig,
) -> Result<InnerStats> {
    let n = func.grid.dim();
    let lumped = func.grid.lumped_mass();
    let norm = |g: &[f64]| func.dual_norm(g, n, &lumped);
    field.enforce_pins();
    let e0 = func.energy(field).total;
    if !e0.is_finite() {
        return Err(nonfinite(func, field, cfg, "minimize_u start", f64::NAN));
    }
    let g0 = func.gradient_u(field);
    let mut stats = InnerStats {
        iterations: 0,
        grad_norm: norm(&g0),
        energy_before: e0,
        energy_after: e0,
    };
    if stats.grad_norm <= cfg.inner_tol {
        return Ok(stats);
    }

    if func.density.p == 2.0 && cfg.exact_u {
        let v = &field.v;
        let pinned = &field.u_pinned;
        let diag = func.u_hessian_diag(&field.u, v, pinned);
        let rhs: Vec<f64> = g0.iter().map(|g| -g).collect();
        let (x, iters, _) = pcg(
            |d| func.gradient_u_raw(d, v, pinned),
            &rhs,
            &diag,
            norm,
            cfg.inner_tol,
            cfg.max_inner,
        );
        let mut trial = field.u.clone();
        trial.iter_mut().zip(&x).for_each(|(u, d)| *u += d);
        let e1 = func.total(&trial, &field.v);
        if !e1.is_finite() {
            return Err(nonfinite(func, field, cfg, "minimize_u linear solve", e0));
        }
        stats.iterations = iters;
        if e1 <= e0 {
            field.u = trial;
            field.enforce_pins();
            stats.energy_after = e1;
        }
        stats.grad_norm = norm(&func.gradient_u(field));
        return Ok(stats);
    }

    // Polak–Ribière+ with a Jacobi preconditioner and Armijo steps.
    let mut u = field.u.clone();
    let v = field.v.clone();
    let pinned = field.u_pinned.clone();
    let mut e = e0;
    let mut g = g0;
    let mut diag = func.u_hessian_diag(&u, &v, &pinned);
    let mut z: Vec<f64> = g.iter().zip(&diag).map(|(g, d)| g / d).collect();
    let mut d: Vec<f64> = z.iter().map(|z| -z).collect();
    let mut step = 1.0;
    for it in 1..=cfg.max_inner {
        stats.iterations = it;
        let mut gd = dot(&g, &d);
        if gd >= 0.0 {
            d = z.iter().map(|z| -z).collect();
            gd = dot(&g, &d);
        }
        let at = |t: f64| -> Vec<f64> { u.iter().zip(&d).map(|(u, d)| u + t * d).collect() };
        let phi = |t: f64| func.total(&at(t), &v);
        let dphi = |t: f64| dot(&func.gradient_u_raw(&at(t), &v, &pinned), &d);
        let Some((t, e_new)) = armijo(phi, dphi, e, gd, step, true) else {
            break;
        };
        if !e_new.is_finite() {
            return Err(nonfinite(func, field, cfg, "minimize_u line search", e));
        }
        step = (2.0 * t).min(1.0);
        u.iter_mut().zip(&d).for_each(|(u, d)| *u += t * d);
        e = e_new;
        let g_new = func.gradient_u_raw(&u, &v, &pinned);
        stats.grad_norm = norm(&g_new);
        if stats.grad_norm <= cfg.inner_tol {
            g = g_new;
            break;
        }
        if it % 20 == 0 {
            diag = func.u_hessian_diag(&u, &v, &pinned);
        }
        let z_new: Vec<f64> = g_new.iter().zip(&diag).map(|(g, d)| g / d).collect();
        let num: f64 = dot(&g_new, &z_new) - dot(&g_new, &z);
        let beta = (num / dot(&g, &z)).max(0.0);
        for i in 0..d.len() {
            d[i] = -z_new[i] + beta * d[i];
        }
        g = g_new;
        z = z_new;
    }
    let _ = g;
    field.u = u;
    field.enforce_pins();
    stats.energy_after = e;
    Ok(stats)
}

/// Backtracking from `t0`, optionally expanding when the first trial is
/// accepted. Returns the accepted step and its energy.
///
/// Once energy differences reach rounding level the sufficient-decrease test
/// is replaced by the approximate Wolfe test on the slope `dphi`.
fn armijo<F, D>(phi: F, dphi: D, e0: f64, slope: f64, t0: f64, expand: bool) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    const C1: f64 = 1e-4;
    if !(slope < 0.0) {
        return None;
    }
    let flat = 1e-12 * e0.abs().max(f64::MIN_POSITIVE);
    let accept = |t: f64, e: f64| {
        if e <= e0 + C1 * t * slope {
            return true;
        }
        if (e - e0).abs() <= flat {
            let d = dphi(t);
            return d >= 0.9 * slope && d <= -0.8 * slope;
        }
        false
    };
    let mut t = t0;
    let mut e = phi(t);
    let mut halvings = 0;
    while !accept(t, e) {
        t *= 0.5;
        halvings += 1;
        if halvings > 60 {
            return None;
        }
        e = phi(t);
    }
    if expand && halvings == 0 {
        for _ in 0..20 {
            let e2 = phi(2.0 * t);
            if e2 <= e0 + C1 * 2.0 * t * slope && e2 < e {
                t *= 2.0;
                e = e2;
            } else {
                break;
            }
        }
    }
    Some((t, e))
}

fn projected_gradient(g: &[f64], v: &[f64], pinned: &[bool]) -> Vec<f64> {
    g.iter()
        .zip(v)
        .zip(pinned)
        .map(|((&g, &v), &pin)| {
            if pin || (v <= 0.0 && g > 0.0) || (v >= 1.0 && g < 0.0) {
                0.0
            } else {
                g
            }
        })
        .collect()
}

/// Minimizes over unpinned `v ∈ [0,1]` at fixed `u`.
pub fn minimize_v(
    func: &Functional,
    field: &mut GridField,
    cfg: &SolverConfig,
) -> Result<InnerStats> {
    let lumped = func.grid.lumped_mass();
    let norm = |g: &[f64]| func.dual_norm(g, 1, &lumped);
    field.project_v();
    let bulk = func.cell_bulk(&field.u);
    let energy = |v: &[f64]| func.energy_cached(&bulk, v).total;
    let grad = |v: &[f64], pinned: &[bool]| func.gradient_v_cached(&bulk, v, pinned);
    let pinned = field.v_pinned.clone();

    let e0 = energy(&field.v);
    if !e0.is_finite() {
        return Err(nonfinite(func, field, cfg, "minimize_v start", f64::NAN));
    }
    let mut v = field.v.clone();
    let mut g = grad(&v, &pinned);
    let mut stats = InnerStats {
        iterations: 0,
        grad_norm: norm(&projected_gradient(&g, &v, &pinned)),
        energy_before: e0,
        energy_after: e0,
    };
    if stats.grad_norm <= cfg.inner_tol {
        return Ok(stats);
    }
    let mut e = e0;

    if func.v_is_quadratic() && cfg.exact_v {
        // Unconstrained solve, clip, fix the clipped set, re-solve, clip.
        let mut active = pinned.clone();
        for round in 0..2 {
            let diag = func.v_hessian_diag(&active);
            let rhs: Vec<f64> = grad(&v, &active).iter().map(|g| -g).collect();
            let (x, iters, _) = pcg(
                |d| func.v_hessian_apply(d, &active),
                &rhs,
                &diag,
                norm,
                0.1 * cfg.inner_tol,
                cfg.max_inner,
            );
            stats.iterations += iters;
            let mut trial = v.clone();
            for i in 0..trial.len() {
                if !active[i] {
                    trial[i] = (v[i] + x[i]).clamp(0.0, 1.0);
                    if round == 0 && (v[i] + x[i] < 0.0 || v[i] + x[i] > 1.0) {
                        active[i] = true;
                    }
                }
            }
            let e_trial = energy(&trial);
            if !e_trial.is_finite() {
                return Err(nonfinite(func, field, cfg, "minimize_v linear solve", e));
            }
            if e_trial <= e {
                v = trial;
                e = e_trial;
            }
        }
        g = grad(&v, &pinned);
    }

    // Spectral projected gradient with lumped-mass scaling.
    let mut alpha = 1.0;
    let budget = cfg.max_inner.saturating_sub(stats.iterations).max(1);
    for _ in 0..budget {
        let pg = projected_gradient(&g, &v, &pinned);
        stats.grad_norm = norm(&pg);
        if stats.grad_norm <= cfg.inner_tol {
            break;
        }
        stats.iterations += 1;
        let d: Vec<f64> = (0..v.len())
            .map(|i| {
                if pinned[i] {
                    0.0
                } else {
                    (v[i] - alpha * g[i] / lumped[i]).clamp(0.0, 1.0) - v[i]
                }
            })
            .collect();
        let gd = dot(&g, &d);
        let at = |t: f64| -> Vec<f64> {
            v.iter()
                .zip(&d)
                .map(|(v, d)| (v + t * d).clamp(0.0, 1.0))
                .collect()
        };
        let phi = |t: f64| energy(&at(t));
        let dphi = |t: f64| dot(&grad(&at(t), &pinned), &d);
        let Some((t, e_new)) = armijo(phi, dphi, e, gd, 1.0, false) else {
            break;
        };
        let v_new: Vec<f64> = v
            .iter()
            .zip(&d)
            .map(|(v, d)| (v + t * d).clamp(0.0, 1.0))
            .collect();
        if !e_new.is_finite() {
            return Err(nonfinite(
                func,
                field,
                cfg,
                "minimize_v projected gradient",
                e,
            ));
        }
        let g_new = grad(&v_new, &pinned);
        let (mut sms, mut sy) = (0.0, 0.0);
        for i in 0..v.len() {
            let s = v_new[i] - v[i];
            sms += s * s * lumped[i];
            sy += s * (g_new[i] - g[i]);
        }
        alpha = if sy > 0.0 {
            (sms / sy).clamp(1e-12, 1e12)
        } else {
            (alpha * 4.0).min(1e12)
        };
        v = v_new;
        g = g_new;
        e = e_new.min(e);
    }
    let e_final = energy(&v);
    if e_final <= e0 {
        field.v = v;
        stats.energy_after = e_final;
    }
    field.enforce_pins();
    Ok(stats)
}

/// Alternates the two subproblems until the relative energy change drops
/// below `tol_rel`.
pub fn alternate_minimize(
    func: &Functional,
    field0: &GridField,
    cfg: &SolverConfig,
) -> Result<(GridField, SolveHistory)> {
    cfg.validate()?;
    field0.check_grid(func.grid)?;
    let mut field = field0.clone();
    field.project_v();
    let initial = func.energy(&field);
    if !initial.is_finite() {
        return Err(nonfinite(func, &field, cfg, "initial state", f64::NAN));
    }
    let mut history = SolveHistory {
        initial,
        records: Vec::new(),
        converged: false,
    };
    let mut prev = initial.total;
    for iter in 1..=cfg.max_outer {
        let su = minimize_u(func, &mut field, cfg)?;
        let sv = minimize_v(func, &mut field, cfg)?;
        let energy = func.energy(&field);
        if !energy.is_finite() {
            return Err(nonfinite(func, &field, cfg, "outer iteration", prev));
        }
        let grad_u = func.dual_norm(
            &func.gradient_u(&field),
            func.grid.dim(),
            &func.grid.lumped_mass(),
        );
        history.records.push(OuterRecord {
            iter,
            energy,
            energy_after_u: su.energy_after,
            grad_u,
            grad_v: sv.grad_norm,
            inner_u: su.iterations,
            inner_v: sv.iterations,
        });
        if (energy.total - prev).abs() <= cfg.tol_rel * energy.total.max(1.0) {
            history.converged = true;
            break;
        }
        prev = energy.total;
    }
    if let Some(path) = &cfg.log_path {
        snapshot::write_atomic(path, history.to_csv().as_bytes())?;
    }
    Ok((field, history))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Initializer {
    /// Elastic `u` with `v ≡ 1`.
    Elastic,
    /// Elastic `u`, then `v = value` on the nodes within `half_width_eps·ε`
    /// (max-norm) of the domain center, or on the single node nearest the
    /// center when the half-width is zero.
    Notched {
        #[serde(default = "default_notch_value")]
        value: f64,
        #[serde(default)]
        half_width_eps: f64,
    },
    /// Elastic `u`, then `v = 1 − amplitude·U(0,1)` from the seeded stream.
    Perturbed { amplitude: f64 },
}

fn default_notch_value() -> f64 {
    0.5
}

impl Initializer {
    /// Single node at `v = 0.5`.
    pub fn notched() -> Self {
        Initializer::Notched {
            value: default_notch_value(),
            half_width_eps: 0.0,
        }
    }
}

/// Everything except `ε` and the grid resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub extents: Vec<f64>,
    pub op: FirstOrderOperator,
    pub density: BulkDensity,
    pub gamma: f64,
    pub q: f64,
    pub psi: PsiSpec,
    pub eta: EtaRule,
    pub u_faces: Vec<Face>,
    pub u_datum: QuadraticField,
    pub v_faces: Vec<Face>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EtaRule {
    /// `η = ε^p` with the density exponent.
    PowerP,
    Power {
        exponent: f64,
    },
    Fixed {
        value: f64,
    },
}

impl EtaRule {
    pub fn eta(&self, eps: f64, p: f64) -> f64 {
        match *self {
            EtaRule::PowerP => eps.powf(p),
            EtaRule::Power { exponent } => eps.powf(exponent),
            EtaRule::Fixed { value } => value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GridRule {
    Fixed {
        cells: Vec<usize>,
    },
    /// `ceil(L_i · cells_per_eps / ε)` cells per axis.
    PerEps {
        cells_per_eps: f64,
    },
}

impl GridRule {
    pub fn cells(&self, extents: &[f64], eps: f64) -> Result<Vec<usize>> {
        match self {
            GridRule::Fixed { cells } => Ok(cells.clone()),
            GridRule::PerEps { cells_per_eps } => {
                if !(*cells_per_eps > 0.0) {
                    return Err(invalid("cells_per_eps", "must be positive"));
                }
                Ok(extents
                    .iter()
                    .map(|l| ((l * cells_per_eps / eps) - 1e-9).ceil().max(1.0) as usize)
                    .collect())
            }
        }
    }
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        let n = self.extents.len();
        if self.op.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.op.dim(),
            });
        }
        if self.density.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.density.dim(),
            });
        }
        if self.u_datum.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.u_datum.dim(),
            });
        }
        if self.u_faces.is_empty() {
            return Err(invalid(
                "dirichlet",
                "at least one Dirichlet face is required for u",
            ));
        }
        if self
            .u_faces
            .iter()
            .chain(&self.v_faces)
            .any(|f| f.axis >= n)
        {
            return Err(invalid("dirichlet", "face axis exceeds the dimension"));
        }
        self.psi.validate()
    }

    pub fn params(&self, eps: f64) -> Result<EpsParams> {
        EpsParams::with_eta(
            eps,
            self.eta.eta(eps, self.density.p),
            self.gamma,
            self.q,
            self.psi,
        )
    }

    pub fn grid(&self, cells: &[usize]) -> Result<Grid> {
        Grid::new(&self.extents, cells)
    }

    /// Fresh field (`u ≡ 0`, `v ≡ 1`) with Dirichlet pins applied.
    pub fn field(&self, grid: &Grid) -> Result<GridField> {
        let mut f = GridField::new(grid);
        f.pin_u(grid, &self.u_faces, &self.u_datum)?;
        f.pin_v(grid, &self.v_faces);
        Ok(f)
    }
}

/// Builds the initial state for `init` on the pinned template `field`.
pub fn initialize(
    func: &Functional,
    field: &GridField,
    init: Initializer,
    cfg: &SolverConfig,
) -> Result<GridField> {
    let mut f = field.clone();
    f.v.iter_mut().for_each(|v| *v = 1.0);
    minimize_u(func, &mut f, cfg)?;
    match init {
        Initializer::Elastic => {}
        Initializer::Notched {
            value,
            half_width_eps,
        } => {
            if !(0.0..=1.0).contains(&value) || !(half_width_eps >= 0.0) {
                return Err(invalid(
                    "notch",
                    "value must lie in [0, 1] and the half-width be nonnegative",
                ));
            }
            let grid = func.grid;
            let center: Vec<f64> = grid.extents().iter().map(|l| 0.5 * l).collect();
            let reach = half_width_eps * func.params.eps * (1.0 + 1e-12);
            let mut nodes: Vec<usize> = (0..grid.n_nodes())
                .filter(|&node| {
                    let x = grid.node_coords(node);
                    center
                        .iter()
                        .enumerate()
                        .all(|(i, c)| (x[i] - c).abs() <= reach)
                })
                .collect();
            if nodes.is_empty() {
                let mid: Vec<usize> = grid.cells().iter().map(|c| c / 2).collect();
                nodes.push(grid.node_index(&mid));
            }
            for node in nodes {
                if !f.v_pinned[node] {
                    f.v[node] = value;
                }
            }
        }
        Initializer::Perturbed { amplitude } => {
            use rand::Rng;
            if !(0.0..=1.0).contains(&amplitude) {
                return Err(invalid("amplitude", "must lie in [0, 1]"));
            }
            let mut rng = rng::stream(cfg.seed, 20);
            for v in f.v.iter_mut() {
                *v = 1.0 - amplitude * rng.random::<f64>();
            }
        }
    }
    f.enforce_pins();
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid_rule: GridRule,
    pub initializer: Initializer,
    /// Second start solved at every `ε`; the lower branch is kept.
    pub restart: Option<Initializer>,
    /// Record wall-clock time per row; disable for byte-identical output.
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            grid_rule: GridRule::PerEps { cells_per_eps: 8.0 },
            initializer: Initializer::Elastic,
            restart: Some(Initializer::notched()),
            timing: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub eta: f64,
    pub cells: Vec<usize>,
    pub energy: EnergyBreakdown,
    pub diagnostics: SublevelDiagnostics,
    /// Final energy of the warm-started branch.
    pub warm_energy: f64,
    /// Final energy of the restart branch, when run.
    pub restart_energy: Option<f64>,
    pub outer_iterations: usize,
    pub runtime_s: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub grid: Grid,
    pub field: GridField,
}

/// ε-continuation: each entry starts from the previous minimizer
/// (prolongated to the new grid).
pub fn eps_sweep(
    problem: &Problem,
    eps_list: &[f64],
    opts: &SweepOptions,
    cfg: &SolverConfig,
) -> Result<SweepResult> {
    eps_sweep_with(problem, eps_list, opts, cfg, &mut |_| {})
}

/// [`eps_sweep`] calling `on_row` as soon as each row is final, so callers
/// can keep partial results when a later entry aborts.
pub fn eps_sweep_with(
    problem: &Problem,
    eps_list: &[f64],
    opts: &SweepOptions,
    cfg: &SolverConfig,
    on_row: &mut dyn FnMut(&SweepRow),
) -> Result<SweepResult> {
    problem.validate()?;
    cfg.validate()?;
    if eps_list.is_empty() {
        return Err(invalid("eps", "schedule is empty"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps", "schedule must be strictly decreasing"));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut prev: Option<(Grid, GridField)> = None;
    for &eps in eps_list {
        let start = Instant::now();
        let params = problem.params(eps)?;
        let grid = problem.grid(&opts.grid_rule.cells(&problem.extents, eps)?)?;
        let func = Functional::new(&grid, &params, &problem.op, &problem.density)?;
        let template = problem.field(&grid)?;
        let warm_start = match &prev {
            Some((pg, pf)) => {
                let mut f = template.clone();
                f.prolongate_from(&grid, pg, pf);
                f
            }
            None => initialize(&func, &template, opts.initializer, cfg)?,
        };
        let (mut best, hist) = alternate_minimize(&func, &warm_start, cfg)?;
        let warm_energy = hist.final_energy().total;
        let mut outer = hist.records.len();
        let mut restart_energy = None;
        if let Some(init) = opts.restart {
            let notched = initialize(&func, &template, init, cfg)?;
            let (f2, h2) = alternate_minimize(&func, &notched, cfg)?;
            let e2 = h2.final_energy().total;
            restart_energy = Some(e2);
            outer += h2.records.len();
            if e2 < warm_energy {
                best = f2;
            }
        }
        let energy = func.energy(&best);
        let diagnostics = func.sublevel_diagnostics(&best);
        let runtime_s = if opts.timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        rows.push(SweepRow {
            eps,
            eta: params.eta,
            cells: grid.cells().to_vec(),
            energy,
            diagnostics,
            warm_energy,
            restart_energy,
            outer_iterations: outer,
            runtime_s,
        });
        on_row(rows.last().expect("just pushed"));
        prev = Some((grid, best));
    }
    let (grid, field) = prev.expect("schedule is nonempty");
    Ok(SweepResult { rows, grid, field })
}
