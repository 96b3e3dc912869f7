//! Discrete phase-field energy on Q1 box grids.
//!
//! Every term uses one-point quadrature at the cell center; the `v` prefactors
//! and `ψ(v)` use the average of the cell corners. All cell sums go through a
//! fixed pairwise tree and nodal gathers visit adjacent cells in a fixed order,
//! so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{BulkDensity, POWER_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridField};
use crate::operator::FirstOrderOperator;
use crate::sym::{SymCoords, SymMat, MAX_DIM};

/// `ψ(v) = ψ₀ (1 − v)^m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub psi0: f64,
    pub m: f64,
}

impl Default for PsiSpec {
    fn default() -> Self {
        Self { psi0: 1.0, m: 2.0 }
    }
}

impl PsiSpec {
    pub fn new(psi0: f64, m: f64) -> Result<Self> {
        let s = Self { psi0, m };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi0 > 0.0 && self.psi0.is_finite()) {
            return Err(invalid(
                "psi0",
                format!("must be positive, got {}", self.psi0),
            ));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(invalid("m", format!("must be at least 1, got {}", self.m)));
        }
        Ok(())
    }

    pub fn eval(&self, v: f64) -> f64 {
        let r = (1.0 - v).max(0.0);
        if self.m == 2.0 {
            self.psi0 * r * r
        } else {
            self.psi0 * r.powf(self.m)
        }
    }

    /// `ψ(1 − r)`, free of cancellation for small `r`.
    pub fn eval_below_one(&self, r: f64) -> f64 {
        self.psi0 * r.max(0.0).powf(self.m)
    }

    pub fn deriv(&self, v: f64) -> f64 {
        let r = (1.0 - v).max(0.0);
        if self.m == 2.0 {
            -2.0 * self.psi0 * r
        } else {
            -self.m * self.psi0 * r.powf(self.m - 1.0)
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.psi0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsParams {
    pub eps: f64,
    pub eta: f64,
    pub gamma: f64,
    pub q: f64,
    pub psi: PsiSpec,
}

impl EpsParams {
    /// Uses the default schedule `η = ε^p`.
    pub fn new(eps: f64, p: f64, gamma: f64, q: f64, psi: PsiSpec) -> Result<Self> {
        Self::with_eta(eps, eps.powf(p), gamma, q, psi)
    }

    pub fn with_eta(eps: f64, eta: f64, gamma: f64, q: f64, psi: PsiSpec) -> Result<Self> {
        let s = Self {
            eps,
            eta,
            gamma,
            q,
            psi,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(
                "eps",
                format!("must be positive, got {}", self.eps),
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(
                "eta",
                format!("must be positive, got {}", self.eta),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid(
                "gamma",
                format!("must be positive, got {}", self.gamma),
            ));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(invalid("q", format!("must exceed 1, got {}", self.q)));
        }
        self.psi.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub term_a: f64,
    pub term_rest: f64,
    pub term_psi: f64,
    pub term_gradv: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn from_terms(term_a: f64, term_rest: f64, term_psi: f64, term_gradv: f64) -> Self {
        Self {
            term_a,
            term_rest,
            term_psi,
            term_gradv,
            total: term_a + term_rest + term_psi + term_gradv,
        }
    }

    /// Deterministic column sums of per-cell `[A, rest, ψ, ∇v]` terms.
    pub fn sum_cells(terms: &[[f64; 4]]) -> Self {
        let col = |k: usize| pairwise_sum(&terms.iter().map(|t| t[k]).collect::<Vec<_>>());
        Self::from_terms(col(0), col(1), col(2), col(3))
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublevelDiagnostics {
    /// `∫|𝔸u|`.
    pub a_variation: f64,
    /// `∫ψ(v)`.
    pub psi_mass: f64,
    pub energy: f64,
}

/// Sum by a fixed binary tree; the split points depend only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    const PAR: usize = 1 << 14;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    if xs.len() >= PAR {
        let (a, b) = rayon::join(|| pairwise_sum(l), || pairwise_sum(r));
        a + b
    } else {
        pairwise_sum(l) + pairwise_sum(r)
    }
}

/// Cellwise bulk densities `(f(𝔸u), f(e(u) − 𝔸u))`.
pub type CellBulk = Vec<[f64; 2]>;

/// The discrete functional for a fixed grid, operator, density and `ε`.
#[derive(Clone, Copy, Debug)]
pub struct Functional<'a> {
    pub grid: &'a Grid,
    pub params: &'a EpsParams,
    pub op: &'a FirstOrderOperator,
    pub density: &'a BulkDensity,
}

impl<'a> Functional<'a> {
    pub fn new(
        grid: &'a Grid,
        params: &'a EpsParams,
        op: &'a FirstOrderOperator,
        density: &'a BulkDensity,
    ) -> Result<Self> {
        let n = grid.dim();
        if op.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: op.dim(),
            });
        }
        if density.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: density.dim(),
            });
        }
        params.validate()?;
        Ok(Self {
            grid,
            params,
            op,
            density,
        })
    }

    fn floor_a(&self) -> f64 {
        self.params.eps.powf(self.density.p - 1.0)
    }

    fn corner_avg(&self, v: &[f64], nodes: &[usize; 8]) -> f64 {
        let k = self.grid.corners();
        nodes[..k].iter().map(|&i| v[i]).sum::<f64>() / k as f64
    }

    fn cell_grad_u(&self, u: &[f64], nodes: &[usize; 8]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let n = self.grid.dim();
        let mut g = [[0.0; MAX_DIM]; MAX_DIM];
        for (corner, &node) in nodes[..self.grid.corners()].iter().enumerate() {
            let gs = self.grid.grad_shape(corner);
            for (i, row) in g.iter_mut().enumerate().take(n) {
                let ui = u[node * n + i];
                for b in 0..n {
                    row[b] += ui * gs[b];
                }
            }
        }
        g
    }

    fn cell_grad_v(&self, v: &[f64], nodes: &[usize; 8]) -> [f64; MAX_DIM] {
        let n = self.grid.dim();
        let mut g = [0.0; MAX_DIM];
        for (corner, &node) in nodes[..self.grid.corners()].iter().enumerate() {
            let gs = self.grid.grad_shape(corner);
            for b in 0..n {
                g[b] += v[node] * gs[b];
            }
        }
        g
    }

    fn cell_strain_coords(&self, u: &[f64], cell: usize) -> SymCoords {
        let nodes = self.grid.cell_nodes(cell);
        SymMat::sym_part(self.grid.dim(), &self.cell_grad_u(u, &nodes)).coords()
    }

    /// Cell-center strains `e(u)`.
    pub fn strain(&self, u: &[f64]) -> Vec<SymMat> {
        (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| self.cell_strain_coords(u, c).to_matrix())
            .collect()
    }

    pub fn cell_bulk(&self, u: &[f64]) -> CellBulk {
        (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let e = self.cell_strain_coords(u, c);
                let au = self.op.apply_coords(&e);
                [
                    self.density.eval_coords(&au),
                    self.density.eval_coords(&(e - au)),
                ]
            })
            .collect()
    }

    fn grad_v_power(&self, g: &[f64; MAX_DIM]) -> (f64, f64) {
        let n = self.grid.dim();
        let sq: f64 = g[..n].iter().map(|x| x * x).sum();
        let q = self.params.q;
        if q == 2.0 {
            (sq, 2.0)
        } else {
            let norm = sq.sqrt();
            (norm.powf(q), q * sq.max(POWER_FLOOR).powf(0.5 * q - 1.0))
        }
    }

    /// Per-cell contributions `[A, rest, ψ, ∇v]`.
    pub fn cell_terms(&self, bulk: &[[f64; 2]], v: &[f64]) -> Vec<[f64; 4]> {
        let vol = self.grid.cell_volume();
        let p = self.params;
        let floor_a = self.floor_a();
        let kgrad = p.gamma * p.eps.powf(p.q - 1.0);
        (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let nodes = self.grid.cell_nodes(c);
                let vbar = self.corner_avg(v, &nodes);
                let gv = self.cell_grad_v(v, &nodes);
                [
                    vol * (vbar + floor_a) * bulk[c][0],
                    vol * (vbar + p.eta) * bulk[c][1],
                    vol * p.psi.eval(vbar) / p.eps,
                    vol * kgrad * self.grad_v_power(&gv).0,
                ]
            })
            .collect()
    }

    /// Energy with precomputed bulk densities.
    pub fn energy_cached(&self, bulk: &[[f64; 2]], v: &[f64]) -> EnergyBreakdown {
        EnergyBreakdown::sum_cells(&self.cell_terms(bulk, v))
    }

    pub fn energy(&self, field: &GridField) -> EnergyBreakdown {
        self.energy_cached(&self.cell_bulk(&field.u), &field.v)
    }

    pub fn total(&self, u: &[f64], v: &[f64]) -> f64 {
        self.energy_cached(&self.cell_bulk(u), v).total
    }

    fn gather(&self, per_cell: &[[f64; 8 * MAX_DIM]], comps: usize, pinned: &[bool]) -> Vec<f64> {
        let grid = self.grid;
        let mut out = vec![0.0; grid.n_nodes() * comps];
        out.par_chunks_mut(comps)
            .enumerate()
            .for_each(|(node, slot)| {
                if pinned[node] {
                    return;
                }
                for (cell, corner) in grid.node_cells(node) {
                    for (i, s) in slot.iter_mut().enumerate() {
                        *s += per_cell[cell][corner * comps + i];
                    }
                }
            });
        out
    }

    /// Exact gradient of the discrete energy with respect to nodal `u`,
    /// zero on `pinned` nodes.
    pub fn gradient_u_raw(&self, u: &[f64], v: &[f64], pinned: &[bool]) -> Vec<f64> {
        let n = self.grid.dim();
        let vol = self.grid.cell_volume();
        let floor_a = self.floor_a();
        let eta = self.params.eta;
        let per_cell: Vec<[f64; 8 * MAX_DIM]> = (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let nodes = self.grid.cell_nodes(c);
                let vbar = self.corner_avg(v, &nodes);
                let e = SymMat::sym_part(n, &self.cell_grad_u(u, &nodes)).coords();
                let au = self.op.apply_coords(&e);
                let (_, ga) = self.density.eval_grad_coords(&au);
                let (_, gr) = self.density.eval_grad_coords(&(e - au));
                let ta = self.op.apply_transpose_coords(&ga);
                let tr = gr - self.op.apply_transpose_coords(&gr);
                let mut s = ta.scaled(vbar + floor_a);
                s.add_scaled(vbar + eta, &tr);
                let sm = s.to_matrix();
                let mut out = [0.0; 8 * MAX_DIM];
                for corner in 0..self.grid.corners() {
                    let gs = self.grid.grad_shape(corner);
                    for i in 0..n {
                        let mut acc = 0.0;
                        for b in 0..n {
                            acc += sm.m[i][b] * gs[b];
                        }
                        out[corner * n + i] = vol * acc;
                    }
                }
                out
            })
            .collect();
        self.gather(&per_cell, n, pinned)
    }

    pub fn gradient_u(&self, field: &GridField) -> Vec<f64> {
        self.gradient_u_raw(&field.u, &field.v, &field.u_pinned)
    }

    /// Gradient with respect to nodal `v` given cached bulk densities.
    pub fn gradient_v_cached(&self, bulk: &[[f64; 2]], v: &[f64], pinned: &[bool]) -> Vec<f64> {
        let n = self.grid.dim();
        let k = self.grid.corners();
        let vol = self.grid.cell_volume();
        let p = self.params;
        let kgrad = p.gamma * p.eps.powf(p.q - 1.0);
        let per_cell: Vec<[f64; 8 * MAX_DIM]> = (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let nodes = self.grid.cell_nodes(c);
                let vbar = self.corner_avg(v, &nodes);
                let gv = self.cell_grad_v(v, &nodes);
                let (_, dpow) = self.grad_v_power(&gv);
                let share = vol * (bulk[c][0] + bulk[c][1] + p.psi.deriv(vbar) / p.eps) / k as f64;
                let mut out = [0.0; 8 * MAX_DIM];
                for (corner, slot) in out.iter_mut().enumerate().take(k) {
                    let gs = self.grid.grad_shape(corner);
                    let dot: f64 = (0..n).map(|b| gv[b] * gs[b]).sum();
                    *slot = share + vol * kgrad * dpow * dot;
                }
                out
            })
            .collect();
        self.gather(&per_cell, 1, pinned)
    }

    pub fn gradient_v(&self, field: &GridField) -> Vec<f64> {
        self.gradient_v_cached(&self.cell_bulk(&field.u), &field.v, &field.v_pinned)
    }

    /// Jacobi approximation of the `u`-Hessian diagonal, exact for `p = 2`.
    pub fn u_hessian_diag(&self, u: &[f64], v: &[f64], pinned: &[bool]) -> Vec<f64> {
        let n = self.grid.dim();
        let vol = self.grid.cell_volume();
        let floor_a = self.floor_a();
        let eta = self.params.eta;
        let hooke = &self.density.hooke;
        // Strain coordinates of a unit displacement of one corner component.
        let mut unit = [[SymCoords::zeros(n); MAX_DIM]; 8];
        for (corner, row) in unit.iter_mut().enumerate().take(self.grid.corners()) {
            let gs = self.grid.grad_shape(corner);
            for (i, slot) in row.iter_mut().enumerate().take(n) {
                let mut g = [[0.0; MAX_DIM]; MAX_DIM];
                g[i][..n].copy_from_slice(&gs[..n]);
                *slot = SymMat::sym_part(n, &g).coords();
            }
        }
        let per_cell: Vec<[f64; 8 * MAX_DIM]> = (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let nodes = self.grid.cell_nodes(c);
                let vbar = self.corner_avg(v, &nodes);
                let e = SymMat::sym_part(n, &self.cell_grad_u(u, &nodes)).coords();
                let au = self.op.apply_coords(&e);
                let ka = (vbar + floor_a) * self.density.secant_factor(&au);
                let kr = (vbar + eta) * self.density.secant_factor(&(e - au));
                let mut out = [0.0; 8 * MAX_DIM];
                for corner in 0..self.grid.corners() {
                    for i in 0..n {
                        let d = unit[corner][i];
                        let ad = self.op.apply_coords(&d);
                        out[corner * n + i] =
                            vol * (ka * hooke.quad(&ad) + kr * hooke.quad(&(d - ad)));
                    }
                }
                out
            })
            .collect();
        let mut diag = self.gather(&per_cell, n, pinned);
        for (node, &pin) in pinned.iter().enumerate() {
            if pin {
                diag[node * n..node * n + n]
                    .iter_mut()
                    .for_each(|d| *d = 1.0);
            }
        }
        diag
    }

    /// The `v`-energy at fixed `u` is quadratic when `q = m = 2`.
    pub fn v_is_quadratic(&self) -> bool {
        self.params.q == 2.0 && self.params.psi.m == 2.0
    }

    /// Hessian-vector product of the quadratic `v`-energy (`q = m = 2`).
    pub fn v_hessian_apply(&self, d: &[f64], pinned: &[bool]) -> Vec<f64> {
        let n = self.grid.dim();
        let k = self.grid.corners();
        let vol = self.grid.cell_volume();
        let p = self.params;
        let cpsi = 2.0 * p.psi.psi0 / p.eps;
        let cgrad = 2.0 * p.gamma * p.eps;
        let per_cell: Vec<[f64; 8 * MAX_DIM]> = (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let nodes = self.grid.cell_nodes(c);
                let dbar = self.corner_avg(d, &nodes);
                let gd = self.cell_grad_v(d, &nodes);
                let mut out = [0.0; 8 * MAX_DIM];
                for (corner, slot) in out.iter_mut().enumerate().take(k) {
                    let gs = self.grid.grad_shape(corner);
                    let dot: f64 = (0..n).map(|b| gd[b] * gs[b]).sum();
                    *slot = vol * (cpsi * dbar / k as f64 + cgrad * dot);
                }
                out
            })
            .collect();
        self.gather(&per_cell, 1, pinned)
    }

    /// Diagonal of [`Self::v_hessian_apply`], 1 on pinned nodes.
    pub fn v_hessian_diag(&self, pinned: &[bool]) -> Vec<f64> {
        let n = self.grid.dim();
        let k = self.grid.corners();
        let vol = self.grid.cell_volume();
        let p = self.params;
        let mut local = [0.0; 8 * MAX_DIM];
        for (corner, slot) in local.iter_mut().enumerate().take(k) {
            let gs = self.grid.grad_shape(corner);
            let g2: f64 = gs[..n].iter().map(|x| x * x).sum();
            *slot = vol * (2.0 * p.psi.psi0 / p.eps / (k * k) as f64 + 2.0 * p.gamma * p.eps * g2);
        }
        let per_cell = vec![local; self.grid.n_cells()];
        let mut diag = self.gather(&per_cell, 1, pinned);
        for (d, &pin) in diag.iter_mut().zip(pinned) {
            if pin {
                *d = 1.0;
            }
        }
        diag
    }

    pub fn sublevel_diagnostics(&self, field: &GridField) -> SublevelDiagnostics {
        let vol = self.grid.cell_volume();
        let parts: Vec<[f64; 2]> = (0..self.grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let e = self.cell_strain_coords(&field.u, c);
                let nodes = self.grid.cell_nodes(c);
                let vbar = self.corner_avg(&field.v, &nodes);
                [
                    vol * self.op.apply_coords(&e).norm(),
                    vol * self.params.psi.eval(vbar),
                ]
            })
            .collect();
        let a_variation = pairwise_sum(&parts.iter().map(|x| x[0]).collect::<Vec<_>>());
        let psi_mass = pairwise_sum(&parts.iter().map(|x| x[1]).collect::<Vec<_>>());
        SublevelDiagnostics {
            a_variation,
            psi_mass,
            energy: self.energy(field).total,
        }
    }

    /// Dual norm `(Σ g_a² / m_a)^{1/2}` with lumped nodal volumes `m_a`.
    pub fn dual_norm(&self, g: &[f64], comps: usize, lumped: &[f64]) -> f64 {
        let terms: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(i, x)| x * x / lumped[i / comps])
            .collect();
        pairwise_sum(&terms).sqrt()
    }
}

pub fn strain(
    grid: &Grid,
    op: &FirstOrderOperator,
    density: &BulkDensity,
    params: &EpsParams,
    u: &[f64],
) -> Result<Vec<SymMat>> {
    Ok(Functional::new(grid, params, op, density)?.strain(u))
}

pub fn assemble_energy(
    grid: &Grid,
    field: &GridField,
    params: &EpsParams,
    op: &FirstOrderOperator,
    density: &BulkDensity,
) -> Result<EnergyBreakdown> {
    field.check_grid(grid)?;
    Ok(Functional::new(grid, params, op, density)?.energy(field))
}

pub fn gradient_u(
    grid: &Grid,
    field: &GridField,
    params: &EpsParams,
    op: &FirstOrderOperator,
    density: &BulkDensity,
) -> Result<Vec<f64>> {
    field.check_grid(grid)?;
    Ok(Functional::new(grid, params, op, density)?.gradient_u(field))
}

pub fn gradient_v(
    grid: &Grid,
    field: &GridField,
    params: &EpsParams,
    op: &FirstOrderOperator,
    density: &BulkDensity,
) -> Result<Vec<f64>> {
    field.check_grid(grid)?;
    Ok(Functional::new(grid, params, op, density)?.gradient_v(field))
}

pub fn sublevel_diagnostics(
    grid: &Grid,
    field: &GridField,
    params: &EpsParams,
    op: &FirstOrderOperator,
    density: &BulkDensity,
) -> Result<SublevelDiagnostics> {
    field.check_grid(grid)?;
    Ok(Functional::new(grid, params, op, density)?.sublevel_diagnostics(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::QuadraticField;
    use crate::grid::{Face, Side};

    fn setup(dim: usize, cells: usize) -> (Grid, FirstOrderOperator, BulkDensity, EpsParams) {
        let grid = Grid::new(&vec![1.0; dim], &vec![cells; dim]).unwrap();
        let op = FirstOrderOperator::full_strain(dim).unwrap();
        let f = BulkDensity::linear_elastic(1.0, 0.0, dim).unwrap();
        let params = EpsParams::new(0.1, 2.0, 1.0, 2.0, PsiSpec::default()).unwrap();
        (grid, op, f, params)
    }

    fn sample(grid: &Grid, field: &QuadraticField) -> Vec<f64> {
        let n = grid.dim();
        let mut u = vec![0.0; grid.n_nodes() * n];
        for node in 0..grid.n_nodes() {
            let x = grid.node_coords(node);
            u[node * n..node * n + n].copy_from_slice(&field.eval(&x)[..n]);
        }
        u
    }

    #[test]
    fn affine_bar_energy() {
        let (grid, op, f, params) = setup(1, 10);
        let mut field = GridField::new(&grid);
        field.u = sample(&grid, &QuadraticField::affine(vec![vec![0.7]], &[0.0]));
        let e = Functional::new(&grid, &params, &op, &f)
            .unwrap()
            .energy(&field);
        assert!((e.term_a - 1.1 * 0.49 / 2.0).abs() < 1e-14);
        assert_eq!(e.term_rest, 0.0);
        assert_eq!(e.term_psi, 0.0);
        assert_eq!(e.term_gradv, 0.0);
    }

    #[test]
    fn rigid_motion_has_zero_energy_and_gradient() {
        let (grid, op, f, params) = setup(3, 3);
        let skew = vec![
            vec![0.0, 0.3, -0.2],
            vec![-0.3, 0.0, 0.5],
            vec![0.2, -0.5, 0.0],
        ];
        let mut field = GridField::new(&grid);
        field.u = sample(
            &grid,
            &QuadraticField::rigid(skew, &[1.0, 2.0, 3.0]).unwrap(),
        );
        let func = Functional::new(&grid, &params, &op, &f).unwrap();
        assert!(func.energy(&field).total.abs() < 1e-28);
        assert!(func.gradient_u(&field).iter().all(|g| g.abs() < 1e-14));
        assert!(func.gradient_v(&field).iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn broken_state_costs_psi_volume() {
        let (grid, op, f, params) = setup(2, 4);
        let mut field = GridField::new(&grid);
        field.v.iter_mut().for_each(|v| *v = 0.0);
        let e = Functional::new(&grid, &params, &op, &f)
            .unwrap()
            .energy(&field);
        assert!((e.total - 1.0 / 0.1).abs() < 1e-12);
    }

    #[test]
    fn quadratic_strain_at_centers() {
        let (grid, op, f, params) = setup(2, 8);
        let mut quad = QuadraticField::zero(2);
        quad.quadratic = vec![vec![vec![2.0, 0.0], vec![0.0, 0.0]], vec![vec![0.0; 2]; 2]];
        let u = sample(&grid, &quad);
        let func = Functional::new(&grid, &params, &op, &f).unwrap();
        for (c, e) in func.strain(&u).iter().enumerate() {
            let x = grid.cell_center(c);
            assert!((e.get(0, 0) - 2.0 * x[0]).abs() < 1e-12);
            assert!(e.get(0, 1).abs() < 1e-12 && e.get(1, 1).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_v_at_intact_state_is_bulk_share() {
        let (grid, op, f, params) = setup(1, 4);
        let mut field = GridField::new(&grid);
        field.u = sample(&grid, &QuadraticField::affine(vec![vec![0.5]], &[0.0]));
        let g = Functional::new(&grid, &params, &op, &f)
            .unwrap()
            .gradient_v(&field);
        let cell = 0.25 * 0.125 / 2.0;
        assert!((g[0] - cell).abs() < 1e-15);
        assert!((g[2] - 2.0 * cell).abs() < 1e-15);
    }

    #[test]
    fn pinned_entries_are_zero() {
        let (grid, op, f, params) = setup(2, 3);
        let mut field = GridField::new(&grid);
        field.u = sample(
            &grid,
            &QuadraticField::affine(vec![vec![0.1, 0.2], vec![0.3, -0.4]], &[0.0, 0.0]),
        );
        field.u_pinned.iter_mut().take(2).for_each(|p| *p = true);
        field.u_values = field.u.clone();
        field.pin_v(&grid, &[Face::new(0, Side::Min)]);
        let func = Functional::new(&grid, &params, &op, &f).unwrap();
        let gu = func.gradient_u(&field);
        assert_eq!(&gu[..4], &[0.0; 4]);
        let gv = func.gradient_v(&field);
        for node in grid.nodes_on_face(Face::new(0, Side::Min)) {
            assert_eq!(gv[node], 0.0);
        }
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let xs: Vec<f64> = (0..100_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4_999_950_000.0);
    }
}
