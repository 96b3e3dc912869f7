//! Explicit recovery pairs `(u_ε, v_ε)` for jump templates and the limsup
//! table comparing their discrete energy with `D(u, 1)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::profile::{optimal_profile, ProfileSolution, RhoRule};
use super::template::{
    limit_energy, sigma_k, JumpTemplate, LimitEnergy, LimitModel, LimitQuadrature,
};
use crate::energy::{EnergyBreakdown, EpsParams, Functional};
use crate::error::{invalid, Error, Result};
use crate::grid::{Face, Grid, GridField, Side};
use crate::solver::EtaRule;
use crate::sym::MAX_DIM;

/// Tangential samples per axis used to bound `σ` over the jump support.
const SIGMA_SAMPLES: usize = 65;

/// Where a point sits in the recovery construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// Fully cracked layer `|x_n − c| < σ(x′)`.
    Core,
    /// Profile transition beside the layer.
    Transition,
    /// Profile around the edge of the jump set.
    Edge,
    Far,
}

/// `min σ` over columns where `σ > σ_max/2`, and `σ_max`.
///
/// Bumps drive `σ` to zero at their rim, so the plain minimum is useless as
/// a resolution target.
pub fn sigma_range(t: &JumpTemplate, model: &LimitModel, eps: f64) -> Option<(f64, f64)> {
    let n = t.dim();
    let (lo, hi) = t.jump_support()?;
    let mut sigmas = Vec::new();
    let total = SIGMA_SAMPLES.pow((n - 1) as u32);
    for k in 0..total {
        let mut x = [0.0; MAX_DIM];
        let mut r = k;
        for j in 0..n - 1 {
            let i = r % SIGMA_SAMPLES;
            r /= SIGMA_SAMPLES;
            x[j] = lo[j] + (hi[j] - lo[j]) * (i as f64 + 0.5) / SIGMA_SAMPLES as f64;
        }
        sigmas.push(sigma_k(t, model, eps, &x));
    }
    let max = sigmas.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return None;
    }
    let min = sigmas
        .iter()
        .copied()
        .filter(|s| *s > 0.5 * max)
        .fold(f64::INFINITY, f64::min);
    Some((min, max))
}

/// Default grid for the limsup table: `h = σ_min/4`, cell counts rounded up
/// to a multiple of four.
pub fn limsup_cells(t: &JumpTemplate, model: &LimitModel, eps: f64) -> Result<Vec<usize>> {
    let (smin, _) =
        sigma_range(t, model, eps).ok_or_else(|| invalid("template", "has no jump to resolve"))?;
    let h = smin / 4.0;
    Ok(t.extents
        .iter()
        .map(|l| ((l / h - 1e-9).ceil() as usize).div_ceil(4) * 4)
        .collect())
}

pub struct Recovery {
    pub field: GridField,
    pub profile: ProfileSolution,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

struct Layout<'a> {
    t: &'a JumpTemplate,
    model: &'a LimitModel,
    eps: f64,
    support: Option<(Vec<f64>, Vec<f64>)>,
    tau: f64,
}

impl Layout<'_> {
    fn sigma(&self, x: &[f64]) -> f64 {
        let n = self.t.dim();
        match &self.support {
            Some((lo, hi)) if (0..n - 1).all(|j| lo[j] < x[j] && x[j] < hi[j]) || n == 1 => {
                sigma_k(self.t, self.model, self.eps, x)
            }
            _ => 0.0,
        }
    }

    /// Region and the profile argument for `v` (unused in the core).
    fn classify(&self, x: &[f64]) -> (Region, f64, f64) {
        let n = self.t.dim();
        let tn = x[n - 1] - self.t.plane;
        let sigma = self.sigma(x);
        if sigma > 0.0 {
            if tn.abs() < sigma {
                return (Region::Core, 0.0, sigma);
            }
            let d = tn.abs() - sigma;
            return if d <= self.tau {
                (Region::Transition, d, sigma)
            } else {
                (Region::Far, d, sigma)
            };
        }
        let Some((lo, hi)) = &self.support else {
            return (Region::Far, f64::INFINITY, 0.0);
        };
        let mut d2 = tn * tn;
        for j in 0..n - 1 {
            let e = (lo[j] - x[j]).max(x[j] - hi[j]).max(0.0);
            d2 += e * e;
        }
        let d = d2.sqrt();
        if d <= self.tau {
            (Region::Edge, d, 0.0)
        } else {
            (Region::Far, d, 0.0)
        }
    }
}

/// Samples the recovery pair at the grid nodes.
///
/// The grid must cover the template box and have `h_n ≤ σ_min/4` along the
/// normal axis. `u` is pinned to the template on both `x_n` faces.
pub fn build_recovery(
    t: &JumpTemplate,
    model: &LimitModel,
    eps: f64,
    grid: &Grid,
    rule: RhoRule,
) -> Result<Recovery> {
    t.validate()?;
    let n = t.dim();
    if model.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: model.dim(),
        });
    }
    if grid.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grid.dim(),
        });
    }
    if grid
        .extents()
        .iter()
        .zip(&t.extents)
        .any(|(a, b)| (a - b).abs() > 1e-12 * b)
    {
        return Err(invalid("grid", "extents differ from the template box"));
    }
    let (sigma_min, sigma_max) = sigma_range(t, model, eps).unwrap_or((0.0, 0.0));
    let hn = grid.h()[n - 1];
    if sigma_max > 0.0 && hn > 0.25 * sigma_min * (1.0 + 1e-9) {
        let need = (t.extents[n - 1] / (0.25 * sigma_min)).ceil();
        return Err(Error::UnderResolved(format!(
            "normal spacing {hn:.3e} exceeds sigma_min/4 = {:.3e}; use at least {need} cells along x{n}",
            0.25 * sigma_min
        )));
    }
    let profile = optimal_profile(&model.phase, eps, rule)?;
    let far = 1.0 - profile.rho;
    let layout = Layout {
        t,
        model,
        eps,
        support: t.jump_support(),
        tau: profile.tau,
    };

    let mut field = GridField::new(grid);
    for node in 0..grid.n_nodes() {
        let x = grid.node_coords(node);
        let (region, d, sigma) = layout.classify(&x);
        let u = match region {
            Region::Core => {
                let mut a = x;
                let mut b = x;
                a[n - 1] = t.plane - sigma;
                b[n - 1] = t.plane + sigma;
                let (ua, ub) = (t.lower_value(&a), t.upper_value(&b));
                let theta = (x[n - 1] - a[n - 1]) / (2.0 * sigma);
                let mut u = [0.0; MAX_DIM];
                for i in 0..n {
                    u[i] = ua[i] + theta * (ub[i] - ua[i]);
                }
                u
            }
            _ => t.displacement(&x),
        };
        field.u[node * n..node * n + n].copy_from_slice(&u[..n]);
        field.v[node] = match region {
            Region::Core => 0.0,
            Region::Transition | Region::Edge => profile.eval(d).min(far),
            Region::Far => far,
        };
    }
    for side in [Side::Min, Side::Max] {
        for node in grid.nodes_on_face(Face::new(n - 1, side)) {
            field.u_pinned[node] = true;
            let (dst, src) = (
                &mut field.u_values[node * n..node * n + n],
                &field.u[node * n..node * n + n],
            );
            dst.copy_from_slice(src);
        }
    }
    Ok(Recovery {
        field,
        profile,
        sigma_min,
        sigma_max,
    })
}

/// Cell-center region of every cell.
pub fn cell_regions(
    t: &JumpTemplate,
    model: &LimitModel,
    eps: f64,
    grid: &Grid,
    profile: &ProfileSolution,
) -> Vec<Region> {
    let layout = Layout {
        t,
        model,
        eps,
        support: t.jump_support(),
        tau: profile.tau,
    };
    (0..grid.n_cells())
        .map(|c| layout.classify(&grid.cell_center(c)).0)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionEnergies {
    pub core: EnergyBreakdown,
    pub transition: EnergyBreakdown,
    pub edge: EnergyBreakdown,
    pub far: EnergyBreakdown,
}

pub fn region_energies(func: &Functional, field: &GridField, regions: &[Region]) -> RegionEnergies {
    let terms = func.cell_terms(&func.cell_bulk(&field.u), &field.v);
    let pick = |r: Region| {
        let sel: Vec<[f64; 4]> = terms
            .iter()
            .zip(regions)
            .filter(|(_, g)| **g == r)
            .map(|(t, _)| *t)
            .collect();
        EnergyBreakdown::sum_cells(&sel)
    };
    RegionEnergies {
        core: pick(Region::Core),
        transition: pick(Region::Transition),
        edge: pick(Region::Edge),
        far: pick(Region::Far),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimsupOptions {
    pub rho_rule: RhoRule,
    pub eta: EtaRule,
    pub quadrature: LimitQuadrature,
    /// Fixed cell counts; the `σ_min/4` rule applies when absent.
    pub cells: Option<Vec<usize>>,
}

impl Default for LimsupOptions {
    fn default() -> Self {
        Self {
            rho_rule: RhoRule::default(),
            eta: EtaRule::PowerP,
            quadrature: LimitQuadrature::default(),
            cells: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimsupRow {
    pub eps: f64,
    pub cells: Vec<usize>,
    pub energy: EnergyBreakdown,
    pub regions: RegionEnergies,
    pub limit: LimitEnergy,
    pub ratio: f64,
    pub runtime_s: f64,
}

pub fn limsup_check(
    t: &JumpTemplate,
    model: &LimitModel,
    eps_list: &[f64],
    opts: &LimsupOptions,
) -> Result<Vec<LimsupRow>> {
    if eps_list.is_empty() {
        return Err(invalid("eps", "schedule is empty"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(
            "eps",
            "schedule must be positive and strictly decreasing",
        ));
    }
    let limit = limit_energy(t, model, &opts.quadrature)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let start = Instant::now();
        let cells = match &opts.cells {
            Some(c) => c.clone(),
            None => limsup_cells(t, model, eps)?,
        };
        let grid = Grid::new(&t.extents, &cells)?;
        let rec = build_recovery(t, model, eps, &grid, opts.rho_rule)?;
        let p = model.density.p;
        let params = EpsParams::with_eta(
            eps,
            opts.eta.eta(eps, p),
            model.phase.gamma,
            model.phase.q,
            model.phase.psi,
        )?;
        let func = Functional::new(&grid, &params, &model.op, &model.density)?;
        let energy = func.energy(&rec.field);
        let regions = region_energies(
            &func,
            &rec.field,
            &cell_regions(t, model, eps, &grid, &rec.profile),
        );
        rows.push(LimsupRow {
            eps,
            cells,
            energy,
            regions,
            limit,
            ratio: energy.total / limit.total,
            runtime_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{BulkDensity, HookeTensor};
    use crate::limit::constants::PhaseParams;
    use crate::operator::FirstOrderOperator;
    use std::f64::consts::SQRT_2;

    fn model(n: usize) -> LimitModel {
        LimitModel::new(
            FirstOrderOperator::full_strain(n).unwrap(),
            BulkDensity::new(2.0, 0.0, HookeTensor::new(1.0, 0.0, n).unwrap()).unwrap(),
            PhaseParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn bar_recovery_structure() {
        let m = model(1);
        let t = JumpTemplate::uniform(&[1.0], 0.5, &[2.0]).unwrap();
        let eps = 1.0 / 16.0;
        let cells = limsup_cells(&t, &m, eps).unwrap();
        assert_eq!(cells[0] % 4, 0);
        let grid = Grid::new(&[1.0], &cells).unwrap();
        let rec = build_recovery(&t, &m, eps, &grid, RhoRule::GeometricMean).unwrap();
        let sigma = eps * 2.0 / (2.0 * SQRT_2);
        assert!((rec.sigma_min - sigma).abs() < 1e-15);
        let far = 1.0 - rec.profile.rho;
        let f = &rec.field;
        assert!(f.is_feasible());
        let mid = grid.n_nodes() / 2;
        assert_eq!(f.v[mid], 0.0);
        for node in 0..grid.n_nodes() {
            let x = grid.node_coords(node)[0];
            let d = (x - 0.5).abs() - sigma;
            if d > rec.profile.tau {
                assert_eq!(f.v[node], far);
                assert_eq!(f.u[node], if x < 0.5 { 0.0 } else { 2.0 });
            }
        }
        assert!(f.u_pinned[0] && f.u_pinned[grid.n_nodes() - 1]);
    }

    #[test]
    fn core_interpolation_meets_the_sides() {
        let m = model(1);
        let mut t = JumpTemplate::uniform(&[1.0], 0.5, &[1.0]).unwrap();
        t.lower = crate::field::QuadraticField::affine(vec![vec![0.3]], &[0.0]);
        t.upper = crate::field::QuadraticField::affine(vec![vec![0.3]], &[1.0]);
        t.lipschitz_l = 0.3;
        let eps = 1.0 / 8.0;
        let sigma = sigma_k(&t, &m, eps, &[]);
        // Grid with nodes exactly at c ± σ.
        let cells = ((1.0 / (sigma / 4.0)).ceil() as usize).div_ceil(2) * 2;
        let grid = Grid::new(&[1.0], &[cells]).unwrap();
        let rec = build_recovery(&t, &m, eps, &grid, RhoRule::GeometricMean).unwrap();
        for node in 0..grid.n_nodes() {
            let x = grid.node_coords(node)[0];
            let expect = if (x - 0.5).abs() < sigma {
                let ua = 0.3 * (0.5 - sigma);
                let ub = 1.0 + 0.3 * (0.5 + sigma);
                ua + (x - 0.5 + sigma) / (2.0 * sigma) * (ub - ua)
            } else {
                t.displacement(&[x])[0]
            };
            assert!((rec.field.u[node] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let m = model(1);
        let t = JumpTemplate::uniform(&[1.0], 0.5, &[2.0]).unwrap();
        let grid = Grid::new(&[1.0], &[32]).unwrap();
        assert!(matches!(
            build_recovery(&t, &m, 1.0 / 16.0, &grid, RhoRule::GeometricMean),
            Err(Error::UnderResolved(_))
        ));
    }

    #[test]
    fn bar_limsup_ratio_tends_to_one() {
        let m = model(1);
        let t = JumpTemplate::uniform(&[1.0], 0.5, &[2.0]).unwrap();
        let eps: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
        let rows = limsup_check(&t, &m, &eps, &LimsupOptions::default()).unwrap();
        let last = rows.last().unwrap();
        assert!((last.ratio - 1.0).abs() < 0.1, "ratio {}", last.ratio);
        for r in &rows {
            // ψ-term of the core ≈ (b/p′)∫ f̃^{1/p} and the transition ≈ a.
            assert!((r.regions.core.term_psi - 2.0 * SQRT_2 / 2.0).abs() < 0.1 * SQRT_2);
        }
        assert!(
            (last.regions.transition.term_psi + last.regions.transition.term_gradv - 2.0).abs()
                < 0.15
        );
    }
}
