//! Structured box grids and nodal fields with Dirichlet pins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::field::QuadraticField;
use crate::sym::MAX_DIM;

/// Uniform grid on `[0, L₁] × … × [0, L_n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [f64; MAX_DIM],
    cells: [usize; MAX_DIM],
    h: [f64; MAX_DIM],
    grad_shape: [[f64; MAX_DIM]; 8],
}

impl Grid {
    pub fn new(extents: &[f64], cells: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid("dim", format!("must be in 1..={MAX_DIM}")));
        }
        if cells.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: cells.len(),
            });
        }
        let mut e = [1.0; MAX_DIM];
        let mut c = [1; MAX_DIM];
        let mut h = [1.0; MAX_DIM];
        for i in 0..dim {
            if !(extents[i] > 0.0 && extents[i].is_finite()) {
                return Err(invalid(
                    "extents",
                    "every extent must be positive and finite",
                ));
            }
            if cells[i] == 0 {
                return Err(invalid("cells", "every axis needs at least one cell"));
            }
            e[i] = extents[i];
            c[i] = cells[i];
            h[i] = extents[i] / cells[i] as f64;
        }
        // Q1 shape-function gradients at the cell center, corner bit b ↔ axis b.
        let mut grad_shape = [[0.0; MAX_DIM]; 8];
        let scale = 1.0 / (1u32 << (dim - 1)) as f64;
        for (corner, g) in grad_shape.iter_mut().enumerate().take(1 << dim) {
            for axis in 0..dim {
                let sign = if corner >> axis & 1 == 1 { 1.0 } else { -1.0 };
                g[axis] = sign * scale / h[axis];
            }
        }
        Ok(Self {
            dim,
            extents: e,
            cells: c,
            h,
            grad_shape,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn corners(&self) -> usize {
        1 << self.dim
    }

    pub fn n_nodes(&self) -> usize {
        (0..self.dim).map(|i| self.cells[i] + 1).product()
    }

    pub fn n_cells(&self) -> usize {
        (0..self.dim).map(|i| self.cells[i]).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extents().iter().product()
    }

    /// Gradient of the corner shape function at the cell center.
    pub fn grad_shape(&self, corner: usize) -> &[f64; MAX_DIM] {
        &self.grad_shape[corner]
    }

    pub fn node_multi(&self, mut node: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for (i, slot) in idx.iter_mut().enumerate().take(self.dim) {
            let m = self.cells[i] + 1;
            *slot = node % m;
            node /= m;
        }
        idx
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        for i in (0..self.dim).rev() {
            lin = lin * (self.cells[i] + 1) + idx[i];
        }
        lin
    }

    pub fn node_coords(&self, node: usize) -> [f64; MAX_DIM] {
        let idx = self.node_multi(node);
        let mut x = [0.0; MAX_DIM];
        for i in 0..self.dim {
            x[i] = if idx[i] == self.cells[i] {
                self.extents[i]
            } else {
                idx[i] as f64 * self.h[i]
            };
        }
        x
    }

    pub fn cell_multi(&self, mut cell: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for (i, slot) in idx.iter_mut().enumerate().take(self.dim) {
            *slot = cell % self.cells[i];
            cell /= self.cells[i];
        }
        idx
    }

    pub fn cell_index(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        for i in (0..self.dim).rev() {
            lin = lin * self.cells[i] + idx[i];
        }
        lin
    }

    pub fn cell_center(&self, cell: usize) -> [f64; MAX_DIM] {
        let idx = self.cell_multi(cell);
        let mut x = [0.0; MAX_DIM];
        for i in 0..self.dim {
            x[i] = (idx[i] as f64 + 0.5) * self.h[i];
        }
        x
    }

    /// Node indices of the cell corners, corner bit `b` selecting the upper
    /// node along axis `b`.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 8] {
        let base = self.cell_multi(cell);
        let mut out = [0; 8];
        for (corner, slot) in out.iter_mut().enumerate().take(self.corners()) {
            let mut idx = base;
            for (axis, v) in idx.iter_mut().enumerate().take(self.dim) {
                *v += corner >> axis & 1;
            }
            *slot = self.node_index(&idx);
        }
        out
    }

    /// `(cell, corner)` pairs touching `node`, in a fixed order.
    pub fn node_cells(&self, node: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let idx = self.node_multi(node);
        (0..self.corners()).filter_map(move |corner| {
            let mut cell = [0; MAX_DIM];
            for axis in 0..self.dim {
                let bit = corner >> axis & 1;
                if idx[axis] < bit || idx[axis] - bit >= self.cells[axis] {
                    return None;
                }
                cell[axis] = idx[axis] - bit;
            }
            Some((self.cell_index(&cell), corner))
        })
    }

    /// Lumped nodal volume `Σ |cell| / 2ⁿ` over adjacent cells.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let w = self.cell_volume() / self.corners() as f64;
        (0..self.n_nodes())
            .map(|node| w * self.node_cells(node).count() as f64)
            .collect()
    }

    pub fn nodes_on_face(&self, face: Face) -> Vec<usize> {
        let target = match face.side {
            Side::Min => 0,
            Side::Max => self.cells[face.axis],
        };
        (0..self.n_nodes())
            .filter(|&n| self.node_multi(n)[face.axis] == target)
            .collect()
    }

    /// Multilinear interpolation of a nodal field with `comps` components.
    pub fn interpolate(&self, values: &[f64], comps: usize, x: &[f64]) -> [f64; MAX_DIM + 1] {
        let mut base = [0; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        for i in 0..self.dim {
            let s = (x[i] / self.h[i]).clamp(0.0, self.cells[i] as f64);
            let c = (s.floor() as usize).min(self.cells[i] - 1);
            base[i] = c;
            t[i] = s - c as f64;
        }
        let mut out = [0.0; MAX_DIM + 1];
        for corner in 0..self.corners() {
            let mut idx = base;
            let mut w = 1.0;
            for axis in 0..self.dim {
                let bit = corner >> axis & 1;
                idx[axis] += bit;
                w *= if bit == 1 { t[axis] } else { 1.0 - t[axis] };
            }
            let node = self.node_index(&idx);
            for c in 0..comps {
                out[c] += w * values[node * comps + c];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Min,
    Max,
}

/// A box face, written `x<axis>-` or `x<axis>+` with 1-based axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn new(axis: usize, side: Side) -> Self {
        Self { axis, side }
    }

    /// Outward unit normal.
    pub fn normal(&self, dim: usize) -> Vec<f64> {
        let mut n = vec![0.0; dim];
        n[self.axis] = match self.side {
            Side::Min => -1.0,
            Side::Max => 1.0,
        };
        n
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Min => '-',
            Side::Max => '+',
        };
        write!(f, "x{}{}", self.axis + 1, s)
    }
}

impl FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid("face", format!("`{s}` is not of the form x1-, x2+, ..."));
        let rest = s.strip_prefix('x').ok_or_else(bad)?;
        let (num, sign) = rest.split_at(rest.len().saturating_sub(1));
        let axis: usize = num.parse().map_err(|_| bad())?;
        if axis == 0 || axis > MAX_DIM {
            return Err(bad());
        }
        let side = match sign {
            "-" => Side::Min,
            "+" => Side::Max,
            _ => return Err(bad()),
        };
        Ok(Self {
            axis: axis - 1,
            side,
        })
    }
}

impl Serialize for Face {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Face {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Nodal displacement `u` (node-major, `n` components) and phase field `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub dim: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub u_pinned: Vec<bool>,
    /// Pinned displacement values, meaningful where `u_pinned` is set.
    pub u_values: Vec<f64>,
    pub v_pinned: Vec<bool>,
}

impl GridField {
    /// `u ≡ 0`, `v ≡ 1`, nothing pinned.
    pub fn new(grid: &Grid) -> Self {
        let n = grid.dim();
        let nodes = grid.n_nodes();
        Self {
            dim: n,
            u: vec![0.0; nodes * n],
            v: vec![1.0; nodes],
            u_pinned: vec![false; nodes],
            u_values: vec![0.0; nodes * n],
            v_pinned: vec![false; nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.v.len()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let nodes = grid.n_nodes();
        if self.dim != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: self.dim,
            });
        }
        if self.v.len() != nodes
            || self.u.len() != nodes * self.dim
            || self.u_pinned.len() != nodes
            || self.v_pinned.len() != nodes
            || self.u_values.len() != nodes * self.dim
        {
            return Err(Error::DimensionMismatch {
                expected: nodes,
                got: self.v.len(),
            });
        }
        Ok(())
    }

    /// Pins `u` to `datum` on the given faces.
    pub fn pin_u(&mut self, grid: &Grid, faces: &[Face], datum: &QuadraticField) -> Result<()> {
        if datum.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: datum.dim(),
            });
        }
        let n = self.dim;
        for face in faces {
            for node in grid.nodes_on_face(*face) {
                let val = datum.eval(&grid.node_coords(node));
                self.u_pinned[node] = true;
                self.u_values[node * n..node * n + n].copy_from_slice(&val[..n]);
            }
        }
        self.enforce_pins();
        Ok(())
    }

    /// Pins `v = 1` on the given faces.
    pub fn pin_v(&mut self, grid: &Grid, faces: &[Face]) {
        for face in faces {
            for node in grid.nodes_on_face(*face) {
                self.v_pinned[node] = true;
            }
        }
        self.enforce_pins();
    }

    pub fn enforce_pins(&mut self) {
        let n = self.dim;
        for node in 0..self.n_nodes() {
            if self.u_pinned[node] {
                let (dst, src) = (
                    &mut self.u[node * n..node * n + n],
                    &self.u_values[node * n..node * n + n],
                );
                dst.copy_from_slice(src);
            }
            if self.v_pinned[node] {
                self.v[node] = 1.0;
            }
        }
    }

    /// Box constraint and exact pins.
    pub fn is_feasible(&self) -> bool {
        let n = self.dim;
        self.v.iter().all(|v| (0.0..=1.0).contains(v))
            && (0..self.n_nodes()).all(|node| {
                (!self.v_pinned[node] || self.v[node] == 1.0)
                    && (!self.u_pinned[node]
                        || self.u[node * n..node * n + n] == self.u_values[node * n..node * n + n])
            })
    }

    pub fn project_v(&mut self) {
        for v in &mut self.v {
            *v = v.clamp(0.0, 1.0);
        }
        self.enforce_pins();
    }

    /// Interpolates `u` and `v` from `(src_grid, src)` onto this field's
    /// nodes, keeping the pins of `self`.
    pub fn prolongate_from(&mut self, grid: &Grid, src_grid: &Grid, src: &GridField) {
        let n = self.dim;
        for node in 0..self.n_nodes() {
            let x = grid.node_coords(node);
            let u = src_grid.interpolate(&src.u, n, &x);
            self.u[node * n..node * n + n].copy_from_slice(&u[..n]);
            self.v[node] = src_grid.interpolate(&src.v, 1, &x)[0];
        }
        self.project_v();
    }
}
