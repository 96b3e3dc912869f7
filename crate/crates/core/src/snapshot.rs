//! Plain-text field snapshots.
//!
//! ```text
//! # pfgamma snapshot
//! dim 2
//! extents 1.0 1.0
//! cells 4 4
//! nodes 25
//! 0 0 0 0.0 0.0 1.0
//! ...
//! ```
//!
//! Each node line is `i j k u_1 … u_n v` with unused indices written as 0.
//! Floats use the shortest representation that round-trips exactly.
//! Dirichlet masks are not part of the snapshot.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};

pub fn to_string(grid: &Grid, field: &GridField) -> Result<String> {
    field.check_grid(grid)?;
    let n = grid.dim();
    let mut s = String::from("# pfgamma snapshot\n");
    let join_f = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let join_u = |xs: &[usize]| {
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(s, "dim {n}").unwrap();
    writeln!(s, "extents {}", join_f(grid.extents())).unwrap();
    writeln!(s, "cells {}", join_u(grid.cells())).unwrap();
    writeln!(s, "nodes {}", grid.n_nodes()).unwrap();
    for node in 0..grid.n_nodes() {
        let idx = grid.node_multi(node);
        write!(s, "{} {} {}", idx[0], idx[1], idx[2]).unwrap();
        for x in &field.u[node * n..node * n + n] {
            write!(s, " {x:?}").unwrap();
        }
        writeln!(s, " {:?}", field.v[node]).unwrap();
    }
    Ok(s)
}

pub fn from_str(text: &str) -> Result<(Grid, GridField)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let bad = |line: usize, reason: &str| Error::Snapshot {
        line: line + 1,
        reason: reason.into(),
    };
    let mut header = |key: &str| -> Result<(usize, Vec<String>)> {
        let (no, line) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(no, &format!("expected `{key}`")));
        }
        Ok((no, it.map(str::to_owned).collect()))
    };
    let parse_f = |no: usize, s: &str| {
        s.parse::<f64>()
            .map_err(|_| bad(no, &format!("bad number `{s}`")))
    };
    let parse_u = |no: usize, s: &str| {
        s.parse::<usize>()
            .map_err(|_| bad(no, &format!("bad integer `{s}`")))
    };

    let (no, dim) = header("dim")?;
    let n = parse_u(no, dim.first().ok_or_else(|| bad(no, "missing dim"))?)?;
    let (no, ext) = header("extents")?;
    let extents = ext
        .iter()
        .map(|s| parse_f(no, s))
        .collect::<Result<Vec<_>>>()?;
    let (no, cl) = header("cells")?;
    let cells = cl
        .iter()
        .map(|s| parse_u(no, s))
        .collect::<Result<Vec<_>>>()?;
    if extents.len() != n || cells.len() != n {
        return Err(bad(no, "extents/cells do not match dim"));
    }
    let grid = Grid::new(&extents, &cells)?;
    let (no, cnt) = header("nodes")?;
    let count = parse_u(no, cnt.first().ok_or_else(|| bad(no, "missing count"))?)?;
    if count != grid.n_nodes() {
        return Err(bad(no, "node count does not match cells"));
    }
    let mut field = GridField::new(&grid);
    let mut seen = vec![false; count];
    for (no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 + n + 1 {
            return Err(bad(no, &format!("expected {} columns", 4 + n)));
        }
        let idx = [
            parse_u(no, toks[0])?,
            parse_u(no, toks[1])?,
            parse_u(no, toks[2])?,
        ];
        if (0..3).any(|a| {
            if a < n {
                idx[a] > cells[a]
            } else {
                idx[a] != 0
            }
        }) {
            return Err(bad(no, "node index out of range"));
        }
        let node = grid.node_index(&idx);
        if std::mem::replace(&mut seen[node], true) {
            return Err(bad(no, "duplicate node"));
        }
        for i in 0..n {
            field.u[node * n + i] = parse_f(no, toks[3 + i])?;
        }
        field.v[node] = parse_f(no, toks[3 + n])?;
    }
    if seen.iter().any(|s| !s) {
        return Err(bad(0, "missing node lines"));
    }
    Ok((grid, field))
}

/// Writes atomically through a temporary file in the target directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn save(path: &Path, grid: &Grid, field: &GridField) -> Result<()> {
    write_atomic(path, to_string(grid, field)?.as_bytes())
}

pub fn load(path: &Path) -> Result<(Grid, GridField)> {
    from_str(&std::fs::read_to_string(path)?)
}
