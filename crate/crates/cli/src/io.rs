//! Field persistence: history CSV, nodal density CSV, legacy ASCII VTK.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use topt_core::{FlowRecord, Mesh, NodalField};

pub const HISTORY_HEADER: &str =
    "step,objective,total_mass,log_rel_mass_error,min_rho,max_rho,cg_iters_state,negativity_events";

pub fn history_csv(records: &[FlowRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.step,
            r.objective,
            r.total_mass,
            r.log_rel_mass_error,
            r.min_rho,
            r.max_rho,
            r.cg_iters_state,
            r.negativity_events
        )
        .unwrap();
    }
    out
}

pub fn density_csv(mesh: &Mesh, rho: &[f64]) -> String {
    let mut out = String::from("x,y,rho\n");
    for (p, r) in mesh.nodes().iter().zip(rho) {
        writeln!(out, "{},{},{}", p[0], p[1], r).unwrap();
    }
    out
}

/// `DATASET UNSTRUCTURED_GRID` with the density as point scalars and the
/// state as point scalars (heat) or vectors (elasticity).
pub fn vtk(mesh: &Mesh, rho: &[f64], state: Option<&NodalField>) -> String {
    let n = mesh.node_count();
    let t = mesh.triangle_count();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\ntopt density\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {n} double").unwrap();
    for p in mesh.nodes() {
        writeln!(out, "{} {} 0", p[0], p[1]).unwrap();
    }
    writeln!(out, "CELLS {t} {}", 4 * t).unwrap();
    for tri in mesh.triangles() {
        writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {t}").unwrap();
    for _ in 0..t {
        out.push_str("5\n");
    }
    writeln!(out, "POINT_DATA {n}").unwrap();
    out.push_str("SCALARS rho double 1\nLOOKUP_TABLE default\n");
    for r in rho {
        writeln!(out, "{r}").unwrap();
    }
    match state {
        Some(u) if u.components == 1 => {
            out.push_str("SCALARS u double 1\nLOOKUP_TABLE default\n");
            for v in &u.values {
                writeln!(out, "{v}").unwrap();
            }
        }
        Some(u) => {
            out.push_str("VECTORS u double\n");
            for v in u.values.chunks(2) {
                writeln!(out, "{} {} 0", v[0], v[1]).unwrap();
            }
        }
        None => {}
    }
    out
}

/// Nodal density as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFile {
    pub points: Vec<[f64; 2]>,
    pub rho: Vec<f64>,
}

impl DensityFile {
    /// Reads a `.vtk` file written by [`vtk`] or an `x,y,rho` CSV.
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = if text.starts_with("# vtk") {
            parse_vtk(&text)
        } else {
            parse_csv(&text)
        };
        parsed.with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks that the points coincide with the mesh nodes.
    pub fn on_mesh(&self, mesh: &Mesh) -> Result<&[f64]> {
        ensure!(
            self.points.len() == mesh.node_count(),
            "mesh mismatch: file has {} nodes, mesh has {}",
            self.points.len(),
            mesh.node_count()
        );
        let tol = 1e-9 * mesh.diameter();
        for (k, (p, q)) in self.points.iter().zip(mesh.nodes()).enumerate() {
            ensure!(
                (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol,
                "mesh mismatch at node {k}: ({}, {}) vs ({}, {})",
                p[0],
                p[1],
                q[0],
                q[1]
            );
        }
        Ok(&self.rho)
    }

    pub fn same_points(&self, other: &Self) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(p, q)| (p[0] - q[0]).abs() <= 1e-12 && (p[1] - q[1]).abs() <= 1e-12)
    }
}

fn parse_csv(text: &str) -> Result<DensityFile> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "x,y,rho" => {}
        _ => bail!("expected header `x,y,rho`"),
    }
    let mut points = Vec::new();
    let mut rho = Vec::new();
    for (no, line) in lines {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("line {}", no + 1))?;
        ensure!(v.len() == 3, "line {}: expected 3 columns", no + 1);
        points.push([v[0], v[1]]);
        rho.push(v[2]);
    }
    Ok(DensityFile { points, rho })
}

fn parse_vtk(text: &str) -> Result<DensityFile> {
    let mut tokens = text.split_whitespace().peekable();
    let mut points = Vec::new();
    let mut rho = Vec::new();
    let next_f64 = |tokens: &mut std::iter::Peekable<std::str::SplitWhitespace>| -> Result<f64> {
        Ok(tokens.next().context("unexpected end of file")?.parse()?)
    };
    while let Some(tok) = tokens.next() {
        match tok {
            "POINTS" => {
                let n: usize = tokens.next().context("POINTS count")?.parse()?;
                tokens.next();
                for _ in 0..n {
                    let x = next_f64(&mut tokens)?;
                    let y = next_f64(&mut tokens)?;
                    next_f64(&mut tokens)?;
                    points.push([x, y]);
                }
            }
            "SCALARS" if tokens.peek() == Some(&"rho") => {
                tokens.next();
                tokens.next();
                if tokens.peek().is_some_and(|t| t.parse::<usize>().is_ok()) {
                    tokens.next();
                }
                ensure!(tokens.next() == Some("LOOKUP_TABLE"), "expected LOOKUP_TABLE");
                tokens.next();
                for _ in 0..points.len() {
                    rho.push(next_f64(&mut tokens)?);
                }
            }
            _ => {}
        }
    }
    ensure!(!points.is_empty(), "no POINTS section");
    ensure!(rho.len() == points.len(), "no `SCALARS rho` point data");
    Ok(DensityFile { points, rho })
}
