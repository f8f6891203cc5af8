//! Legacy ASCII VTK output of discrete fields, and a small reader for it.
//!
//! Every cell is split into `n^2` sub-triangles on the points
//! `(i/n, j/n)` of its reference element. Points are not shared between
//! cells, so discontinuous pressures are written without smearing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use biot_core::mms::Field;
use biot_core::spaces::FeSpace;
use biot_core::timestepping::Trajectory;

/// Visualization grid: physical points with their cell and reference
/// coordinates, plus the sub-triangles.
struct Grid {
    points: Vec<[f64; 2]>,
    origin: Vec<(usize, [f64; 2])>,
    triangles: Vec<[usize; 3]>,
}

fn grid(space: &FeSpace, n: usize) -> Grid {
    let mesh = space.mesh();
    let local = |i: usize, j: usize| {
        // index of (i, j), i + j <= n, in row-major order over j
        (0..j).map(|r| n + 1 - r).sum::<usize>() + i
    };
    let per_cell = (n + 1) * (n + 2) / 2;
    let mut g = Grid {
        points: Vec::with_capacity(mesh.num_cells() * per_cell),
        origin: Vec::with_capacity(mesh.num_cells() * per_cell),
        triangles: Vec::with_capacity(mesh.num_cells() * n * n),
    };
    for c in 0..mesh.num_cells() {
        let geo = mesh.geometry(c);
        let base = g.points.len();
        for j in 0..=n {
            for i in 0..=n - j {
                let xhat = [i as f64 / n as f64, j as f64 / n as f64];
                g.points.push(geo.map(xhat));
                g.origin.push((c, xhat));
            }
        }
        for j in 0..n {
            for i in 0..n - j {
                let (a, b, d) = (local(i, j), local(i + 1, j), local(i, j + 1));
                g.triangles.push([base + a, base + b, base + d]);
                if i + j + 1 < n {
                    let e = local(i + 1, j + 1);
                    g.triangles.push([base + b, base + e, base + d]);
                }
            }
        }
    }
    g
}

fn push_vectors(out: &mut String, name: &str, values: &[[f64; 2]]) {
    let _ = writeln!(out, "VECTORS {name} double");
    for v in values {
        let _ = writeln!(out, "{:.17e} {:.17e} 0", v[0], v[1]);
    }
}

/// Writes one file per requested time, `fields_0000.vtk`, ..., and
/// returns their paths. `subdivisions` is the number of sub-intervals per
/// cell edge.
pub fn export_fields(
    vector: &FeSpace,
    pressure: &FeSpace,
    trajectory: &Trajectory,
    times: &[f64],
    dir: &Path,
    subdivisions: usize,
) -> Result<Vec<PathBuf>> {
    if subdivisions == 0 {
        bail!("subdivisions must be positive");
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let g = grid(vector, subdivisions);
    let mut paths = Vec::with_capacity(times.len());
    for (index, &t) in times.iter().enumerate() {
        let mut out = String::new();
        let _ = writeln!(out, "# vtk DataFile Version 3.0");
        let _ = writeln!(out, "biot fields at t = {t:.17e}");
        let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(out, "POINTS {} double", g.points.len());
        for p in &g.points {
            let _ = writeln!(out, "{:.17e} {:.17e} 0", p[0], p[1]);
        }
        let _ = writeln!(out, "CELLS {} {}", g.triangles.len(), 4 * g.triangles.len());
        for tri in &g.triangles {
            let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
        }
        let _ = writeln!(out, "CELL_TYPES {}", g.triangles.len());
        for _ in &g.triangles {
            out.push_str("5\n");
        }
        let _ = writeln!(out, "POINT_DATA {}", g.points.len());
        for (name, field) in [("u", Field::U), ("v", Field::V), ("w", Field::W)] {
            let coeffs = vector.extend(&trajectory.evaluate(t, field)?);
            let values: Vec<[f64; 2]> = g
                .origin
                .iter()
                .map(|&(c, xhat)| vector.eval_vector(&coeffs, c, xhat).value)
                .collect();
            push_vectors(&mut out, name, &values);
        }
        let p = trajectory.evaluate(t, Field::P)?;
        out.push_str("SCALARS p double 1\nLOOKUP_TABLE default\n");
        for &(c, xhat) in &g.origin {
            let _ = writeln!(out, "{:.17e}", pressure.eval_scalar(&p, c, xhat).0);
        }
        let path = dir.join(format!("fields_{index:04}.vtk"));
        std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Contents of a triangle-only legacy VTK file as written above.
#[derive(Debug, Clone, Default)]
pub struct VtkData {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub vectors: BTreeMap<String, Vec<[f64; 2]>>,
    pub scalars: BTreeMap<String, Vec<f64>>,
}

impl VtkData {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.lines().skip(2).flat_map(str::split_whitespace);
        let mut next = || tokens.next().context("unexpected end of file");
        let mut out = VtkData::default();
        let num = |s: &str| -> Result<f64> { s.parse::<f64>().with_context(|| format!("bad number `{s}`")) };
        let count = |s: &str| -> Result<usize> { s.parse::<usize>().with_context(|| format!("bad count `{s}`")) };
        let mut npoints = 0;
        while let Ok(key) = next() {
            match key {
                "ASCII" => {}
                "DATASET" => {
                    next()?;
                }
                "POINTS" => {
                    npoints = count(next()?)?;
                    next()?;
                    for _ in 0..npoints {
                        let (x, y) = (num(next()?)?, num(next()?)?);
                        next()?;
                        out.points.push([x, y]);
                    }
                }
                "CELLS" => {
                    let n = count(next()?)?;
                    next()?;
                    for _ in 0..n {
                        if next()? != "3" {
                            bail!("only triangles are supported");
                        }
                        out.triangles.push([count(next()?)?, count(next()?)?, count(next()?)?]);
                    }
                }
                "CELL_TYPES" => {
                    let n = count(next()?)?;
                    for _ in 0..n {
                        next()?;
                    }
                }
                "POINT_DATA" => {
                    count(next()?)?;
                }
                "VECTORS" => {
                    let name = next()?.to_string();
                    next()?;
                    let mut v = Vec::with_capacity(npoints);
                    for _ in 0..npoints {
                        let (x, y) = (num(next()?)?, num(next()?)?);
                        next()?;
                        v.push([x, y]);
                    }
                    out.vectors.insert(name, v);
                }
                "SCALARS" => {
                    let name = next()?.to_string();
                    next()?;
                    next()?;
                    if next()? != "LOOKUP_TABLE" {
                        bail!("expected LOOKUP_TABLE");
                    }
                    next()?;
                    let mut v = Vec::with_capacity(npoints);
                    for _ in 0..npoints {
                        v.push(num(next()?)?);
                    }
                    out.scalars.insert(name, v);
                }
                other => bail!("unexpected token `{other}`"),
            }
        }
        Ok(out)
    }

    /// Integral of the piecewise linear interpolant of a point scalar.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.points[i]);
                let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
                area * (values[t[0]] + values[t[1]] + values[t[2]]) / 3.0
            })
            .sum()
    }

    pub fn area(&self) -> f64 {
        self.integrate(&vec![1.0; self.points.len()])
    }
}
