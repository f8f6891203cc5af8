//! Conforming triangulations of the unit square.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Direction of the diagonal splitting each square of the structured grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Bottom-left to top-right.
    #[default]
    Forward,
    /// Top-left to bottom-right.
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Endpoint vertex ids, ordered `vertices[0] < vertices[1]`. The facet
    /// tangent runs from the first to the second.
    pub vertices: [usize; 2],
    /// First adjacent cell and, for interior facets, the second one.
    pub cells: [usize; 2],
    pub boundary: bool,
    /// Unit normal pointing out of `cells[0]`.
    pub normal: Point,
    pub length: f64,
}

impl Facet {
    pub fn is_interior(&self) -> bool {
        !self.boundary
    }

    /// Adjacent cells: one for boundary facets, two otherwise.
    pub fn adjacent(&self) -> &[usize] {
        if self.boundary {
            &self.cells[..1]
        } else {
            &self.cells[..]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetFrame {
    pub normal: Point,
    pub tangent: Point,
    pub length: f64,
}

/// Affine map `x = origin + J x_hat` from the reference triangle with
/// vertices (0,0), (1,0), (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub origin: Point,
    /// `jac[r][c] = d x_r / d x_hat_c`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn from_vertices(v: [Point; 3]) -> Self {
        let jac = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Self {
            origin: v[0],
            jac,
            det,
            inv,
        }
    }

    pub fn map(&self, p: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * p[0] + self.jac[0][1] * p[1],
            self.origin[1] + self.jac[1][0] * p[0] + self.jac[1][1] * p[1],
        ]
    }

    /// Reference coordinates of the physical point `x`.
    pub fn pullback(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// `cell_facets[c][i]` is the facet opposite local vertex `i`.
    pub cell_facets: Vec<[usize; 3]>,
    /// Cell diameters (longest edge).
    pub cell_diameters: Vec<f64>,
}

impl Mesh {
    /// Builds facet topology for a list of counterclockwise cells.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self> {
        let mut facets: Vec<Facet> = Vec::with_capacity(cells.len() * 3 / 2 + 4);
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(facets.capacity());
        let mut cell_facets = Vec::with_capacity(cells.len());
        let mut cell_diameters = Vec::with_capacity(cells.len());

        for (c, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!("cell {c} references a missing vertex")));
            }
            let geo = CellGeometry::from_vertices(cell.map(|v| vertices[v]));
            if geo.det <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "cell {c} is not counterclockwise (det = {:e})",
                    geo.det
                )));
            }
            let mut local = [0; 3];
            let mut diam: f64 = 0.0;
            for i in 0..3 {
                let (a, b) = (cell[(i + 1) % 3], cell[(i + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let pa = vertices[a];
                let pb = vertices[b];
                let d = [pb[0] - pa[0], pb[1] - pa[1]];
                let len = d[0].hypot(d[1]);
                diam = diam.max(len);
                local[i] = match lookup.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if !facet.boundary {
                            return Err(Error::InvalidArgument(format!(
                                "facet {key:?} shared by more than two cells"
                            )));
                        }
                        facet.cells[1] = c;
                        facet.boundary = false;
                        f
                    }
                    None => {
                        let f = facets.len();
                        lookup.insert(key, f);
                        facets.push(Facet {
                            vertices: [key.0, key.1],
                            cells: [c, usize::MAX],
                            boundary: true,
                            // outward for a counterclockwise traversal a -> b
                            normal: [d[1] / len, -d[0] / len],
                            length: len,
                        });
                        f
                    }
                };
            }
            cell_facets.push(local);
            cell_diameters.push(diam);
        }

        Ok(Self {
            vertices,
            cells,
            facets,
            cell_facets,
            cell_diameters,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.boundary).count()
    }

    /// Sum of cell areas with compensated summation.
    pub fn total_area(&self) -> f64 {
        let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
        for c in 0..self.num_cells() {
            let a = self.cell_area(c);
            let t = sum + a;
            comp += if sum.abs() >= a.abs() { (sum - t) + a } else { (a - t) + sum };
            sum = t;
        }
        sum + comp
    }

    pub fn max_diameter(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    pub fn geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::from_vertices(self.cell_vertices(cell))
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        self.geometry(cell).area()
    }

    /// Whether the local edge `i` of `cell`, traversed counterclockwise,
    /// runs along the facet tangent (from the lower to the higher vertex id).
    pub fn local_edge_aligned(&self, cell: usize, i: usize) -> bool {
        let c = self.cells[cell];
        c[(i + 1) % 3] < c[(i + 2) % 3]
    }

    /// Whether the designated facet normal is the outward normal of `cell`.
    pub fn normal_outward(&self, cell: usize, facet: usize) -> bool {
        self.facets[facet].cells[0] == cell
    }

    pub fn facet_frame(&self, facet: usize) -> Result<FacetFrame> {
        let f = self.facets.get(facet).ok_or(Error::OutOfRange {
            index: facet,
            len: self.facets.len(),
        })?;
        let a = self.vertices[f.vertices[0]];
        let b = self.vertices[f.vertices[1]];
        Ok(FacetFrame {
            normal: f.normal,
            tangent: [(b[0] - a[0]) / f.length, (b[1] - a[1]) / f.length],
            length: f.length,
        })
    }

    /// Replaces each triangle by four congruent children through its edge
    /// midpoints.
    pub fn refine_uniform(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.facets.iter().map(|f| {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        }));
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (c, &[a, b, d]) in self.cells.iter().enumerate() {
            let [fa, fb, fd] = self.cell_facets[c];
            // midpoint opposite each vertex
            let (ma, mb, md) = (nv + fa, nv + fb, nv + fd);
            cells.push([a, md, mb]);
            cells.push([md, b, ma]);
            cells.push([mb, ma, d]);
            cells.push([ma, mb, md]);
        }
        Self::from_cells(vertices, cells).expect("refinement of a valid mesh is valid")
    }

    /// Applies [`Mesh::refine_uniform`] `levels` times.
    pub fn refined(&self, levels: usize) -> Self {
        let mut mesh = self.clone();
        for _ in 0..levels {
            mesh = mesh.refine_uniform();
        }
        mesh
    }
}

/// Structured `m x m` grid of the unit square, each square split into two
/// triangles along the same diagonal.
pub fn unit_square_mesh(m: usize, diagonal: Diagonal) -> Result<Mesh> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one cell per side".into()));
    }
    let h = 1.0 / m as f64;
    let mut vertices = Vec::with_capacity((m + 1) * (m + 1));
    for j in 0..=m {
        for i in 0..=m {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (m + 1) + i;
    let mut cells = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            match diagonal {
                Diagonal::Forward => {
                    cells.push([v00, v10, v11]);
                    cells.push([v00, v11, v01]);
                }
                Diagonal::Backward => {
                    cells.push([v00, v10, v01]);
                    cells.push([v10, v11, v01]);
                }
            }
        }
    }
    Mesh::from_cells(vertices, cells)
}
