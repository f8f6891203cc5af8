//! Space-time error norms and experimental orders of convergence.
//!
//! `L^inf(L^2)` norms are approximated by the maximum of the spatial `L^2`
//! norm over `samples + 1` equidistant times per slab, endpoints included.

use rayon::prelude::*;

use crate::assembly::vector_tabs;
use crate::elements::{scalar_map, ScalarTab, Vec2, VectorTab};
use crate::error::{Error, Result};
use crate::mms::{ExactSolution, Field};
use crate::quadrature::{triangle_rule, TriangleRule, MAX_TRIANGLE_DEGREE};
use crate::spaces::FeSpace;
use crate::timestepping::{LagrangeBasis, SlabState, Trajectory};

/// Default number of sub-intervals per slab for the time sampling.
pub const DEFAULT_SAMPLES: usize = 100;

/// Error columns in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Broken gradient of the displacement error.
    GradU,
    V,
    W,
    P,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] = [ErrorKind::GradU, ErrorKind::V, ErrorKind::W, ErrorKind::P];

    fn index(self) -> usize {
        self as usize
    }
}

/// Discrete field values at every quadrature point of the mesh for one node.
#[derive(Debug, Clone, Default)]
struct NodeSamples {
    grad_u: Vec<[f64; 4]>,
    v: Vec<Vec2>,
    w: Vec<Vec2>,
    p: Vec<f64>,
}

/// Running `L^inf(L^2)` errors of the four table columns.
pub struct ErrorMeter<'a, E: ExactSolution> {
    vector: &'a FeSpace,
    pressure: &'a FeSpace,
    exact: &'a E,
    samples: usize,
    rule: TriangleRule,
    vtabs: Vec<VectorTab>,
    stabs: Vec<ScalarTab>,
    points: Vec<Vec2>,
    weights: Vec<f64>,
    max: [f64; 4],
}

impl<'a, E: ExactSolution> ErrorMeter<'a, E> {
    pub fn new(vector: &'a FeSpace, pressure: &'a FeSpace, exact: &'a E, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument("need at least one sample interval per slab".into()));
        }
        let bdm = vector
            .bdm_element()
            .ok_or_else(|| Error::InvalidArgument("expected a BDM space".into()))?;
        let dg = pressure
            .dg_element()
            .ok_or_else(|| Error::InvalidArgument("expected a DG space".into()))?;
        let degree = 2 * (pressure.degree() + 2);
        let rule = triangle_rule(degree.min(MAX_TRIANGLE_DEGREE))?;
        let vtabs = rule.points.iter().map(|&p| bdm.eval_unchecked(p)).collect();
        let stabs = rule.points.iter().map(|&p| dg.eval_unchecked(p)).collect();
        let mesh = vector.mesh();
        let mut points = Vec::with_capacity(mesh.num_cells() * rule.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            for (&p, w) in rule.iter() {
                points.push(geo.map(p));
                weights.push(w * geo.det.abs());
            }
        }
        Ok(Self {
            vector,
            pressure,
            exact,
            samples,
            rule,
            vtabs,
            stabs,
            points,
            weights,
            max: [0.0; 4],
        })
    }

    /// Field values at all quadrature points for one node state.
    fn node_samples(&self, u: &[f64], v: &[f64], w: &[f64], p: &[f64]) -> NodeSamples {
        let mesh = self.vector.mesh();
        let (u, v, w) = (self.vector.extend(u), self.vector.extend(v), self.vector.extend(w));
        let nq = self.rule.len();
        let per_cell: Vec<NodeSamples> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let dofs = self.vector.cell_dofs(c);
                let tabs = vector_tabs(self.vector, c, &self.vtabs);
                let geo = mesh.geometry(c);
                let pdofs = self.pressure.cell_dofs(c);
                let mut out = NodeSamples::default();
                for q in 0..nq {
                    let t = &tabs[q];
                    let mut g = [0.0; 4];
                    let mut vv = [0.0; 2];
                    let mut ww = [0.0; 2];
                    for (i, &d) in dofs.iter().enumerate() {
                        let gi = &t.grads[i];
                        g[0] += u[d] * gi[0][0];
                        g[1] += u[d] * gi[0][1];
                        g[2] += u[d] * gi[1][0];
                        g[3] += u[d] * gi[1][1];
                        vv[0] += v[d] * t.values[i][0];
                        vv[1] += v[d] * t.values[i][1];
                        ww[0] += w[d] * t.values[i][0];
                        ww[1] += w[d] * t.values[i][1];
                    }
                    let st = scalar_map(&geo, &self.stabs[q]);
                    let pp = pdofs.iter().enumerate().map(|(i, &d)| p[d] * st.values[i]).sum();
                    out.grad_u.push(g);
                    out.v.push(vv);
                    out.w.push(ww);
                    out.p.push(pp);
                }
                out
            })
            .collect();
        let mut all = NodeSamples::default();
        for c in per_cell {
            all.grad_u.extend(c.grad_u);
            all.v.extend(c.v);
            all.w.extend(c.w);
            all.p.extend(c.p);
        }
        all
    }

    /// Spatial `L^2` errors of the four columns at time `t` for discrete
    /// values `coef[j] * nodes[j]`.
    fn errors_at(&self, nodes: &[NodeSamples], coef: &[f64], t: f64) -> [f64; 4] {
        let mut exact = Vec::with_capacity(self.points.len());
        self.exact.sample_points(&self.points, t, &mut exact);
        let mut sums = [0.0; 4];
        for (q, (e, &wq)) in exact.iter().zip(&self.weights).enumerate() {
            let mut g = [0.0; 4];
            let mut v = [0.0; 2];
            let mut w = [0.0; 2];
            let mut p = 0.0;
            for (n, &c) in nodes.iter().zip(coef) {
                for r in 0..4 {
                    g[r] += c * n.grad_u[q][r];
                }
                for r in 0..2 {
                    v[r] += c * n.v[q][r];
                    w[r] += c * n.w[q][r];
                }
                p += c * n.p[q];
            }
            let eg = &e.grad_u;
            let dg = [eg[0][0] - g[0], eg[0][1] - g[1], eg[1][0] - g[2], eg[1][1] - g[3]];
            sums[0] += wq * dg.iter().map(|d| d * d).sum::<f64>();
            sums[1] += wq * ((e.v[0] - v[0]).powi(2) + (e.v[1] - v[1]).powi(2));
            sums[2] += wq * ((e.w[0] - w[0]).powi(2) + (e.w[1] - w[1]).powi(2));
            sums[3] += wq * (e.p - p).powi(2);
        }
        sums.map(f64::sqrt)
    }

    /// Folds one slab into the running maxima.
    pub fn observe(&mut self, slab: &SlabState, basis: &LagrangeBasis) {
        let nodes: Vec<NodeSamples> = slab
            .nodes
            .iter()
            .map(|n| self.node_samples(&n.u, &n.v, &n.w, &n.p))
            .collect();
        let per_sample: Vec<[f64; 4]> = (0..=self.samples)
            .into_par_iter()
            .map(|i| {
                let s = i as f64 / self.samples as f64;
                let t = if i == self.samples { slab.t_end() } else { slab.t_start + s * slab.tau };
                self.errors_at(&nodes, &basis.eval(s), t)
            })
            .collect();
        for e in per_sample {
            for r in 0..4 {
                self.max[r] = self.max[r].max(e[r]);
            }
        }
    }

    /// Spatial `L^2` errors of a single state at time `t`.
    pub fn errors_at_state(&self, u: &[f64], v: &[f64], w: &[f64], p: &[f64], t: f64) -> [f64; 4] {
        let nodes = [self.node_samples(u, v, w, p)];
        self.errors_at(&nodes, &[1.0], t)
    }

    /// Current maxima in table order.
    pub fn maxima(&self) -> [f64; 4] {
        self.max
    }

    pub fn get(&self, kind: ErrorKind) -> f64 {
        self.max[kind.index()]
    }
}

fn measure<E: ExactSolution>(
    trajectory: &Trajectory,
    vector: &FeSpace,
    pressure: &FeSpace,
    exact: &E,
    samples: usize,
) -> Result<[f64; 4]> {
    let mut meter = ErrorMeter::new(vector, pressure, exact, samples)?;
    for slab in &trajectory.slabs {
        meter.observe(slab, &trajectory.temporal.trial);
    }
    Ok(meter.maxima())
}

/// `max_t ||e(t)||_{L^2}` over the sample times for `v`, `w` or `p`. For
/// `u` the displacement gradient error is returned, as in
/// [`broken_grad_error`].
pub fn linf_l2_error<E: ExactSolution>(
    trajectory: &Trajectory,
    vector: &FeSpace,
    pressure: &FeSpace,
    exact: &E,
    field: Field,
    samples: usize,
) -> Result<f64> {
    let all = measure(trajectory, vector, pressure, exact, samples)?;
    Ok(match field {
        Field::U => all[0],
        Field::V => all[1],
        Field::W => all[2],
        Field::P => all[3],
    })
}

/// `max_t ||grad_h e^u(t)||_{L^2}` with the cell-wise gradient.
pub fn broken_grad_error<E: ExactSolution>(
    trajectory: &Trajectory,
    vector: &FeSpace,
    pressure: &FeSpace,
    exact: &E,
    samples: usize,
) -> Result<f64> {
    linf_l2_error(trajectory, vector, pressure, exact, Field::U, samples)
}

/// `log2(e_{n-1} / e_n)` for consecutive levels.
pub fn eoc(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::InvalidArgument("eoc needs at least two levels".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(format!("errors must be positive, got {e}")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Errors of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub level: usize,
    pub tau: f64,
    pub h: f64,
    /// `||grad e^u||`, `||e^v||`, `||e^w||`, `||e^p||`.
    pub errors: [f64; 4],
}

/// A convergence table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

pub const CSV_HEADER: &str = "level,tau,h,err_grad_u,eoc_u,err_v,eoc_v,err_w,eoc_w,err_p,eoc_p";

impl ErrorReport {
    /// Rate of column `kind` between row `i - 1` and row `i`.
    pub fn eoc(&self, row: usize, kind: ErrorKind) -> Option<f64> {
        if row == 0 || row >= self.rows.len() {
            return None;
        }
        let a = self.rows[row - 1].errors[kind.index()];
        let b = self.rows[row].errors[kind.index()];
        eoc(&[a, b]).ok().map(|r| r[0])
    }

    fn cells(&self, row: usize) -> Vec<String> {
        let r = &self.rows[row];
        let mut out = vec![r.level.to_string(), format!("{:.6e}", r.tau), format!("{:.6e}", r.h)];
        for kind in ErrorKind::ALL {
            out.push(format!("{:.3e}", r.errors[kind.index()]));
            out.push(self.eoc(row, kind).map_or("--".to_string(), |e| format!("{e:.2}")));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push_str("\r\n");
        for i in 0..self.rows.len() {
            s.push_str(&self.cells(i).join(","));
            s.push_str("\r\n");
        }
        s
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let header: Vec<&str> = CSV_HEADER.split(',').collect();
        let body: Vec<Vec<String>> = (0..self.rows.len()).map(|i| self.cells(i)).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
            .collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut s = line(header.clone());
        s.push('\n');
        for r in &body {
            s.push_str(&line(r.iter().map(String::as_str).collect()));
            s.push('\n');
        }
        s
    }
}
