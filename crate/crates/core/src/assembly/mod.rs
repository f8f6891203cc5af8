//! Assembly of the spatial operators: weighted masses, the interior penalty
//! elasticity form, divergence couplings and load vectors.
//!
//! Cell and facet kernels run in parallel; their local matrices are merged
//! in cell (facet) order, so results do not depend on the thread count.

mod params;

pub use params::{default_penalty, lame_from_young, ModelParameters};

use rayon::prelude::*;

use crate::elements::{piola_map, Mat2, ScalarTab, Vec2, VectorTab};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::quadrature::{gauss_rule, triangle_rule, LineRule, TriangleRule, MAX_TRIANGLE_DEGREE};
use crate::spaces::FeSpace;

/// Weight of a mass matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Scalar(f64),
    Tensor(Mat2),
}

/// Which facets a facet integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetSet {
    All,
    Interior,
    Boundary,
}

impl FacetSet {
    fn contains(self, boundary: bool) -> bool {
        match self {
            FacetSet::All => true,
            FacetSet::Interior => !boundary,
            FacetSet::Boundary => boundary,
        }
    }
}

/// Physical, sign-corrected basis tabulation of a vector space on one cell.
pub(crate) fn vector_tabs(space: &FeSpace, cell: usize, reference: &[VectorTab]) -> Vec<VectorTab> {
    let geo = space.mesh().geometry(cell);
    let signs = space.cell_signs(cell);
    reference
        .iter()
        .map(|r| {
            let mut t = piola_map(&geo, r);
            for (i, &s) in signs.iter().enumerate() {
                if s < 0.0 {
                    t.values[i] = [-t.values[i][0], -t.values[i][1]];
                    t.divs[i] = -t.divs[i];
                    t.grads[i] = t.grads[i].map(|row| row.map(|v| -v));
                }
            }
            t
        })
        .collect()
}

pub(crate) fn reference_vector_tabs(space: &FeSpace, points: &[Vec2]) -> Result<Vec<VectorTab>> {
    let el = space
        .bdm_element()
        .ok_or_else(|| Error::InvalidArgument("expected a BDM space".into()))?;
    points.iter().map(|&p| el.eval(p)).collect()
}

pub(crate) fn reference_scalar_tabs(space: &FeSpace, points: &[Vec2]) -> Result<Vec<ScalarTab>> {
    let el = space
        .dg_element()
        .ok_or_else(|| Error::InvalidArgument("expected a DG space".into()))?;
    points.iter().map(|&p| el.eval(p)).collect()
}

fn cell_rule(degree: usize) -> Result<TriangleRule> {
    triangle_rule(degree.clamp(1, MAX_TRIANGLE_DEGREE))
}

/// Collects per-cell dense blocks into a global matrix in cell order.
fn merge(
    nrows: usize,
    ncols: usize,
    blocks: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)>,
) -> Result<CsrMatrix> {
    let cap = blocks.iter().map(|b| b.2.len()).sum();
    let mut entries = Vec::with_capacity(cap);
    for (rows, cols, vals) in blocks {
        let nc = cols.len();
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                let v = vals[i * nc + j];
                if v != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(nrows, ncols, &entries)
}

fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn sym(g: &Mat2) -> Mat2 {
    let off = 0.5 * (g[0][1] + g[1][0]);
    [[g[0][0], off], [off, g[1][1]]]
}

fn ddot(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Mass matrix `int (W phi_j) . phi_i` (vector spaces) or
/// `int w phi_j phi_i` (scalar spaces), over all dofs.
pub fn assemble_mass(space: &FeSpace, weight: Weight) -> Result<CsrMatrix> {
    let n = space.num_dofs();
    let mesh = space.mesh();
    let rule = cell_rule(2 * space.degree())?;
    match (space.is_vector(), weight) {
        (true, Weight::Tensor(w)) => {
            if !params::is_psd(&w, false) {
                return Err(Error::InvalidArgument("mass weight is indefinite".into()));
            }
            let reference = reference_vector_tabs(space, &rule.points)?;
            let blocks = (0..mesh.num_cells())
                .into_par_iter()
                .map(|c| {
                    let tabs = vector_tabs(space, c, &reference);
                    let det = mesh.geometry(c).det.abs();
                    let nl = space.cell_dofs(c).len();
                    let mut local = vec![0.0; nl * nl];
                    for (t, &wq) in tabs.iter().zip(&rule.weights) {
                        let s = wq * det;
                        for j in 0..nl {
                            let wj = mat_vec(&w, t.values[j]);
                            for i in 0..nl {
                                let vi = t.values[i];
                                local[i * nl + j] += s * (wj[0] * vi[0] + wj[1] * vi[1]);
                            }
                        }
                    }
                    let dofs = space.cell_dofs(c).to_vec();
                    (dofs.clone(), dofs, local)
                })
                .collect();
            merge(n, n, blocks)
        }
        (true, Weight::Scalar(s)) => assemble_mass(space, Weight::Tensor([[s, 0.0], [0.0, s]])),
        (false, Weight::Scalar(w)) => {
            if w < 0.0 {
                return Err(Error::InvalidArgument("mass weight is negative".into()));
            }
            let reference = reference_scalar_tabs(space, &rule.points)?;
            let blocks = (0..mesh.num_cells())
                .into_par_iter()
                .map(|c| {
                    let det = mesh.geometry(c).det.abs();
                    let nl = space.cell_dofs(c).len();
                    let mut local = vec![0.0; nl * nl];
                    for (t, &wq) in reference.iter().zip(&rule.weights) {
                        let s = wq * det * w;
                        for i in 0..nl {
                            for j in 0..nl {
                                local[i * nl + j] += s * t.values[i] * t.values[j];
                            }
                        }
                    }
                    let dofs = space.cell_dofs(c).to_vec();
                    (dofs.clone(), dofs, local)
                })
                .collect();
            merge(n, n, blocks)
        }
        (false, Weight::Tensor(_)) => Err(Error::InvalidArgument(
            "tensor weight on a scalar space".into(),
        )),
    }
}

/// Cell part of the elasticity form:
/// `sum_K 2 mu (eps(u), eps(v))_K + lambda (div u, div v)`.
pub fn assemble_elasticity_volume(space: &FeSpace, mu: f64, lambda: f64) -> Result<CsrMatrix> {
    let n = space.num_dofs();
    let mesh = space.mesh();
    let rule = cell_rule(2 * space.degree().saturating_sub(1))?;
    let reference = reference_vector_tabs(space, &rule.points)?;
    let blocks = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let tabs = vector_tabs(space, c, &reference);
            let det = mesh.geometry(c).det.abs();
            let nl = space.cell_dofs(c).len();
            let mut local = vec![0.0; nl * nl];
            for (t, &wq) in tabs.iter().zip(&rule.weights) {
                let s = wq * det;
                let eps: Vec<Mat2> = t.grads.iter().map(sym).collect();
                for i in 0..nl {
                    for j in 0..nl {
                        local[i * nl + j] +=
                            s * (2.0 * mu * ddot(&eps[i], &eps[j]) + lambda * t.divs[i] * t.divs[j]);
                    }
                }
            }
            let dofs = space.cell_dofs(c).to_vec();
            (dofs.clone(), dofs, local)
        })
        .collect();
    merge(n, n, blocks)
}

/// Facet parts of the interior penalty form.
#[derive(Debug, Clone)]
pub struct FacetOperators {
    /// `-2 mu <{{eps(u)}}, [[tang v]]> - 2 mu <{{eps(v)}}, [[tang u]]>`.
    pub consistency: CsrMatrix,
    /// `2 mu eta / h_e <[[tang u]], [[tang v]]>`.
    pub penalty: CsrMatrix,
}

/// Per-facet tabulation of both adjacent cells at the facet quadrature
/// points (parametrized along the global facet tangent).
struct FacetSide {
    dofs: Vec<usize>,
    tabs: Vec<VectorTab>,
}

fn facet_sides(space: &FeSpace, facet: usize, rule: &LineRule) -> Vec<FacetSide> {
    let mesh = space.mesh();
    let el = space.bdm_element().expect("vector space");
    let f = &mesh.facets[facet];
    let a = mesh.vertices[f.vertices[0]];
    let b = mesh.vertices[f.vertices[1]];
    f.adjacent()
        .iter()
        .map(|&c| {
            let geo = mesh.geometry(c);
            let reference: Vec<VectorTab> = rule
                .points
                .iter()
                .map(|&s| {
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let r = geo.pullback(x);
                    el.eval_unchecked([r[0].max(0.0), r[1].max(0.0)])
                })
                .collect();
            FacetSide {
                dofs: space.cell_dofs(c).to_vec(),
                tabs: vector_tabs(space, c, &reference),
            }
        })
        .collect()
}

/// Facet terms of the elasticity form over the selected facets. The
/// penalty matrix already carries the factor `eta`.
pub fn assemble_elasticity_facets(
    space: &FeSpace,
    mu: f64,
    eta: f64,
    facets: FacetSet,
) -> Result<FacetOperators> {
    if eta <= 0.0 {
        return Err(Error::InvalidArgument("penalty parameter must be positive".into()));
    }
    let el = space
        .bdm_element()
        .ok_or_else(|| Error::InvalidArgument("elasticity form needs a BDM space".into()))?;
    let n = space.num_dofs();
    let mesh = space.mesh();
    // exact for the penalty integrand of degree 2m
    let rule = gauss_rule(el.order() + 1)?;
    let selected: Vec<usize> = (0..mesh.num_facets())
        .filter(|&f| facets.contains(mesh.facets[f].boundary))
        .collect();
    let blocks: Vec<_> = selected
        .par_iter()
        .map(|&f| {
            let facet = &mesh.facets[f];
            let n_e = facet.normal;
            let h_e = facet.length;
            let sides = facet_sides(space, f, &rule);
            let avg_scale = if facet.boundary { 1.0 } else { 0.5 };
            let dofs: Vec<usize> = sides.iter().flat_map(|s| s.dofs.iter().copied()).collect();
            let nl = dofs.len();
            let mut cons = vec![0.0; nl * nl];
            let mut pen = vec![0.0; nl * nl];
            for (q, &wq) in rule.weights.iter().enumerate() {
                let mut jump = Vec::with_capacity(nl);
                let mut avg = Vec::with_capacity(nl);
                for (side, s) in sides.iter().enumerate() {
                    let sign = if side == 0 { 1.0 } else { -1.0 };
                    let t = &s.tabs[q];
                    for i in 0..s.dofs.len() {
                        let v = t.values[i];
                        let vn = v[0] * n_e[0] + v[1] * n_e[1];
                        let tang = [v[0] - vn * n_e[0], v[1] - vn * n_e[1]];
                        jump.push([sign * tang[0], sign * tang[1]]);
                        let e = sym(&t.grads[i]);
                        let en = mat_vec(&e, n_e);
                        avg.push([avg_scale * en[0], avg_scale * en[1]]);
                    }
                }
                let s = wq * h_e;
                for i in 0..nl {
                    for j in 0..nl {
                        let aj_ji = avg[j][0] * jump[i][0] + avg[j][1] * jump[i][1];
                        let ai_jj = avg[i][0] * jump[j][0] + avg[i][1] * jump[j][1];
                        let jj = jump[j][0] * jump[i][0] + jump[j][1] * jump[i][1];
                        cons[i * nl + j] -= s * 2.0 * mu * (aj_ji + ai_jj);
                        pen[i * nl + j] += s * 2.0 * mu * eta / h_e * jj;
                    }
                }
            }
            ((dofs.clone(), dofs.clone(), cons), (dofs.clone(), dofs, pen))
        })
        .collect();
    let (cons, pen): (Vec<_>, Vec<_>) = blocks.into_iter().unzip();
    Ok(FacetOperators {
        consistency: merge(n, n, cons)?,
        penalty: merge(n, n, pen)?,
    })
}

/// The full interior penalty elasticity matrix `a_h` over all dofs.
pub fn assemble_elasticity_dg(space: &FeSpace, mu: f64, lambda: f64, eta: f64) -> Result<CsrMatrix> {
    let volume = assemble_elasticity_volume(space, mu, lambda)?;
    let facets = assemble_elasticity_facets(space, mu, eta, FacetSet::All)?;
    volume
        .add_scaled(&facets.consistency, 1.0)?
        .add_scaled(&facets.penalty, 1.0)
}

/// `B[q, v] = int div(phi_v) q`, pressure rows by vector columns.
pub fn assemble_div_coupling(vector: &FeSpace, pressure: &FeSpace) -> Result<CsrMatrix> {
    if !std::sync::Arc::ptr_eq(vector.mesh(), pressure.mesh()) {
        return Err(Error::InvalidArgument("spaces live on different meshes".into()));
    }
    let mesh = vector.mesh();
    let rule = cell_rule(vector.degree() - 1 + pressure.degree())?;
    let vref = reference_vector_tabs(vector, &rule.points)?;
    let pref = reference_scalar_tabs(pressure, &rule.points)?;
    let blocks = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let vt = vector_tabs(vector, c, &vref);
            let det = mesh.geometry(c).det.abs();
            let (nr, nc) = (pressure.cell_dofs(c).len(), vector.cell_dofs(c).len());
            let mut local = vec![0.0; nr * nc];
            for ((v, p), &wq) in vt.iter().zip(&pref).zip(&rule.weights) {
                for i in 0..nr {
                    for j in 0..nc {
                        local[i * nc + j] += wq * det * v.divs[j] * p.values[i];
                    }
                }
            }
            (pressure.cell_dofs(c).to_vec(), vector.cell_dofs(c).to_vec(), local)
        })
        .collect();
    merge(pressure.num_dofs(), vector.num_dofs(), blocks)
}

/// Quadrature degree used for loads with non-polynomial data.
pub const LOAD_QUADRATURE_DEGREE: usize = 14;

/// `int f . phi_i` for a vector space.
pub fn assemble_load_vector(space: &FeSpace, f: impl Fn(Vec2) -> Vec2 + Sync) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let rule = cell_rule(LOAD_QUADRATURE_DEGREE)?;
    let reference = reference_vector_tabs(space, &rule.points)?;
    let locals: Vec<Vec<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let geo = mesh.geometry(c);
            let tabs = vector_tabs(space, c, &reference);
            let nl = space.cell_dofs(c).len();
            let mut local = vec![0.0; nl];
            for ((t, p), &wq) in tabs.iter().zip(&rule.points).zip(&rule.weights) {
                let fx = f(geo.map(*p));
                let s = wq * geo.det.abs();
                for i in 0..nl {
                    local[i] += s * (fx[0] * t.values[i][0] + fx[1] * t.values[i][1]);
                }
            }
            local
        })
        .collect();
    let mut out = vec![0.0; space.num_dofs()];
    for (c, local) in locals.into_iter().enumerate() {
        for (&d, v) in space.cell_dofs(c).iter().zip(local) {
            out[d] += v;
        }
    }
    Ok(out)
}

/// `int g phi_i` for a scalar space.
pub fn assemble_load_scalar(space: &FeSpace, g: impl Fn(Vec2) -> f64 + Sync) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let rule = cell_rule(LOAD_QUADRATURE_DEGREE)?;
    let reference = reference_scalar_tabs(space, &rule.points)?;
    let locals: Vec<Vec<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let geo = mesh.geometry(c);
            let nl = space.cell_dofs(c).len();
            let mut local = vec![0.0; nl];
            for ((t, p), &wq) in reference.iter().zip(&rule.points).zip(&rule.weights) {
                let gx = g(geo.map(*p));
                let s = wq * geo.det.abs();
                for i in 0..nl {
                    local[i] += s * gx * t.values[i];
                }
            }
            local
        })
        .collect();
    let mut out = vec![0.0; space.num_dofs()];
    for (c, local) in locals.into_iter().enumerate() {
        for (&d, v) in space.cell_dofs(c).iter().zip(local) {
            out[d] += v;
        }
    }
    Ok(out)
}

/// All spatial operators of one mesh level, restricted to free dofs.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    /// Vector `L2` mass.
    pub mass: CsrMatrix,
    /// `K^-1`-weighted vector mass.
    pub mass_kinv: CsrMatrix,
    /// Pressure mass.
    pub mass_p: CsrMatrix,
    /// Interior penalty elasticity matrix.
    pub stiffness: CsrMatrix,
    /// Divergence coupling `(div phi, q)`, pressure rows by free vector
    /// columns. Displacement and flux share the space, so the same matrix
    /// serves both couplings.
    pub coupling: CsrMatrix,
    /// Its transpose, used in the momentum and Darcy rows.
    pub coupling_t: CsrMatrix,
    pub eta: f64,
}

impl OperatorSet {
    pub fn assemble(vector: &FeSpace, pressure: &FeSpace, params: &ModelParameters) -> Result<Self> {
        let eta = params.penalty(pressure.degree());
        let free = vector.free_dofs();
        let all_p: Vec<usize> = (0..pressure.num_dofs()).collect();
        let restrict = |m: CsrMatrix| m.select(free, free);
        let mass = restrict(assemble_mass(vector, Weight::Scalar(1.0))?);
        let mass_kinv = restrict(assemble_mass(vector, Weight::Tensor(params.k_inv))?);
        let mass_p = assemble_mass(pressure, Weight::Scalar(1.0))?;
        let stiffness = restrict(assemble_elasticity_dg(vector, params.mu, params.lambda, eta)?);
        let coupling = assemble_div_coupling(vector, pressure)?.select(&all_p, free);
        let coupling_t = coupling.transpose();
        Ok(Self {
            mass,
            mass_kinv,
            mass_p,
            stiffness,
            coupling,
            coupling_t,
            eta,
        })
    }

    pub fn b_u(&self) -> &CsrMatrix {
        &self.coupling
    }

    pub fn b_w(&self) -> &CsrMatrix {
        &self.coupling
    }

    pub fn num_vector(&self) -> usize {
        self.mass.nrows()
    }

    pub fn num_pressure(&self) -> usize {
        self.mass_p.nrows()
    }
}
