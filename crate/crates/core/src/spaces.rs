//! Global finite element spaces: dof numbering, orientation signs and the
//! strong boundary constraints of `H_0(div)`.

use std::sync::Arc;

use crate::elements::{piola_map, piola_pullback, scalar_map, BdmElement, DgElement, Mat2, Vec2};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::triangle_rule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// `BDM_m` vector element.
    Bdm(usize),
    /// Discontinuous scalar `P_l`.
    Dg(usize),
}

#[derive(Debug, Clone)]
pub enum Element {
    Bdm(BdmElement),
    Dg(DgElement),
}

impl Element {
    pub fn dim(&self) -> usize {
        match self {
            Element::Bdm(e) => e.dim(),
            Element::Dg(e) => e.dim(),
        }
    }
}

/// Value, divergence and Jacobian of a vector field at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VectorSample {
    pub value: Vec2,
    pub div: f64,
    pub grad: Mat2,
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    kind: ElementKind,
    element: Element,
    num_dofs: usize,
    cell_dofs: Vec<Vec<usize>>,
    cell_signs: Vec<Vec<f64>>,
    constrained: Vec<bool>,
    /// Global dof -> index among free dofs.
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, kind: ElementKind) -> Result<Self> {
        match kind {
            ElementKind::Bdm(m) => Self::bdm(mesh, BdmElement::new(m)?, kind),
            ElementKind::Dg(l) => Self::dg(mesh, DgElement::new(l)?, kind),
        }
    }

    fn bdm(mesh: Arc<Mesh>, el: BdmElement, kind: ElementKind) -> Result<Self> {
        let per_facet = el.dofs_per_facet();
        let interior = el.interior_dofs();
        let nf = mesh.num_facets();
        let num_dofs = nf * per_facet + mesh.num_cells() * interior;
        let mut cell_dofs = Vec::with_capacity(mesh.num_cells());
        let mut cell_signs = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let mut dofs = Vec::with_capacity(el.dim());
            let mut signs = Vec::with_capacity(el.dim());
            for (i, &f) in mesh.cell_facets[c].iter().enumerate() {
                let outward = mesh.normal_outward(c, f);
                let aligned = mesh.local_edge_aligned(c, i);
                for j in 0..per_facet {
                    dofs.push(f * per_facet + j);
                    signs.push(el.facet_dof_sign(outward, aligned, j));
                }
            }
            for k in 0..interior {
                dofs.push(nf * per_facet + c * interior + k);
                signs.push(1.0);
            }
            cell_dofs.push(dofs);
            cell_signs.push(signs);
        }
        let mut constrained = vec![false; num_dofs];
        for (f, facet) in mesh.facets.iter().enumerate() {
            if facet.boundary {
                for j in 0..per_facet {
                    constrained[f * per_facet + j] = true;
                }
            }
        }
        Ok(Self::finish(mesh, kind, Element::Bdm(el), num_dofs, cell_dofs, cell_signs, constrained))
    }

    fn dg(mesh: Arc<Mesh>, el: DgElement, kind: ElementKind) -> Result<Self> {
        let n = el.dim();
        let num_dofs = n * mesh.num_cells();
        let cell_dofs = (0..mesh.num_cells()).map(|c| (c * n..(c + 1) * n).collect()).collect();
        let cell_signs = vec![vec![1.0; n]; mesh.num_cells()];
        let constrained = vec![false; num_dofs];
        Ok(Self::finish(mesh, kind, Element::Dg(el), num_dofs, cell_dofs, cell_signs, constrained))
    }

    fn finish(
        mesh: Arc<Mesh>,
        kind: ElementKind,
        element: Element,
        num_dofs: usize,
        cell_dofs: Vec<Vec<usize>>,
        cell_signs: Vec<Vec<f64>>,
        constrained: Vec<bool>,
    ) -> Self {
        let mut free_index = vec![None; num_dofs];
        let mut free_dofs = Vec::new();
        for (d, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[d] = Some(free_dofs.len());
                free_dofs.push(d);
            }
        }
        Self {
            mesh,
            kind,
            element,
            num_dofs,
            cell_dofs,
            cell_signs,
            constrained,
            free_index,
            free_dofs,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn element(&self) -> &Element {
        &self.element
    }

    pub fn bdm_element(&self) -> Option<&BdmElement> {
        match &self.element {
            Element::Bdm(e) => Some(e),
            Element::Dg(_) => None,
        }
    }

    pub fn dg_element(&self) -> Option<&DgElement> {
        match &self.element {
            Element::Dg(e) => Some(e),
            Element::Bdm(_) => None,
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self.kind, ElementKind::Bdm(_))
    }

    /// Polynomial degree of the local shape functions.
    pub fn degree(&self) -> usize {
        match self.kind {
            ElementKind::Bdm(m) => m,
            ElementKind::Dg(l) => l,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn num_constrained(&self) -> usize {
        self.num_dofs - self.num_free()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell]
    }

    pub fn cell_signs(&self, cell: usize) -> &[f64] {
        &self.cell_signs[cell]
    }

    /// Free-dof coefficients of a full coefficient vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }

    /// Full coefficient vector with zeros on constrained dofs.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs];
        for (&d, &v) in self.free_dofs.iter().zip(free) {
            out[d] = v;
        }
        out
    }

    /// Zeroes the constrained entries of a full coefficient vector.
    pub fn apply_constraints(&self, full: &mut [f64]) {
        for (v, &c) in full.iter_mut().zip(&self.constrained) {
            if c {
                *v = 0.0;
            }
        }
    }

    /// Interpolates a vector field into a BDM space with the canonical dof
    /// interpolant. Boundary dofs are kept as computed; apply
    /// [`FeSpace::apply_constraints`] for fields known to satisfy `v . n = 0`.
    pub fn interpolate_vector(&self, field: impl Fn(Vec2) -> Vec2) -> Result<Vec<f64>> {
        let el = self.bdm_element().ok_or_else(|| {
            Error::InvalidArgument("vector interpolation needs a BDM space".into())
        })?;
        let mut out = vec![0.0; self.num_dofs];
        for c in 0..self.mesh.num_cells() {
            let geo = self.mesh.geometry(c);
            let local = el.dofs(|x, y| piola_pullback(&geo, field(geo.map([x, y]))));
            for ((&d, &s), v) in self.cell_dofs[c].iter().zip(&self.cell_signs[c]).zip(local) {
                out[d] = s * v;
            }
        }
        Ok(out)
    }

    /// Cell-wise L2 projection of a scalar field into a DG space.
    pub fn interpolate_scalar(&self, field: impl Fn(Vec2) -> f64) -> Result<Vec<f64>> {
        let el = self.dg_element().ok_or_else(|| {
            Error::InvalidArgument("scalar projection needs a DG space".into())
        })?;
        let rule = triangle_rule((2 * el.order() + 8).min(crate::quadrature::MAX_TRIANGLE_DEGREE))?;
        let tabs: Vec<_> = rule.points.iter().map(|&p| el.eval_unchecked(p)).collect();
        let mut out = vec![0.0; self.num_dofs];
        for c in 0..self.mesh.num_cells() {
            let geo = self.mesh.geometry(c);
            let vals: Vec<f64> = rule.points.iter().map(|&p| field(geo.map(p))).collect();
            for (i, &d) in self.cell_dofs[c].iter().enumerate() {
                let m: f64 = rule
                    .weights
                    .iter()
                    .zip(&vals)
                    .zip(&tabs)
                    .map(|((w, v), t)| w * v * t.values[i])
                    .sum();
                out[d] = m / el.reference_mass()[i];
            }
        }
        Ok(out)
    }

    /// Evaluates a vector field given by full coefficients at a reference
    /// point of `cell`.
    pub fn eval_vector(&self, coeffs: &[f64], cell: usize, xhat: Vec2) -> VectorSample {
        let el = self.bdm_element().expect("vector space");
        let geo = self.mesh.geometry(cell);
        let tab = piola_map(&geo, &el.eval_unchecked(xhat));
        let mut out = VectorSample::default();
        for (i, (&d, &s)) in self.cell_dofs[cell].iter().zip(&self.cell_signs[cell]).enumerate() {
            let c = s * coeffs[d];
            out.value[0] += c * tab.values[i][0];
            out.value[1] += c * tab.values[i][1];
            out.div += c * tab.divs[i];
            for r in 0..2 {
                for k in 0..2 {
                    out.grad[r][k] += c * tab.grads[i][r][k];
                }
            }
        }
        out
    }

    /// Evaluates a scalar DG field at a reference point of `cell`: value and
    /// gradient.
    pub fn eval_scalar(&self, coeffs: &[f64], cell: usize, xhat: Vec2) -> (f64, Vec2) {
        let el = self.dg_element().expect("scalar space");
        let geo = self.mesh.geometry(cell);
        let tab = scalar_map(&geo, &el.eval_unchecked(xhat));
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (i, &d) in self.cell_dofs[cell].iter().enumerate() {
            v += coeffs[d] * tab.values[i];
            g[0] += coeffs[d] * tab.grads[i][0];
            g[1] += coeffs[d] * tab.grads[i][1];
        }
        (v, g)
    }

    /// Locates the cell containing `x` and evaluates there. Linear search;
    /// meant for tests and point probes.
    pub fn locate(&self, x: Vec2) -> Option<(usize, Vec2)> {
        (0..self.mesh.num_cells()).find_map(|c| {
            let r = self.mesh.geometry(c).pullback(x);
            let tol = 1e-12;
            (r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol).then_some((c, r))
        })
    }
}
