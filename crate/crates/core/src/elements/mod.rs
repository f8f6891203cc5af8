//! Reference finite elements and the affine maps that carry them to
//! physical cells.

mod bdm;
mod dg;

pub use bdm::BdmElement;
pub use dg::DgElement;

use crate::error::{Error, Result};
use crate::mesh::CellGeometry;

pub type Vec2 = [f64; 2];
/// `m[r][c]`.
pub type Mat2 = [[f64; 2]; 2];

/// Reference vertices of the unit triangle.
pub const REFERENCE_VERTICES: [Vec2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

const INSIDE_TOL: f64 = 1e-12;

pub(crate) fn check_reference_point(p: Vec2) -> Result<()> {
    if p[0] < -INSIDE_TOL || p[1] < -INSIDE_TOL || p[0] + p[1] > 1.0 + INSIDE_TOL {
        return Err(Error::PointOutsideCell(p[0], p[1]));
    }
    Ok(())
}

/// Vector basis tabulated at one point: values, divergences and Jacobians
/// (`grads[i][r][c] = d v_r / d x_c`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorTab {
    pub values: Vec<Vec2>,
    pub divs: Vec<f64>,
    pub grads: Vec<Mat2>,
}

/// Scalar basis tabulated at one point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarTab {
    pub values: Vec<f64>,
    pub grads: Vec<Vec2>,
}

pub(crate) fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Contravariant Piola transform: `v = J v_hat / det J`,
/// `div v = div_hat v_hat / det J`, `grad v = J grad_hat v_hat J^-1 / det J`.
pub fn piola_map(geo: &CellGeometry, reference: &VectorTab) -> VectorTab {
    let j = &geo.jac;
    let inv_det = 1.0 / geo.det;
    VectorTab {
        values: reference
            .values
            .iter()
            .map(|v| {
                [
                    inv_det * (j[0][0] * v[0] + j[0][1] * v[1]),
                    inv_det * (j[1][0] * v[0] + j[1][1] * v[1]),
                ]
            })
            .collect(),
        divs: reference.divs.iter().map(|d| d * inv_det).collect(),
        grads: reference
            .grads
            .iter()
            .map(|g| {
                let m = mat_mul(&mat_mul(j, g), &geo.inv);
                [
                    [m[0][0] * inv_det, m[0][1] * inv_det],
                    [m[1][0] * inv_det, m[1][1] * inv_det],
                ]
            })
            .collect(),
    }
}

/// Checked variant of [`piola_map`] rejecting degenerate cells.
pub fn piola_map_checked(
    geo: &CellGeometry,
    diameter: f64,
    reference: &VectorTab,
) -> Result<VectorTab> {
    check_nondegenerate(geo, diameter)?;
    Ok(piola_map(geo, reference))
}

pub(crate) fn check_nondegenerate(geo: &CellGeometry, diameter: f64) -> Result<()> {
    if geo.det.abs() < 1e-14 * diameter * diameter || !geo.det.is_finite() {
        return Err(Error::DegenerateCell {
            cell: usize::MAX,
            det: geo.det,
        });
    }
    Ok(())
}

/// Scalar pullback: values unchanged, gradients `J^-T grad_hat`.
pub fn scalar_map(geo: &CellGeometry, reference: &ScalarTab) -> ScalarTab {
    let inv = &geo.inv;
    ScalarTab {
        values: reference.values.clone(),
        grads: reference
            .grads
            .iter()
            .map(|g| {
                [
                    inv[0][0] * g[0] + inv[1][0] * g[1],
                    inv[0][1] * g[0] + inv[1][1] * g[1],
                ]
            })
            .collect(),
    }
}

/// Pulls a physical vector back to the reference cell, the inverse of the
/// contravariant Piola value map: `v_hat = det J J^-1 v`.
pub fn piola_pullback(geo: &CellGeometry, v: Vec2) -> Vec2 {
    let i = &geo.inv;
    [
        geo.det * (i[0][0] * v[0] + i[0][1] * v[1]),
        geo.det * (i[1][0] * v[0] + i[1][1] * v[1]),
    ]
}
