use crate::elements::Mat2;
use crate::error::{Error, Result};

/// Material and discretization parameters of the dynamic Biot system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParameters {
    /// Total density.
    pub rho_bar: f64,
    /// Fluid density.
    pub rho_f: f64,
    /// Effective fluid density.
    pub rho_w: f64,
    /// Biot-Willis coefficient.
    pub alpha: f64,
    /// Constrained storage coefficient.
    pub s0: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Inverse permeability tensor.
    pub k_inv: Mat2,
    /// Interior penalty parameter; `None` selects [`default_penalty`].
    pub eta: Option<f64>,
}

/// `4 (l + 2)^2` for pressure degree `l`.
pub fn default_penalty(pressure_degree: usize) -> f64 {
    let l = pressure_degree as f64 + 2.0;
    4.0 * l * l
}

/// Lame parameters `(lambda, mu)` from Young's modulus and Poisson's ratio.
pub fn lame_from_young(e: f64, nu: f64) -> (f64, f64) {
    (nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
}

pub(crate) fn is_psd(m: &Mat2, strict: bool) -> bool {
    let sym = (m[0][1] - m[1][0]).abs() <= 1e-14 * (m[0][1].abs() + m[1][0].abs() + 1.0);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    if strict {
        sym && m[0][0] > 0.0 && det > 0.0
    } else {
        sym && m[0][0] >= 0.0 && m[1][1] >= 0.0 && det >= -1e-14 * tr * tr
    }
}

impl ModelParameters {
    /// Density coupling matrix `[[rho_bar, rho_f], [rho_f, rho_w]]`.
    pub fn density_matrix(&self) -> Mat2 {
        [[self.rho_bar, self.rho_f], [self.rho_f, self.rho_w]]
    }

    pub fn penalty(&self, pressure_degree: usize) -> f64 {
        self.eta.unwrap_or_else(|| default_penalty(pressure_degree))
    }

    /// Checks the sign conditions. `K^-1` has to be positive definite when
    /// `strict_permeability` is set and positive semidefinite otherwise.
    pub fn validate(&self, strict_permeability: bool) -> Result<()> {
        let fail = |what: &str| Err(Error::InvalidArgument(format!("model parameters: {what}")));
        let all = [self.rho_bar, self.rho_f, self.rho_w, self.alpha, self.s0, self.lambda, self.mu];
        if all.iter().any(|v| !v.is_finite()) || self.k_inv.iter().flatten().any(|v| !v.is_finite()) {
            return fail("non-finite value");
        }
        if self.rho_bar <= 0.0 || self.rho_w <= 0.0 {
            return fail("densities must be positive");
        }
        if self.rho_bar * self.rho_w - self.rho_f * self.rho_f <= 0.0 {
            return fail("density matrix is not positive definite");
        }
        if self.mu <= 0.0 || self.lambda <= 0.0 {
            return fail("Lame parameters must be positive");
        }
        if self.s0 <= 0.0 {
            return fail("storage coefficient must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail("Biot-Willis coefficient must lie in (0, 1]");
        }
        if !is_psd(&self.k_inv, strict_permeability) {
            return fail("inverse permeability is not symmetric positive (semi)definite");
        }
        if let Some(eta) = self.eta {
            if eta <= 0.0 {
                return fail("penalty must be positive");
            }
        }
        Ok(())
    }
}
