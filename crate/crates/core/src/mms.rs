//! Manufactured solution of the convergence benchmark on `(0,1)^2 x (0,1]`.
//!
//! With `phi(x, y) = x^2 (1-x)^2 y^2 (1-y)^2` the exact fields are
//!
//! ```text
//! u = w = sin(pi t) grad phi,      v = pi cos(pi t) grad phi,
//! p     = c(t) (phi - 1/900),      c(t) = -rho_w pi cos(pi t) + (rho_f pi^2 - 1) sin(pi t).
//! ```
//!
//! Since `u = w` is a gradient and `K = I`, the dynamic Darcy law holds with
//! zero right-hand side. The sources `f` and `g` below are the closed forms
//! of the momentum and mass balance residuals.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::assembly::{lame_from_young, ModelParameters};
use crate::elements::{Mat2, Vec2};
use crate::error::Error;

/// Unknown fields of the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    /// Displacement.
    U,
    /// Solid velocity.
    V,
    /// Seepage flux.
    W,
    /// Pressure.
    P,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::U, Field::V, Field::W, Field::P];

    pub fn is_vector(self) -> bool {
        !matches!(self, Field::P)
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::U => "u",
            Field::V => "v",
            Field::W => "w",
            Field::P => "p",
        }
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "u" => Ok(Field::U),
            "v" => Ok(Field::V),
            "w" => Ok(Field::W),
            "p" => Ok(Field::P),
            _ => Err(Error::InvalidArgument(format!("unknown field '{s}'"))),
        }
    }
}

/// Field identifiers accepted by [`Benchmark::eval`], including the sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldId {
    Unknown(Field),
    MomentumSource,
    MassSource,
}

impl FromStr for FieldId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "f" => Ok(FieldId::MomentumSource),
            "g" => Ok(FieldId::MassSource),
            other => other.parse().map(FieldId::Unknown),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Vector(Vec2),
    Scalar(f64),
}

/// The exact quantities the error norms need at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExactSample {
    pub grad_u: Mat2,
    pub v: Vec2,
    pub w: Vec2,
    pub p: f64,
}

/// Analytic fields an error measurement compares against.
pub trait ExactSolution: Sync {
    fn vector(&self, field: Field, x: Vec2, t: f64) -> Vec2;
    /// Jacobian `d v_r / d x_c` of a vector field.
    fn vector_grad(&self, field: Field, x: Vec2, t: f64) -> Mat2;
    fn pressure(&self, x: Vec2, t: f64) -> f64;

    /// Samples at many points for one time.
    fn sample_points(&self, points: &[Vec2], t: f64, out: &mut Vec<ExactSample>) {
        out.clear();
        out.extend(points.iter().map(|&x| ExactSample {
            grad_u: self.vector_grad(Field::U, x, t),
            v: self.vector(Field::V, x, t),
            w: self.vector(Field::W, x, t),
            p: self.pressure(x, t),
        }));
    }
}

/// Benchmark parameters: `rho_bar = 0.95`, `rho_f = 1`, `rho_w = 2`,
/// `E = 100`, `nu = 0.35`, `alpha = 0.9`, `s_0 = 0.01`, `K = I`.
pub fn default_parameters() -> ModelParameters {
    let (lambda, mu) = lame_from_young(100.0, 0.35);
    ModelParameters {
        rho_bar: 0.95,
        rho_f: 1.0,
        rho_w: 2.0,
        alpha: 0.9,
        s0: 0.01,
        lambda,
        mu,
        k_inv: [[1.0, 0.0], [0.0, 1.0]],
        eta: None,
    }
}

/// `x^2 (1-x)^2` and its first three derivatives.
fn profile(x: f64) -> [f64; 4] {
    let x2 = x * x;
    [
        x2 * (1.0 - x) * (1.0 - x),
        2.0 * x - 6.0 * x2 + 4.0 * x2 * x,
        2.0 - 12.0 * x + 12.0 * x2,
        -12.0 + 24.0 * x,
    ]
}

/// Mean of `phi` over the unit square: `(1/30)^2`.
pub const PHI_MEAN: f64 = 1.0 / 900.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benchmark {
    pub params: ModelParameters,
}

impl Default for Benchmark {
    fn default() -> Self {
        Self {
            params: default_parameters(),
        }
    }
}

impl Benchmark {
    pub fn new(params: ModelParameters) -> Self {
        Self { params }
    }

    /// `phi`, `grad phi`, `Hess phi`, `Laplace phi`, `grad Laplace phi`.
    fn phi(x: Vec2) -> (f64, Vec2, Mat2, f64, Vec2) {
        let [a0, a1, a2, a3] = profile(x[0]);
        let [b0, b1, b2, b3] = profile(x[1]);
        (
            a0 * b0,
            [a1 * b0, a0 * b1],
            [[a2 * b0, a1 * b1], [a1 * b1, a0 * b2]],
            a2 * b0 + a0 * b2,
            [a3 * b0 + a1 * b2, a2 * b1 + a0 * b3],
        )
    }

    /// Time factor of the pressure.
    pub fn pressure_factor(&self, t: f64) -> f64 {
        let p = &self.params;
        -p.rho_w * PI * (PI * t).cos() + (p.rho_f * PI * PI - 1.0) * (PI * t).sin()
    }

    fn pressure_factor_dt(&self, t: f64) -> f64 {
        let p = &self.params;
        p.rho_w * PI * PI * (PI * t).sin() + (p.rho_f * PI * PI - 1.0) * PI * (PI * t).cos()
    }

    pub fn displacement(&self, x: Vec2, t: f64) -> Vec2 {
        let g = Self::phi(x).1;
        let s = (PI * t).sin();
        [s * g[0], s * g[1]]
    }

    pub fn velocity(&self, x: Vec2, t: f64) -> Vec2 {
        let g = Self::phi(x).1;
        let c = PI * (PI * t).cos();
        [c * g[0], c * g[1]]
    }

    pub fn flux(&self, x: Vec2, t: f64) -> Vec2 {
        self.displacement(x, t)
    }

    pub fn pressure_at(&self, x: Vec2, t: f64) -> f64 {
        self.pressure_factor(t) * (Self::phi(x).0 - PHI_MEAN)
    }

    /// Momentum source
    /// `f = rho_bar u_tt - 2 mu div eps(u) - lambda grad div u + alpha grad p + rho_f w_t`.
    pub fn momentum_source(&self, x: Vec2, t: f64) -> Vec2 {
        let p = &self.params;
        let (_, g, _, _, glap) = Self::phi(x);
        let (s, c) = ((PI * t).sin(), (PI * t).cos());
        // eps(grad phi) = Hess phi, so the elastic part is (2 mu + lambda) grad Laplace phi
        let a = -p.rho_bar * PI * PI * s + p.rho_f * PI * c + p.alpha * self.pressure_factor(t);
        let e = (2.0 * p.mu + p.lambda) * s;
        [a * g[0] - e * glap[0], a * g[1] - e * glap[1]]
    }

    /// Mass source `g = s_0 p_t + alpha div u_t + div w`.
    pub fn mass_source(&self, x: Vec2, t: f64) -> f64 {
        let p = &self.params;
        let (phi, _, _, lap, _) = Self::phi(x);
        p.s0 * self.pressure_factor_dt(t) * (phi - PHI_MEAN)
            + (p.alpha * PI * (PI * t).cos() + (PI * t).sin()) * lap
    }

    /// Residual of the dynamic Darcy law
    /// `rho_f u_tt + rho_w w_t + K^-1 w + grad p`.
    pub fn darcy_residual(&self, x: Vec2, t: f64) -> Vec2 {
        let p = &self.params;
        let g = Self::phi(x).1;
        let (s, c) = ((PI * t).sin(), (PI * t).cos());
        let u_tt = [-PI * PI * s * g[0], -PI * PI * s * g[1]];
        let w = self.flux(x, t);
        let w_t = [PI * c * g[0], PI * c * g[1]];
        let kw = [
            p.k_inv[0][0] * w[0] + p.k_inv[0][1] * w[1],
            p.k_inv[1][0] * w[0] + p.k_inv[1][1] * w[1],
        ];
        let cp = self.pressure_factor(t);
        [
            p.rho_f * u_tt[0] + p.rho_w * w_t[0] + kw[0] + cp * g[0],
            p.rho_f * u_tt[1] + p.rho_w * w_t[1] + kw[1] + cp * g[1],
        ]
    }

    pub fn sources(&self, x: Vec2, t: f64) -> (Vec2, f64) {
        (self.momentum_source(x, t), self.mass_source(x, t))
    }

    pub fn eval(&self, id: FieldId, x: Vec2, t: f64) -> Value {
        match id {
            FieldId::Unknown(Field::U) => Value::Vector(self.displacement(x, t)),
            FieldId::Unknown(Field::V) => Value::Vector(self.velocity(x, t)),
            FieldId::Unknown(Field::W) => Value::Vector(self.flux(x, t)),
            FieldId::Unknown(Field::P) => Value::Scalar(self.pressure_at(x, t)),
            FieldId::MomentumSource => Value::Vector(self.momentum_source(x, t)),
            FieldId::MassSource => Value::Scalar(self.mass_source(x, t)),
        }
    }
}

/// Evaluates a named field (`u`, `v`, `w`, `p`, `f`, `g`) of the default
/// benchmark.
pub fn eval_exact(name: &str, x: f64, y: f64, t: f64) -> Result<Value, Error> {
    Ok(Benchmark::default().eval(name.parse()?, [x, y], t))
}

impl ExactSolution for Benchmark {
    fn vector(&self, field: Field, x: Vec2, t: f64) -> Vec2 {
        match field {
            Field::U => self.displacement(x, t),
            Field::V => self.velocity(x, t),
            Field::W => self.flux(x, t),
            Field::P => panic!("pressure is scalar"),
        }
    }

    fn vector_grad(&self, field: Field, x: Vec2, t: f64) -> Mat2 {
        let h = Self::phi(x).2;
        let s = match field {
            Field::U | Field::W => (PI * t).sin(),
            Field::V => PI * (PI * t).cos(),
            Field::P => panic!("pressure is scalar"),
        };
        h.map(|r| r.map(|v| s * v))
    }

    fn pressure(&self, x: Vec2, t: f64) -> f64 {
        self.pressure_at(x, t)
    }

    fn sample_points(&self, points: &[Vec2], t: f64, out: &mut Vec<ExactSample>) {
        let s = (PI * t).sin();
        let c = PI * (PI * t).cos();
        let cp = self.pressure_factor(t);
        out.clear();
        out.extend(points.iter().map(|&x| {
            let (phi, g, h, _, _) = Self::phi(x);
            ExactSample {
                grad_u: h.map(|r| r.map(|v| s * v)),
                v: [c * g[0], c * g[1]],
                w: [s * g[0], s * g[1]],
                p: cp * (phi - PHI_MEAN),
            }
        }));
    }
}
