//! Independent evaluation of the manufactured sources: the exact fields as
//! Taylor jets substituted into the PDE.

#![allow(dead_code)]

use std::f64::consts::PI;

use biot_core::assembly::ModelParameters;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::jet::Jet;

struct Fields {
    u: [Jet; 2],
    w: [Jet; 2],
    p: Jet,
}

/// Exact fields, written directly from their defining formulas.
fn fields(params: &ModelParameters, x: f64, y: f64, t: f64) -> Fields {
    let (xj, yj, tj) = (Jet::variable(0, x), Jet::variable(1, y), Jet::variable(2, t));
    let one = Jet::constant(1.0);
    let (s, c) = tj.scale(PI).sin_cos();
    let omx = &one - &xj;
    let omy = &one - &yj;
    let x2 = xj.powi(2);
    let y2 = yj.powi(2);
    // 4x^3 - 6x^2 + 2x
    let dx = &(&xj.powi(3).scale(4.0) - &x2.scale(6.0)) + &xj.scale(2.0);
    let dy = &(&yj.powi(3).scale(4.0) - &y2.scale(6.0)) + &yj.scale(2.0);
    let u0 = &(&s * &(&y2 * &omy.powi(2))) * &dx;
    let u1 = &(&s * &(&x2 * &omx.powi(2))) * &dy;
    let coef = &c.scale(-params.rho_w * PI) + &s.scale(params.rho_f * PI * PI - 1.0);
    let bubble = &(&x2 * &omx.powi(2)) * &(&y2 * &omy.powi(2));
    let p = &coef * &(&bubble - &Jet::constant(1.0 / 900.0));
    Fields {
        u: [u0.clone(), u1.clone()],
        w: [u0, u1],
        p,
    }
}

const DX: [usize; 3] = [1, 0, 0];
const DY: [usize; 3] = [0, 1, 0];
const DT: [usize; 3] = [0, 0, 1];

fn d(j: &Jet, a: [usize; 3]) -> f64 {
    j.derivative(a)
}

fn add(a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// `rho_bar u_tt - 2 mu div eps(u) - lambda grad div u + alpha grad p + rho_f w_t`.
pub fn oracle_f(params: &ModelParameters, x: f64, y: f64, t: f64) -> [f64; 2] {
    let fl = fields(params, x, y, t);
    let grads = [DX, DY];
    let mut out = [0.0; 2];
    for i in 0..2 {
        // (div eps(u))_i = sum_j d_j (d_j u_i + d_i u_j) / 2
        let div_eps: f64 = (0..2)
            .map(|j| 0.5 * (d(&fl.u[i], add(grads[j], grads[j])) + d(&fl.u[j], add(grads[i], grads[j]))))
            .sum();
        let grad_div: f64 = (0..2).map(|j| d(&fl.u[j], add(grads[i], grads[j]))).sum();
        out[i] = params.rho_bar * d(&fl.u[i], [0, 0, 2]) - 2.0 * params.mu * div_eps
            - params.lambda * grad_div
            + params.alpha * d(&fl.p, grads[i])
            + params.rho_f * d(&fl.w[i], DT);
    }
    out
}

/// `s_0 p_t + alpha div u_t + div w`.
pub fn oracle_g(params: &ModelParameters, x: f64, y: f64, t: f64) -> f64 {
    let fl = fields(params, x, y, t);
    params.s0 * d(&fl.p, DT)
        + params.alpha * (d(&fl.u[0], add(DX, DT)) + d(&fl.u[1], add(DY, DT)))
        + d(&fl.w[0], DX)
        + d(&fl.w[1], DY)
}

/// `rho_f u_tt + rho_w w_t + K^-1 w + grad p`.
pub fn oracle_darcy(params: &ModelParameters, x: f64, y: f64, t: f64) -> [f64; 2] {
    let fl = fields(params, x, y, t);
    let w = [fl.w[0].value(), fl.w[1].value()];
    let grads = [DX, DY];
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = params.rho_f * d(&fl.u[i], [0, 0, 2])
            + params.rho_w * d(&fl.w[i], DT)
            + params.k_inv[i][0] * w[0]
            + params.k_inv[i][1] * w[1]
            + d(&fl.p, grads[i]);
    }
    out
}

pub fn random_points(n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
        .collect()
}
