//! Small discretizations, random states and polynomial-in-time solutions
//! shared by the solver tests.

#![allow(dead_code)]

use biot_core::assembly::{ModelParameters, OperatorSet};
use biot_core::linalg::CsrMatrix;
use biot_core::mesh::Diagonal;
use biot_core::mms::default_parameters;
use biot_core::spaces::FeSpace;
use biot_core::study::Discretization;
use biot_core::timestepping::{Loads, NodeState};
use biot_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn disc(base: usize, level: usize, l: usize, params: &ModelParameters) -> Discretization {
    Discretization::new(base, Diagonal::Forward, level, l, params).unwrap()
}

pub fn benchmark_disc(level: usize, l: usize) -> Discretization {
    disc(5, level, l, &default_parameters())
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_state(ops: &OperatorSet, seed: u64) -> NodeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nv, np) = (ops.num_vector(), ops.num_pressure());
    NodeState {
        u: random_vec(&mut rng, nv),
        v: random_vec(&mut rng, nv),
        w: random_vec(&mut rng, nv),
        p: random_vec(&mut rng, np),
    }
}

/// A solution whose time dependence is a polynomial: `field(t) = sum_j
/// t^j c_j`, with `v` the derivative of `u`.
pub struct PolySolution {
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

fn poly_eval(c: &[Vec<f64>], t: f64, deriv: usize) -> Vec<f64> {
    let n = c[0].len();
    let mut out = vec![0.0; n];
    for (j, cj) in c.iter().enumerate() {
        if j < deriv {
            continue;
        }
        let mut f = 1.0;
        for m in 0..deriv {
            f *= (j - m) as f64;
        }
        let s = f * t.powi((j - deriv) as i32);
        for (o, x) in out.iter_mut().zip(cj) {
            *o += s * x;
        }
    }
    out
}

fn lin(terms: &[(f64, &CsrMatrix, &[f64])], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (c, m, x) in terms {
        for (o, y) in out.iter_mut().zip(m.spmv(x).unwrap()) {
            *o += c * y;
        }
    }
    out
}

impl PolySolution {
    pub fn random(ops: &OperatorSet, degree: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nv, np) = (ops.num_vector(), ops.num_pressure());
        let mut gen = |n| (0..=degree).map(|_| random_vec(&mut rng, n)).collect();
        Self {
            u: gen(nv),
            w: gen(nv),
            p: gen(np),
        }
    }

    /// Like [`PolySolution::random`], but every spatial part is the
    /// interpolant of a low-degree polynomial field: `(a x(1-x), b y(1-y))`
    /// for the vector fields and `c0 + c1 x + c2 y` for the pressure.
    pub fn polynomial(vector: &FeSpace, pressure: &FeSpace, degree: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vec_part = |rng: &mut ChaCha8Rng| {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let full = vector
                .interpolate_vector(|x| [a * x[0] * (1.0 - x[0]), b * x[1] * (1.0 - x[1])])
                .unwrap();
            vector.restrict(&full)
        };
        let u = (0..=degree).map(|_| vec_part(&mut rng)).collect();
        let w = (0..=degree).map(|_| vec_part(&mut rng)).collect();
        let p = (0..=degree)
            .map(|_| {
                let c = random_vec(&mut rng, 3);
                pressure.interpolate_scalar(|x| c[0] + c[1] * x[0] + c[2] * x[1]).unwrap()
            })
            .collect();
        Self { u, w, p }
    }

    pub fn state(&self, t: f64) -> NodeState {
        NodeState {
            u: poly_eval(&self.u, t, 0),
            v: poly_eval(&self.u, t, 1),
            w: poly_eval(&self.w, t, 0),
            p: poly_eval(&self.p, t, 0),
        }
    }

    /// Discrete loads obtained by substituting the solution into the
    /// semi-discrete equations.
    pub fn loads(&self, ops: &OperatorSet, pr: &ModelParameters, t: f64) -> Result<Loads> {
        let (nv, np) = (ops.num_vector(), ops.num_pressure());
        let u = poly_eval(&self.u, t, 0);
        let ut = poly_eval(&self.u, t, 1);
        let utt = poly_eval(&self.u, t, 2);
        let w = poly_eval(&self.w, t, 0);
        let wt = poly_eval(&self.w, t, 1);
        let p = poly_eval(&self.p, t, 0);
        let pt = poly_eval(&self.p, t, 1);
        let momentum = lin(
            &[
                (1.0, &ops.stiffness, &u),
                (pr.rho_bar, &ops.mass, &utt),
                (pr.rho_f, &ops.mass, &wt),
                (-pr.alpha, &ops.coupling_t, &p),
            ],
            nv,
        );
        let darcy = lin(
            &[
                (pr.rho_f, &ops.mass, &utt),
                (pr.rho_w, &ops.mass, &wt),
                (1.0, &ops.mass_kinv, &w),
                (-1.0, &ops.coupling_t, &p),
            ],
            nv,
        );
        let mass = lin(
            &[(pr.s0, &ops.mass_p, &pt), (pr.alpha, &ops.coupling, &ut), (1.0, &ops.coupling, &w)],
            np,
        );
        Ok(Loads {
            momentum,
            darcy: Some(darcy),
            mass,
        })
    }
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

pub fn state_rel_diff(a: &NodeState, b: &NodeState) -> f64 {
    [
        rel_diff(&a.u, &b.u),
        rel_diff(&a.v, &b.v),
        rel_diff(&a.w, &b.w),
        rel_diff(&a.p, &b.p),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Largest pointwise mass-balance residual `s0 p_t + alpha div u_t + div w`
/// at the Gauss times of a slab, over the points of a triangle rule in
/// every cell, relative to the largest of the three terms.
pub fn mass_balance_defect(
    d: &Discretization,
    pr: &ModelParameters,
    temporal: &biot_core::timestepping::TemporalMatrices,
    slab: &biot_core::timestepping::SlabState,
) -> f64 {
    use biot_core::mms::Field;
    let rule = biot_core::quadrature::triangle_rule(2 * d.pressure.degree() + 2).unwrap();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for s in &temporal.gauss.points {
        let t = slab.t_start + slab.tau * s;
        let ut = d.vector.extend(&slab.evaluate_derivative(&temporal.trial, t, Field::U));
        let w = d.vector.extend(&slab.evaluate(&temporal.trial, t, Field::W));
        let pt = slab.evaluate_derivative(&temporal.trial, t, Field::P);
        for c in 0..d.mesh.num_cells() {
            for (x, _) in rule.iter() {
                let a = pr.s0 * d.pressure.eval_scalar(&pt, c, *x).0;
                let b = pr.alpha * d.vector.eval_vector(&ut, c, *x).div;
                let e = d.vector.eval_vector(&w, c, *x).div;
                worst = worst.max((a + b + e).abs());
                scale = scale.max(a.abs()).max(b.abs()).max(e.abs());
            }
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}
