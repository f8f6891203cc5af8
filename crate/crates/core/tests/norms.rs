mod common;

use biot_core::elements::{Mat2, Vec2};
use biot_core::mms::{default_parameters, Benchmark, ExactSolution, Field};
use biot_core::norms::*;
use biot_core::quadrature::triangle_rule;
use biot_core::spaces::FeSpace;
use biot_core::study::{run_convergence, run_level, StudyConfig};
use biot_core::timestepping::{NodeState, SlabState, TemporalMatrices, Trajectory};
use common::setup::*;

/// A time-independent discrete state posing as an exact solution.
struct Discrete<'a> {
    vector: &'a FeSpace,
    pressure: &'a FeSpace,
    state: NodeState,
}

impl Discrete<'_> {
    fn sample(&self, field: Field, x: Vec2) -> biot_core::spaces::VectorSample {
        let (c, r) = self.vector.locate(x).expect("inside");
        self.vector.eval_vector(&self.vector.extend(self.state.field(field)), c, r)
    }
}

impl ExactSolution for Discrete<'_> {
    fn vector(&self, field: Field, x: Vec2, _t: f64) -> Vec2 {
        self.sample(field, x).value
    }
    fn vector_grad(&self, field: Field, x: Vec2, _t: f64) -> Mat2 {
        self.sample(field, x).grad
    }
    fn pressure(&self, x: Vec2, _t: f64) -> f64 {
        let (c, r) = self.pressure.locate(x).expect("inside");
        self.pressure.eval_scalar(&self.state.p, c, r).0
    }
}

fn constant_trajectory(state: &NodeState, k: usize, slabs: usize, tau: f64) -> Trajectory {
    Trajectory {
        temporal: TemporalMatrices::new(k).unwrap(),
        slabs: (0..slabs)
            .map(|n| SlabState {
                index: n,
                t_start: n as f64 * tau,
                tau,
                nodes: vec![state.clone(); k + 1],
            })
            .collect(),
    }
}

#[test]
fn discrete_field_against_itself_is_zero() {
    let pr = default_parameters();
    let d = disc(2, 0, 1, &pr);
    let state = random_state(&d.ops, 4);
    let exact = Discrete {
        vector: &d.vector,
        pressure: &d.pressure,
        state: state.clone(),
    };
    let traj = constant_trajectory(&state, 2, 2, 0.5);
    for f in Field::ALL {
        let e = linf_l2_error(&traj, &d.vector, &d.pressure, &exact, f, 4).unwrap();
        assert!(e <= 1e-12, "{f:?}: {e:e}");
    }
}

#[test]
fn single_state_errors_match_direct_quadrature() {
    let pr = default_parameters();
    let d = disc(2, 1, 1, &pr);
    let exact = Discrete {
        vector: &d.vector,
        pressure: &d.pressure,
        state: random_state(&d.ops, 1),
    };
    let s = random_state(&d.ops, 2);
    let meter = ErrorMeter::new(&d.vector, &d.pressure, &exact, DEFAULT_SAMPLES).unwrap();
    let got = meter.errors_at_state(&s.u, &s.v, &s.w, &s.p, 0.3);

    // oracle: higher-order rule, direct pointwise evaluation
    let rule = triangle_rule(14).unwrap();
    let full = |f: Field| d.vector.extend(s.field(f));
    let (u, v, w) = (full(Field::U), full(Field::V), full(Field::W));
    let ex = |f: Field| d.vector.extend(exact.state.field(f));
    let (eu, ev, ew) = (ex(Field::U), ex(Field::V), ex(Field::W));
    let mut sums = [0.0; 4];
    for c in 0..d.mesh.num_cells() {
        let det = d.mesh.geometry(c).det.abs();
        for (x, wq) in rule.iter() {
            let a = d.vector.eval_vector(&u, c, *x).grad;
            let b = d.vector.eval_vector(&eu, c, *x).grad;
            let mut g = 0.0;
            for r in 0..2 {
                for k in 0..2 {
                    g += (a[r][k] - b[r][k]).powi(2);
                }
            }
            let dv = |p: &[f64], q: &[f64]| {
                let (a, b) = (d.vector.eval_vector(p, c, *x).value, d.vector.eval_vector(q, c, *x).value);
                (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
            };
            let dp = d.pressure.eval_scalar(&s.p, c, *x).0 - d.pressure.eval_scalar(&exact.state.p, c, *x).0;
            sums[0] += wq * det * g;
            sums[1] += wq * det * dv(&v, &ev);
            sums[2] += wq * det * dv(&w, &ew);
            sums[3] += wq * det * dp * dp;
        }
    }
    for r in 0..4 {
        let want = sums[r].sqrt();
        assert!((got[r] - want).abs() <= 1e-12 * want, "column {r}: {} vs {want}", got[r]);
    }
}

/// `int_0^1 int_0^1 f` by composite Simpson on an `n x n` grid.
fn simpson2(f: impl Fn(f64, f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let wt = |i: usize| {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut s = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            s += wt(i) * wt(j) * f(i as f64 * h, j as f64 * h);
        }
    }
    s * h * h / 9.0
}

#[test]
fn zero_discrete_field_gives_norms_of_the_exact_solution() {
    let pr = default_parameters();
    // fine enough that the degree-6 rule resolves the degree-12 integrand
    let d = benchmark_disc(2, 1);
    let bench = Benchmark::new(pr);
    let zero = NodeState::zeros(d.ops.num_vector(), d.ops.num_pressure());
    let traj = constant_trajectory(&zero, 1, 10, 0.1);
    let grad = linf_l2_error(&traj, &d.vector, &d.pressure, &bench, Field::U, DEFAULT_SAMPLES).unwrap();
    let v = linf_l2_error(&traj, &d.vector, &d.pressure, &bench, Field::V, DEFAULT_SAMPLES).unwrap();

    // spatial profile of u at t = 1/2, derivatives by central differences
    let h = 1e-5;
    let u = |x: f64, y: f64| bench.displacement([x, y], 0.5);
    let grad_sq = |x: f64, y: f64| {
        let dx = [(u(x + h, y)[0] - u(x - h, y)[0]) / (2.0 * h), (u(x + h, y)[1] - u(x - h, y)[1]) / (2.0 * h)];
        let dy = [(u(x, y + h)[0] - u(x, y - h)[0]) / (2.0 * h), (u(x, y + h)[1] - u(x, y - h)[1]) / (2.0 * h)];
        dx[0] * dx[0] + dx[1] * dx[1] + dy[0] * dy[0] + dy[1] * dy[1]
    };
    let want_grad = simpson2(grad_sq, 200).sqrt();
    assert!((grad - want_grad).abs() <= 1e-7 * want_grad, "{grad} vs {want_grad}");
    // v = pi cos(pi t) U peaks at t = 0
    let want_v = std::f64::consts::PI * simpson2(|x, y| u(x, y)[0].powi(2) + u(x, y)[1].powi(2), 200).sqrt();
    assert!((v - want_v).abs() <= 1e-7 * want_v, "{v} vs {want_v}");
}

/// A field that is quadratic in space with zero normal trace and linear in
/// time, so it lies in the discrete trial space for BDM_2, DG_1, cGP(1).
struct InSpace;

impl ExactSolution for InSpace {
    fn vector(&self, field: Field, x: Vec2, t: f64) -> Vec2 {
        let prof = [x[0] * (1.0 - x[0]), 2.0 * x[1] * (1.0 - x[1])];
        let c = match field {
            Field::U => 1.0 + 3.0 * t,
            Field::V => 3.0,
            _ => 2.0 - t,
        };
        [c * prof[0], c * prof[1]]
    }
    fn vector_grad(&self, field: Field, x: Vec2, t: f64) -> Mat2 {
        let c = match field {
            Field::U => 1.0 + 3.0 * t,
            Field::V => 3.0,
            _ => 2.0 - t,
        };
        [[c * (1.0 - 2.0 * x[0]), 0.0], [0.0, c * 2.0 * (1.0 - 2.0 * x[1])]]
    }
    fn pressure(&self, x: Vec2, t: f64) -> f64 {
        (1.0 + t) * (x[0] - 0.5) + 0.3 * (x[1] - 0.5)
    }
}

#[test]
fn fields_inside_the_space_have_zero_error() {
    let pr = default_parameters();
    let d = disc(3, 0, 1, &pr);
    let tau = 0.25;
    let slabs = (0..4)
        .map(|n| {
            let t0 = n as f64 * tau;
            SlabState {
                index: n,
                t_start: t0,
                tau,
                nodes: vec![
                    NodeState::from_exact(&d.vector, &d.pressure, &InSpace, t0).unwrap(),
                    NodeState::from_exact(&d.vector, &d.pressure, &InSpace, t0 + tau).unwrap(),
                ],
            }
        })
        .collect();
    let traj = Trajectory {
        temporal: TemporalMatrices::new(1).unwrap(),
        slabs,
    };
    assert!(broken_grad_error(&traj, &d.vector, &d.pressure, &InSpace, 20).unwrap() <= 1e-10);
    for f in [Field::V, Field::W, Field::P] {
        assert!(linf_l2_error(&traj, &d.vector, &d.pressure, &InSpace, f, 20).unwrap() <= 1e-10);
    }
}

#[test]
fn sample_count_barely_matters_on_the_benchmark() {
    let base = StudyConfig {
        levels: 1,
        ..StudyConfig::default()
    };
    let a = run_level(&base, 0).unwrap();
    let b = run_level(
        &StudyConfig {
            samples: 200,
            ..base.clone()
        },
        0,
    )
    .unwrap();
    for r in 0..4 {
        let rel = (a.errors[r] - b.errors[r]).abs() / b.errors[r];
        assert!(rel < 0.01, "column {r}: {rel}");
    }
}

#[test]
fn eoc_of_table_entries() {
    let r = eoc(&[2.781e-3, 7.373e-4]).unwrap();
    assert!((r[0] - 1.92).abs() < 0.005);
    let r = eoc(&[9.725e-4, 1.446e-4]).unwrap();
    assert!((r[0] - 2.75).abs() < 0.005);
    assert_eq!(eoc(&[4.0, 1.0]).unwrap(), vec![2.0]);
    assert!(eoc(&[1.0, 0.0]).is_err());
    assert!(eoc(&[1.0]).is_err());
}

#[test]
fn reports_are_deterministic() {
    let config = StudyConfig {
        levels: 2,
        samples: 10,
        end_time: 0.2,
        ..StudyConfig::default()
    };
    let a = run_convergence(&config, false).unwrap();
    let b = run_convergence(&config, true).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_csv(), run_convergence(&config, false).unwrap().to_csv());
    let csv = a.to_csv();
    let lines: Vec<&str> = csv.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",--,"));
    assert!(!lines[2].contains("--"));
}
