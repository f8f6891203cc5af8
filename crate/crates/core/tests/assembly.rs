use std::sync::Arc;

use biot_core::assembly::*;
use biot_core::linalg::{dot, solve, CsrMatrix};
use biot_core::mesh::{unit_square_mesh, Diagonal, Mesh};
use biot_core::quadrature::triangle_rule;
use biot_core::spaces::{ElementKind, FeSpace};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(m: usize) -> Arc<Mesh> {
    Arc::new(unit_square_mesh(m, Diagonal::Forward).unwrap())
}

fn dense(m: &CsrMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m.get(i, j))
}

fn random_free_field(space: &FeSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let free: Vec<f64> = (0..space.num_free()).map(|_| rng.random_range(-1.0..1.0)).collect();
    space.extend(&free)
}

#[test]
fn p0_mass_is_cell_areas() {
    let p = FeSpace::new(mesh(1), ElementKind::Dg(0)).unwrap();
    let m = assemble_mass(&p, Weight::Scalar(1.0)).unwrap();
    assert_eq!(m.to_dense(), vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
}

#[test]
fn zero_weight_gives_zero_matrix() {
    let v = FeSpace::new(mesh(2), ElementKind::Bdm(2)).unwrap();
    let m = assemble_mass(&v, Weight::Tensor([[0.0; 2]; 2])).unwrap();
    assert_eq!(m.nnz(), 0);
    assert!(assemble_mass(&v, Weight::Tensor([[1.0, 0.0], [0.0, -1.0]])).is_err());
}

#[test]
fn vector_mass_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rule = triangle_rule(12).unwrap();
    for order in 1..=3 {
        let v = FeSpace::new(mesh(3), ElementKind::Bdm(order)).unwrap();
        let m = assemble_mass(&v, Weight::Scalar(1.0)).unwrap();
        assert!(m.asymmetry() < 1e-13);
        let x: Vec<f64> = (0..v.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle: f64 = (0..v.mesh().num_cells())
            .map(|c| {
                let det = v.mesh().geometry(c).det.abs();
                rule.integrate(|a, b| {
                    let s = v.eval_vector(&x, c, [a, b]).value;
                    s[0] * s[0] + s[1] * s[1]
                }) * det
            })
            .sum();
        let got = m.quadratic_form(&x);
        assert!((got - oracle).abs() < 1e-12 * oracle, "order {order}: {got} vs {oracle}");
    }
}

#[test]
fn elasticity_is_symmetric_and_kills_translations_inside() {
    for order in 1..=3 {
        let v = FeSpace::new(mesh(3), ElementKind::Bdm(order)).unwrap();
        let a = assemble_elasticity_dg(&v, 2.0, 3.0, 20.0).unwrap();
        assert!(a.asymmetry() < 1e-12);
        // translation: no strain, no divergence, no interior tangential jumps
        let x = v.interpolate_vector(|_| [1.0, 0.0]).unwrap();
        let vol = assemble_elasticity_volume(&v, 2.0, 3.0).unwrap();
        let inner = assemble_elasticity_facets(&v, 2.0, 20.0, FacetSet::Interior).unwrap();
        let ax = vol
            .add_scaled(&inner.consistency, 1.0)
            .unwrap()
            .add_scaled(&inner.penalty, 1.0)
            .unwrap()
            .spmv(&x)
            .unwrap();
        let scale = a.max_abs();
        assert!(ax.iter().all(|v| v.abs() < 1e-11 * scale), "order {order}");
        // the boundary penalty sees the nonzero tangential trace
        assert!(a.quadratic_form(&x) > 0.0);
    }
}

#[test]
fn penalty_scales_linearly() {
    let v = FeSpace::new(mesh(2), ElementKind::Bdm(2)).unwrap();
    let a1 = assemble_elasticity_dg(&v, 1.5, 2.0, 10.0).unwrap();
    let a2 = assemble_elasticity_dg(&v, 1.5, 2.0, 20.0).unwrap();
    let pen = assemble_elasticity_facets(&v, 1.5, 10.0, FacetSet::All).unwrap().penalty;
    let diff = a2.add_scaled(&a1, -1.0).unwrap().add_scaled(&pen, -1.0).unwrap();
    assert!(diff.max_abs() < 1e-12 * a2.max_abs());
    assert!(assemble_elasticity_dg(&v, 1.5, 2.0, 0.0).is_err());
}

/// Smallest generalized eigenvalue of (A, M) on the constrained space.
fn coercivity(v: &FeSpace, eta: f64) -> f64 {
    let free = v.free_dofs();
    let a = dense(&assemble_elasticity_dg(v, 1.0, 1.0, eta).unwrap().select(free, free));
    let m = dense(&assemble_mass(v, Weight::Scalar(1.0)).unwrap().select(free, free));
    let l = m.cholesky().unwrap().l();
    let linv = l.try_inverse().unwrap();
    let s = &linv * a * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    s.symmetric_eigenvalues().min()
}

#[test]
fn default_penalty_gives_coercive_form() {
    for l in 0..=2 {
        let eta = default_penalty(l);
        let v = FeSpace::new(mesh(1), ElementKind::Bdm(l + 1)).unwrap();
        assert!(coercivity(&v, eta) > 1e-3, "l = {l}");
        let v = FeSpace::new(mesh(3), ElementKind::Bdm(l + 1)).unwrap();
        let free = v.free_dofs();
        let a = dense(&assemble_elasticity_dg(&v, 1.0, 1.0, eta).unwrap().select(free, free));
        assert!(a.cholesky().is_some(), "l = {l}");
    }
}

#[test]
fn divergence_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for l in 0..=2 {
        let msh = mesh(3);
        let v = FeSpace::new(msh.clone(), ElementKind::Bdm(l + 1)).unwrap();
        let p = FeSpace::new(msh, ElementKind::Dg(l)).unwrap();
        let b = assemble_div_coupling(&v, &p).unwrap();
        // constants integrate div over the domain: zero for H0(div) fields
        let ones = p.interpolate_scalar(|_| 1.0).unwrap();
        let x = random_free_field(&v, &mut rng);
        let bx = b.spmv(&x).unwrap();
        let scale = bx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(dot(&ones, &bx).abs() < 1e-12 * scale.max(1.0));
        // (x, y) has divergence 2
        let x = v.interpolate_vector(|p| p).unwrap();
        let bx = b.spmv(&x).unwrap();
        let expect = assemble_load_scalar(&p, |_| 2.0).unwrap();
        for (u, w) in bx.iter().zip(&expect) {
            assert!((u - w).abs() < 1e-12);
        }
        assert!(b.spmv(&vec![0.0; v.num_dofs()]).unwrap().iter().all(|&v| v == 0.0));
    }
    let other = FeSpace::new(mesh(2), ElementKind::Dg(0)).unwrap();
    let v = FeSpace::new(mesh(2), ElementKind::Bdm(1)).unwrap();
    assert!(assemble_div_coupling(&v, &other).is_err());
}

#[test]
fn simple_loads() {
    let v = FeSpace::new(mesh(2), ElementKind::Bdm(2)).unwrap();
    assert!(assemble_load_vector(&v, |_| [0.0, 0.0]).unwrap().iter().all(|&x| x == 0.0));
    let p = FeSpace::new(mesh(2), ElementKind::Dg(0)).unwrap();
    let g = assemble_load_scalar(&p, |_| 3.0).unwrap();
    for (c, v) in g.iter().enumerate() {
        assert!((v - 3.0 * p.mesh().cell_area(c)).abs() < 1e-15);
    }
}

/// `u = (y - y^2, x - x^2)` has zero tangential trace on the boundary and
/// lies in every BDM_m with m >= 2, so the discrete solution is exact.
#[test]
fn stationary_elasticity_reproduces_quadratic() {
    let (mu, lambda) = (1.3, 2.1);
    for order in [2, 3] {
        let v = FeSpace::new(mesh(4), ElementKind::Bdm(order)).unwrap();
        let eta = default_penalty(order - 1);
        let a = assemble_elasticity_dg(&v, mu, lambda, eta).unwrap();
        let exact = v.interpolate_vector(|p| [p[1] - p[1] * p[1], p[0] - p[0] * p[0]]).unwrap();
        let f = assemble_load_vector(&v, |_| [2.0 * mu, 2.0 * mu]).unwrap();
        let free = v.free_dofs();
        let constrained: Vec<usize> = (0..v.num_dofs()).filter(|&d| v.is_constrained(d)).collect();
        let a_ff = a.select(free, free);
        let a_fc = a.select(free, &constrained);
        let xc: Vec<f64> = constrained.iter().map(|&d| exact[d]).collect();
        let lift = a_fc.spmv(&xc).unwrap();
        let rhs: Vec<f64> = free.iter().zip(&lift).map(|(&d, l)| f[d] - l).collect();
        let x = solve(&a_ff, &rhs).unwrap();
        for (&d, xi) in free.iter().zip(&x) {
            assert!((exact[d] - xi).abs() < 1e-9, "order {order}: dof {d}");
        }
    }
}

#[test]
fn operator_set_invariants() {
    let msh = mesh(5);
    let v = FeSpace::new(msh.clone(), ElementKind::Bdm(2)).unwrap();
    let p = FeSpace::new(msh, ElementKind::Dg(1)).unwrap();
    let (lambda, mu) = lame_from_young(100.0, 0.35);
    let params = ModelParameters {
        rho_bar: 0.95,
        rho_f: 1.0,
        rho_w: 2.0,
        alpha: 0.9,
        s0: 0.01,
        lambda,
        mu,
        k_inv: [[1.0, 0.0], [0.0, 1.0]],
        eta: None,
    };
    let ops = OperatorSet::assemble(&v, &p, &params).unwrap();
    assert_eq!(ops.num_vector(), 405 - 60);
    assert_eq!(ops.num_pressure(), 150);
    for m in [&ops.mass, &ops.mass_kinv, &ops.mass_p, &ops.stiffness] {
        assert!(m.asymmetry() < 1e-12);
    }
    assert!(dense(&ops.mass).cholesky().is_some());
    assert!(dense(&ops.mass_p).cholesky().is_some());
    assert!(dense(&ops.stiffness).cholesky().is_some());
    assert_eq!(ops.coupling_t, ops.coupling.transpose());
    assert_eq!(ops.coupling_t.transpose(), ops.coupling);
}

#[test]
fn assembly_is_thread_count_independent() {
    let v = FeSpace::new(mesh(4), ElementKind::Bdm(3)).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a1 = one.install(|| assemble_elasticity_dg(&v, 1.0, 2.0, 30.0).unwrap());
    let a4 = four.install(|| assemble_elasticity_dg(&v, 1.0, 2.0, 30.0).unwrap());
    assert_eq!(a1, a4);
}
