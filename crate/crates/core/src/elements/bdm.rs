use nalgebra::DMatrix;

use super::{check_reference_point, Vec2, VectorTab, REFERENCE_VERTICES};
use crate::error::{Error, Result};
use crate::polynomial::{self, monomials, Poly2};
use crate::quadrature::{gauss_rule, shifted_legendre, triangle_rule, LineRule, TriangleRule};

/// Brezzi-Douglas-Marini element of order `m` on the reference triangle.
///
/// Degrees of freedom, in order:
/// * for each local edge `i` (opposite vertex `i`, traversed counterclockwise)
///   the `m + 1` moments `int_e (v . n) P_j(s) ds`, `P_j` the Legendre
///   polynomial in the edge parameter `s in [0, 1]`;
/// * `(m - 1)(m + 1)` interior moments against `grad x^a y^b`
///   (`1 <= a + b <= m - 1`) and `curl(b_K x^a y^b)` (`a + b <= m - 2`),
///   `b_K = x y (1 - x - y)` the cubic bubble.
#[derive(Debug, Clone)]
pub struct BdmElement {
    order: usize,
    /// Nodal basis: two components per function.
    basis: Vec<[Poly2; 2]>,
    div: Vec<Poly2>,
    grad: Vec<[[Poly2; 2]; 2]>,
    edge_rule: LineRule,
    cell_rule: TriangleRule,
    interior_tests: Vec<[Poly2; 2]>,
}

pub(crate) struct RefEdge {
    pub start: Vec2,
    pub dir: Vec2,
    pub length: f64,
    pub normal: Vec2,
}

pub(crate) fn reference_edge(i: usize) -> RefEdge {
    let a = REFERENCE_VERTICES[(i + 1) % 3];
    let b = REFERENCE_VERTICES[(i + 2) % 3];
    let dir = [b[0] - a[0], b[1] - a[1]];
    let length = dir[0].hypot(dir[1]);
    RefEdge {
        start: a,
        dir,
        length,
        normal: [dir[1] / length, -dir[0] / length],
    }
}

impl BdmElement {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "BDM order {order} not supported (1..=3)"
            )));
        }
        let m = order;
        let mono = monomials(m);
        let primal: Vec<[Poly2; 2]> = (0..2)
            .flat_map(|comp| {
                mono.iter().map(move |&(a, b)| {
                    let p = Poly2::monomial(m, a, b);
                    let z = Poly2::zero(m);
                    if comp == 0 {
                        [p, z]
                    } else {
                        [z, p]
                    }
                })
            })
            .collect();

        let bubble = {
            // x y - x^2 y - x y^2
            let mut c = vec![0.0; polynomial::dim(3)];
            let mut set = |a: usize, b: usize, v: f64| {
                let idx = monomials(3).iter().position(|&e| e == (a, b)).unwrap();
                c[idx] = v;
            };
            set(1, 1, 1.0);
            set(2, 1, -1.0);
            set(1, 2, -1.0);
            Poly2::from_coeffs(3, c)
        };
        let mut interior_tests = Vec::new();
        for (a, b) in monomials(m - 1).into_iter().skip(1) {
            let q = Poly2::monomial(m - 1, a, b);
            interior_tests.push([q.dx(), q.dy()]);
        }
        if m >= 2 {
            for (a, b) in monomials(m - 2) {
                let psi = bubble.mul(&Poly2::monomial(m - 2, a, b));
                interior_tests.push([psi.dy(), psi.dx().scaled(-1.0)]);
            }
        }

        let mut element = Self {
            order: m,
            basis: Vec::new(),
            div: Vec::new(),
            grad: Vec::new(),
            edge_rule: gauss_rule(m + 2)?,
            cell_rule: triangle_rule(2 * m + 1)?,
            interior_tests,
        };
        let n = primal.len();
        debug_assert_eq!(n, element.dim());
        let mut dofs = DMatrix::zeros(n, n);
        for (j, p) in primal.iter().enumerate() {
            let values = element.dofs(|x, y| [p[0].eval(x, y), p[1].eval(x, y)]);
            for (i, v) in values.into_iter().enumerate() {
                dofs[(i, j)] = v;
            }
        }
        let coeffs = dofs
            .try_inverse()
            .ok_or_else(|| Error::Invariant("BDM dof matrix is singular".into()))?;
        element.basis = (0..n)
            .map(|k| {
                let col: Vec<&Poly2> = primal.iter().map(|p| &p[0]).collect();
                let row: Vec<f64> = (0..n).map(|j| coeffs[(j, k)]).collect();
                let c0 = Poly2::combine(&col, &row);
                let col: Vec<&Poly2> = primal.iter().map(|p| &p[1]).collect();
                let c1 = Poly2::combine(&col, &row);
                [c0, c1]
            })
            .collect();
        element.grad = element
            .basis
            .iter()
            .map(|[a, b]| [[a.dx(), a.dy()], [b.dx(), b.dy()]])
            .collect();
        element.div = element
            .grad
            .iter()
            .map(|g| Poly2::combine(&[&g[0][0], &g[1][1]], &[1.0, 1.0]))
            .collect();
        Ok(element)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `(m + 1)(m + 2)`.
    pub fn dim(&self) -> usize {
        (self.order + 1) * (self.order + 2)
    }

    pub fn dofs_per_facet(&self) -> usize {
        self.order + 1
    }

    /// `(m - 1)(m + 1)`.
    pub fn interior_dofs(&self) -> usize {
        (self.order - 1) * (self.order + 1)
    }

    pub fn facet_dof(&self, edge: usize, moment: usize) -> usize {
        edge * (self.order + 1) + moment
    }

    /// Sign relating the local facet moment `moment` to the global one, given
    /// whether the global facet normal is this cell's outward normal and
    /// whether the local edge runs along the global facet tangent.
    pub fn facet_dof_sign(&self, normal_outward: bool, edge_aligned: bool, moment: usize) -> f64 {
        let n = if normal_outward { 1.0 } else { -1.0 };
        let t = if edge_aligned || moment % 2 == 0 { 1.0 } else { -1.0 };
        n * t
    }

    /// Applies the degrees of freedom to a vector field given on the
    /// reference cell.
    pub fn dofs(&self, v: impl Fn(f64, f64) -> Vec2) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..3 {
            let e = reference_edge(i);
            for j in 0..=self.order {
                let moment = self
                    .edge_rule
                    .iter()
                    .map(|(&s, w)| {
                        let x = e.start[0] + s * e.dir[0];
                        let y = e.start[1] + s * e.dir[1];
                        let val = v(x, y);
                        w * (val[0] * e.normal[0] + val[1] * e.normal[1]) * shifted_legendre(j, s)
                    })
                    .sum::<f64>()
                    * e.length;
                out.push(moment);
            }
        }
        let vals: Vec<Vec2> = self.cell_rule.points.iter().map(|p| v(p[0], p[1])).collect();
        for q in &self.interior_tests {
            let moment = self
                .cell_rule
                .iter()
                .zip(&vals)
                .map(|((p, w), val)| w * (val[0] * q[0].eval(p[0], p[1]) + val[1] * q[1].eval(p[0], p[1])))
                .sum();
            out.push(moment);
        }
        out
    }

    pub fn eval(&self, p: Vec2) -> Result<VectorTab> {
        check_reference_point(p)?;
        Ok(self.eval_unchecked(p))
    }

    pub(crate) fn eval_unchecked(&self, p: Vec2) -> VectorTab {
        let (x, y) = (p[0], p[1]);
        VectorTab {
            values: self.basis.iter().map(|b| [b[0].eval(x, y), b[1].eval(x, y)]).collect(),
            divs: self.div.iter().map(|d| d.eval(x, y)).collect(),
            grads: self
                .grad
                .iter()
                .map(|g| {
                    [
                        [g[0][0].eval(x, y), g[0][1].eval(x, y)],
                        [g[1][0].eval(x, y), g[1][1].eval(x, y)],
                    ]
                })
                .collect(),
        }
    }

    pub fn basis(&self) -> &[[Poly2; 2]] {
        &self.basis
    }

    pub fn divergence(&self, i: usize) -> &Poly2 {
        &self.div[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(rng: &mut ChaCha8Rng, degree: usize) -> Poly2 {
        let c = (0..polynomial::dim(degree)).map(|_| rng.random_range(-1.0..1.0)).collect();
        Poly2::from_coeffs(degree, c)
    }

    #[test]
    fn dimensions() {
        let e1 = BdmElement::new(1).unwrap();
        assert_eq!(e1.dim(), 6);
        assert_eq!(e1.dofs_per_facet(), 2);
        assert_eq!(e1.interior_dofs(), 0);
        let e2 = BdmElement::new(2).unwrap();
        assert_eq!(e2.dim(), 12);
        assert_eq!(3 * e2.dofs_per_facet() + e2.interior_dofs(), 12);
        let e3 = BdmElement::new(3).unwrap();
        assert_eq!(e3.dim(), 20);
        assert_eq!(3 * e3.dofs_per_facet() + e3.interior_dofs(), 20);
        assert!(BdmElement::new(0).is_err());
        assert!(BdmElement::new(4).is_err());
    }

    #[test]
    fn nodal_property() {
        for m in 1..=3 {
            let el = BdmElement::new(m).unwrap();
            for (j, b) in el.basis.iter().enumerate() {
                let d = el.dofs(|x, y| [b[0].eval(x, y), b[1].eval(x, y)]);
                for (i, v) in d.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12, "m={m} dof {i} of basis {j}: {v}");
                }
            }
        }
    }

    #[test]
    fn interpolant_reproduces_full_polynomial_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 1..=3 {
            let el = BdmElement::new(m).unwrap();
            for _ in 0..10 {
                let (px, py) = (random_poly(&mut rng, m), random_poly(&mut rng, m));
                let d = el.dofs(|x, y| [px.eval(x, y), py.eval(x, y)]);
                for _ in 0..5 {
                    let x = rng.random_range(0.0..1.0);
                    let y = rng.random_range(0.0..(1.0 - x));
                    let tab = el.eval([x, y]).unwrap();
                    let mut v = [0.0; 2];
                    for (c, t) in d.iter().zip(&tab.values) {
                        v[0] += c * t[0];
                        v[1] += c * t[1];
                    }
                    assert!((v[0] - px.eval(x, y)).abs() < 1e-10);
                    assert!((v[1] - py.eval(x, y)).abs() < 1e-10);
                }
            }
        }
        let el = BdmElement::new(2).unwrap();
        let d = el.dofs(|_, _| [1.0, 0.0]);
        let tab = el.eval([0.3, 0.3]).unwrap();
        let v: Vec2 = d.iter().zip(&tab.values).fold([0.0, 0.0], |acc, (c, t)| {
            [acc[0] + c * t[0], acc[1] + c * t[1]]
        });
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn divergence_is_trace_of_jacobian_and_spans_lower_degree() {
        for m in 1..=3 {
            let el = BdmElement::new(m).unwrap();
            let tab = el.eval([0.2, 0.45]).unwrap();
            for (d, g) in tab.divs.iter().zip(&tab.grads) {
                assert!((d - (g[0][0] + g[1][1])).abs() < 1e-12);
            }
            // rank of the divergence coefficient matrix equals dim P_{m-1}
            let rows = polynomial::dim(m - 1);
            let mut mat = DMatrix::zeros(rows, el.dim());
            for (j, d) in el.div.iter().enumerate() {
                for (i, (a, b)) in monomials(m - 1).into_iter().enumerate() {
                    mat[(i, j)] = d.coeff(a, b);
                }
                for a in 0..=m {
                    for b in 0..=(m - a) {
                        if a + b == m {
                            assert!(d.coeff(a, b).abs() < 1e-10);
                        }
                    }
                }
            }
            assert_eq!(mat.rank(1e-9), rows);
        }
    }

    #[test]
    fn interior_functions_have_no_normal_trace() {
        for m in 2..=3 {
            let el = BdmElement::new(m).unwrap();
            for k in 3 * (m + 1)..el.dim() {
                for i in 0..3 {
                    let e = reference_edge(i);
                    for s in [0.0, 0.2, 0.5, 0.77, 1.0] {
                        let p = [e.start[0] + s * e.dir[0], e.start[1] + s * e.dir[1]];
                        let v = el.eval(p).unwrap().values[k];
                        assert!((v[0] * e.normal[0] + v[1] * e.normal[1]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    /// div of the interpolant equals the L2 projection of div v onto P_{m-1}.
    #[test]
    fn commuting_diagram() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rule = triangle_rule(12).unwrap();
        for m in 1..=3 {
            let el = BdmElement::new(m).unwrap();
            for _ in 0..5 {
                let (px, py) = (random_poly(&mut rng, m + 2), random_poly(&mut rng, m + 2));
                let div = Poly2::combine(&[&px.dx(), &py.dy()], &[1.0, 1.0]);
                let d = el.dofs(|x, y| [px.eval(x, y), py.eval(x, y)]);
                let interp_div = |x: f64, y: f64| {
                    d.iter().zip(&el.div).map(|(c, p)| c * p.eval(x, y)).sum::<f64>()
                };
                // moments against P_{m-1} agree, and interp_div lies in P_{m-1}
                for (a, b) in monomials(m - 1) {
                    let q = Poly2::monomial(m - 1, a, b);
                    let lhs = rule.integrate(|x, y| interp_div(x, y) * q.eval(x, y));
                    let rhs = rule.integrate(|x, y| div.eval(x, y) * q.eval(x, y));
                    assert!((lhs - rhs).abs() < 1e-10, "m={m}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn eval_rejects_outside_points() {
        let el = BdmElement::new(1).unwrap();
        assert!(el.eval([0.8, 0.8]).is_err());
        assert!(el.eval([-0.1, 0.2]).is_err());
        assert!(el.eval([1.0, 0.0]).is_ok());
    }
}
