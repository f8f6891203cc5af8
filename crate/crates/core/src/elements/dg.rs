use nalgebra::DMatrix;

use super::{check_reference_point, ScalarTab, Vec2};
use crate::error::{Error, Result};
use crate::polynomial::{monomials, Poly2};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Discontinuous scalar `P_l` element with an orthogonal basis on the
/// reference triangle. Basis functions are monic Gram-Schmidt
/// orthogonalizations of the monomials, so the first one is the constant 1.
#[derive(Debug, Clone)]
pub struct DgElement {
    order: usize,
    basis: Vec<Poly2>,
    grad: Vec<[Poly2; 2]>,
    /// Reference mass matrix diagonal.
    mass: Vec<f64>,
}

impl DgElement {
    pub fn new(order: usize) -> Result<Self> {
        if order > 4 {
            return Err(Error::InvalidArgument(format!("P_{order} not supported")));
        }
        let mono = monomials(order);
        let n = mono.len();
        // exact monomial Gram matrix on the reference triangle
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (mono[i].0 + mono[j].0, mono[i].1 + mono[j].1);
            factorial(a) * factorial(b) / factorial(a + b + 2)
        });
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Invariant("monomial Gram matrix not SPD".into()))?;
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invariant("singular Cholesky factor".into()))?;
        let monos: Vec<Poly2> = mono.iter().map(|&(a, b)| Poly2::monomial(order, a, b)).collect();
        let refs: Vec<&Poly2> = monos.iter().collect();
        let basis: Vec<Poly2> = (0..n)
            .map(|k| {
                let row: Vec<f64> = (0..n).map(|j| l[(k, k)] * linv[(k, j)]).collect();
                Poly2::combine(&refs, &row)
            })
            .collect();
        let mass = (0..n).map(|k| l[(k, k)] * l[(k, k)]).collect();
        let grad = basis.iter().map(|b| [b.dx(), b.dy()]).collect();
        Ok(Self {
            order,
            basis,
            grad,
            mass,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        (self.order + 1) * (self.order + 2) / 2
    }

    /// Diagonal of the reference-cell mass matrix.
    pub fn reference_mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn basis(&self) -> &[Poly2] {
        &self.basis
    }

    pub fn eval(&self, p: Vec2) -> Result<ScalarTab> {
        check_reference_point(p)?;
        Ok(self.eval_unchecked(p))
    }

    pub(crate) fn eval_unchecked(&self, p: Vec2) -> ScalarTab {
        let (x, y) = (p[0], p[1]);
        ScalarTab {
            values: self.basis.iter().map(|b| b.eval(x, y)).collect(),
            grads: self.grad.iter().map(|g| [g[0].eval(x, y), g[1].eval(x, y)]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;

    #[test]
    fn constants_and_linears() {
        let p0 = DgElement::new(0).unwrap();
        assert_eq!(p0.dim(), 1);
        for p in [[0.0, 0.0], [0.3, 0.3], [1.0, 0.0]] {
            assert_eq!(p0.eval(p).unwrap().values, vec![1.0]);
        }

        // f(x, y) = x reproduced by its L2 projection
        let p1 = DgElement::new(1).unwrap();
        assert_eq!(p1.dim(), 3);
        let rule = triangle_rule(4).unwrap();
        let coeffs: Vec<f64> = (0..3)
            .map(|i| {
                rule.integrate(|x, y| x * p1.basis[i].eval(x, y)) / p1.reference_mass()[i]
            })
            .collect();
        for p in [[0.1, 0.2], [0.5, 0.4], [0.0, 1.0]] {
            let tab = p1.eval(p).unwrap();
            let v: f64 = coeffs.iter().zip(&tab.values).map(|(c, v)| c * v).sum();
            assert!((v - p[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn reference_mass_is_diagonal() {
        for order in 0..=3 {
            let el = DgElement::new(order).unwrap();
            let rule = triangle_rule(2 * order).unwrap();
            for i in 0..el.dim() {
                for j in 0..el.dim() {
                    let m = rule.integrate(|x, y| el.basis[i].eval(x, y) * el.basis[j].eval(x, y));
                    let expect = if i == j { el.reference_mass()[i] } else { 0.0 };
                    assert!((m - expect).abs() < 1e-13, "P{order} ({i},{j}) = {m}");
                }
            }
        }
        assert_eq!(DgElement::new(2).unwrap().dim(), 6);
    }
}
