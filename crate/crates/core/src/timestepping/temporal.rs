use crate::error::{Error, Result};
use crate::quadrature::{gauss_lobatto_rule, gauss_rule, LineRule};

/// Lagrange basis on a set of distinct nodes, evaluated in barycentric form.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: Vec<f64>) -> Self {
        let weights = (0..nodes.len())
            .map(|j| {
                1.0 / (0..nodes.len())
                    .filter(|&m| m != j)
                    .map(|m| nodes[j] - nodes[m])
                    .product::<f64>()
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values of all basis polynomials at `s`.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        if let Some(j) = self.nodes.iter().position(|&x| x == s) {
            let mut out = vec![0.0; self.nodes.len()];
            out[j] = 1.0;
            return out;
        }
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w / (s - x))
            .collect();
        let sum: f64 = terms.iter().sum();
        terms.iter().map(|t| t / sum).collect()
    }

    /// Derivatives of all basis polynomials at `s`.
    pub fn eval_derivative(&self, s: f64) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|j| {
                // sum over m != j of prod_{r != j, m} (s - x_r), times w_j
                let mut total = 0.0;
                for m in 0..n {
                    if m == j {
                        continue;
                    }
                    let mut prod = 1.0;
                    for r in 0..n {
                        if r != j && r != m {
                            prod *= s - self.nodes[r];
                        }
                    }
                    total += prod;
                }
                self.weights[j] * total
            })
            .collect()
    }
}

/// Reference-interval coupling matrices of cGP(k): trial functions are the
/// Lagrange polynomials at the `k + 1` Gauss-Lobatto nodes, test functions the
/// Lagrange polynomials at the `k` Gauss nodes.
///
/// `alpha[i][j] = int_0^1 (L^GL_j)' L^G_i ds` and
/// `beta[i][j] = int_0^1 L^GL_j L^G_i ds`, both evaluated exactly by the
/// `k`-point Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMatrices {
    pub k: usize,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub lobatto: LineRule,
    pub gauss: LineRule,
    pub trial: LagrangeBasis,
    pub test: LagrangeBasis,
}

impl TemporalMatrices {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("cGP degree must be at least 1".into()));
        }
        let lobatto = gauss_lobatto_rule(k + 1)?;
        let gauss = gauss_rule(k)?;
        let trial = LagrangeBasis::new(lobatto.points.clone());
        let test = LagrangeBasis::new(gauss.points.clone());
        let mut alpha = vec![vec![0.0; k + 1]; k];
        let mut beta = vec![vec![0.0; k + 1]; k];
        for (&s, w) in gauss.iter() {
            let phi = trial.eval(s);
            let dphi = trial.eval_derivative(s);
            let psi = test.eval(s);
            for i in 0..k {
                for j in 0..=k {
                    alpha[i][j] += w * dphi[j] * psi[i];
                    beta[i][j] += w * phi[j] * psi[i];
                }
            }
        }
        Ok(Self {
            k,
            alpha,
            beta,
            lobatto,
            gauss,
            trial,
            test,
        })
    }
}
