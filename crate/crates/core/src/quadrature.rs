//! Gauss and Gauss-Lobatto rules on `[0, 1]` and collapsed-product rules on
//! the reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.

use crate::error::{Error, Result};

/// Highest polynomial degree the triangle rules are built for.
pub const MAX_TRIANGLE_DEGREE: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    /// Polynomials up to this total degree are integrated exactly.
    pub degree: usize,
}

pub type LineRule = QuadratureRule<f64>;
pub type TriangleRule = QuadratureRule<[f64; 2]>;

impl<P> QuadratureRule<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

impl LineRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(&t, w)| w * f(t)).sum()
    }
}

impl TriangleRule {
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p[0], p[1])).sum()
    }
}

/// Legendre polynomial `P_n(x)` on `[-1, 1]` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    // derivative from the three-term relation; fine away from x = +-1
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    } else {
        let s = if x > 0.0 { 1.0 } else if n % 2 == 0 { -1.0 } else { 1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    };
    (p1, dp)
}

/// Legendre polynomial shifted to `[0, 1]`: `P_n(2s - 1)`.
pub fn shifted_legendre(n: usize, s: f64) -> f64 {
    legendre(n, 2.0 * s - 1.0).0
}

fn newton(mut x: f64, f: impl Fn(f64) -> (f64, f64)) -> f64 {
    for _ in 0..100 {
        let (v, d) = f(x);
        let dx = v / d;
        x -= dx;
        if dx.abs() < 1e-15 {
            break;
        }
    }
    x
}

/// Nodes and weights of the `k`-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre_pm1(k: usize) -> (Vec<f64>, Vec<f64>) {
    match k {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3.0_f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = 0.6_f64.sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => {
            let mut nodes = vec![0.0; k];
            let mut weights = vec![0.0; k];
            for i in 0..k.div_ceil(2) {
                let guess = -(std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
                let x = newton(guess, |x| legendre(k, x));
                let (_, d) = legendre(k, x);
                let w = 2.0 / ((1.0 - x * x) * d * d);
                nodes[i] = x;
                weights[i] = w;
                nodes[k - 1 - i] = -x;
                weights[k - 1 - i] = w;
            }
            if k % 2 == 1 {
                nodes[k / 2] = 0.0;
            }
            (nodes, weights)
        }
    }
}

/// `k`-point Gauss rule on `[0, 1]`, exact for degree `2k - 1`.
pub fn gauss_rule(k: usize) -> Result<LineRule> {
    if k == 0 {
        return Err(Error::InvalidArgument("Gauss rule needs at least one point".into()));
    }
    let (x, w) = gauss_legendre_pm1(k);
    Ok(LineRule {
        points: x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        degree: 2 * k - 1,
    })
}

/// `n`-point Gauss-Lobatto rule on `[0, 1]` including both endpoints,
/// exact for degree `2n - 3`.
pub fn gauss_lobatto_rule(n: usize) -> Result<LineRule> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "Gauss-Lobatto rule needs at least two points".into(),
        ));
    }
    let k = n - 1;
    let kf = k as f64;
    // interior nodes are the roots of P_k'
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[k] = 1.0;
    match n {
        2 => {}
        3 => x[1] = 0.0,
        4 => {
            let a = 0.2_f64.sqrt();
            x[1] = -a;
            x[2] = a;
        }
        _ => {
            for i in 1..=(k / 2) {
                let guess = -(std::f64::consts::PI * i as f64 / kf).cos();
                let r = newton(guess, |x| {
                    let (p, dp) = legendre(k, x);
                    // (1 - x^2) P'' = 2x P' - k(k+1) P
                    let ddp = (2.0 * x * dp - kf * (kf + 1.0) * p) / (1.0 - x * x);
                    (dp, ddp)
                });
                x[i] = r;
                x[k - i] = -r;
            }
            if k % 2 == 0 {
                x[k / 2] = 0.0;
            }
        }
    }
    let weights = x
        .iter()
        .map(|&xi| {
            let p = legendre(k, xi).0;
            0.5 * 2.0 / (kf * (kf + 1.0) * p * p)
        })
        .collect();
    Ok(LineRule {
        points: x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights,
        degree: 2 * n - 3,
    })
}

/// Positive-weight rule on the reference triangle exact for all monomials
/// `x^a y^b` with `a + b <= degree`.
///
/// Built as a Gauss product rule on the unit square pulled through the
/// collapse `(s, t) -> (s (1 - t), t)`, whose Jacobian `1 - t` raises the
/// degree in `t` by one.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    if degree <= 1 {
        return Ok(TriangleRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree: 1,
        });
    }
    let n = (degree + 2).div_ceil(2);
    let g = gauss_rule(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&t, wt) in g.iter() {
        for (&s, ws) in g.iter() {
            points.push([s * (1.0 - t), t]);
            weights.push(ws * wt * (1.0 - t));
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        degree: 2 * n - 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn gauss_closed_forms() {
        let r = gauss_rule(1).unwrap();
        assert_eq!(r.points, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);

        let r = gauss_rule(2).unwrap();
        let d = 1.0 / (2.0 * 3.0_f64.sqrt());
        assert!((r.points[0] - (0.5 - d)).abs() < 1e-15);
        assert!((r.points[1] - (0.5 + d)).abs() < 1e-15);
        assert!(r.weights.iter().all(|w| (w - 0.5).abs() < 1e-15));
        for p in 0..=3 {
            let exact = 1.0 / (p as f64 + 1.0);
            assert!((r.integrate(|t| t.powi(p)) - exact).abs() < 1e-15);
        }

        let r = gauss_rule(3).unwrap();
        assert!((r.integrate(|t| t.powi(5)) - 1.0 / 6.0).abs() < 1e-14);
        assert!(gauss_rule(0).is_err());
    }

    #[test]
    fn newton_nodes_match_moments() {
        for k in 4..=10 {
            let r = gauss_rule(k).unwrap();
            for p in 0..=(2 * k - 1) {
                let exact = 1.0 / (p as f64 + 1.0);
                assert!((r.integrate(|t| t.powi(p as i32)) - exact).abs() < 1e-14, "k={k} p={p}");
            }
        }
    }

    #[test]
    fn lobatto_closed_forms() {
        let r = gauss_lobatto_rule(2).unwrap();
        assert_eq!(r.points, vec![0.0, 1.0]);
        assert!(r.weights.iter().all(|w| (w - 0.5).abs() < 1e-15));

        let r = gauss_lobatto_rule(3).unwrap();
        let expect = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        assert_eq!(r.points, vec![0.0, 0.5, 1.0]);
        for (w, e) in r.weights.iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }

        let r = gauss_lobatto_rule(4).unwrap();
        let a = 5.0_f64.sqrt() / 10.0;
        assert!((r.points[1] - (0.5 - a)).abs() < 1e-15);
        assert!((r.points[2] - (0.5 + a)).abs() < 1e-15);
        assert!(gauss_lobatto_rule(1).is_err());

        for n in 5..=9 {
            let r = gauss_lobatto_rule(n).unwrap();
            for p in 0..=(2 * n - 3) {
                let exact = 1.0 / (p as f64 + 1.0);
                assert!((r.integrate(|t| t.powi(p as i32)) - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_monomials() {
        let r = triangle_rule(1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.weights[0], 0.5);

        let r = triangle_rule(2).unwrap();
        assert!((r.integrate(|x, _| x * x) - 1.0 / 12.0).abs() < 1e-13);

        let r = triangle_rule(8).unwrap();
        let exact = factorial(4) * factorial(4) / factorial(10);
        assert!((r.integrate(|x, y| x.powi(4) * y.powi(4)) - exact).abs() < 1e-12);

        for deg in 0..=14 {
            let r = triangle_rule(deg).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let got = r.integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!((got - exact).abs() < 1e-12, "deg={deg} a={a} b={b}");
                }
            }
        }
        assert!(triangle_rule(MAX_TRIANGLE_DEGREE + 1).is_err());
    }

    #[test]
    fn nodes_inside_weights_positive() {
        for k in 1..=6 {
            for r in [gauss_rule(k).unwrap(), gauss_lobatto_rule(k + 1).unwrap()] {
                assert!(r.points.iter().all(|&t| (0.0..=1.0).contains(&t)));
                assert!(r.weights.iter().all(|&w| w > 0.0));
                assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
        let r = triangle_rule(10).unwrap();
        assert!(r.points.iter().all(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0));
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }
}
