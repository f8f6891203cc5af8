//! Bivariate polynomials in the monomial basis `x^a y^b`, `a + b <= degree`.

/// Monomial exponents of total degree at most `degree`, ordered by total
/// degree and then by the power of `y`.
pub fn monomials(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
    for d in 0..=degree {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

pub fn dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    degree: usize,
    coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; dim(degree)],
        }
    }

    pub fn monomial(degree: usize, a: usize, b: usize) -> Self {
        assert!(a + b <= degree);
        let mut p = Self::zero(degree);
        p.coeffs[index(a, b)] = 1.0;
        p
    }

    pub fn from_coeffs(degree: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), dim(degree));
        Self { degree, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.degree {
            0.0
        } else {
            self.coeffs[index(a, b)]
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        // Horner in y for each power of x would be faster; degrees here are tiny.
        let mut xp = [1.0; 16];
        let mut yp = [1.0; 16];
        for i in 1..=self.degree {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        monomials(self.degree)
            .iter()
            .zip(&self.coeffs)
            .map(|(&(a, b), c)| c * xp[a] * yp[b])
            .sum()
    }

    pub fn dx(&self) -> Self {
        let mut out = Self::zero(self.degree.saturating_sub(1));
        if self.degree == 0 {
            return out;
        }
        for (&(a, b), &c) in monomials(self.degree).iter().zip(&self.coeffs) {
            if a > 0 {
                out.coeffs[index(a - 1, b)] += c * a as f64;
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let mut out = Self::zero(self.degree.saturating_sub(1));
        if self.degree == 0 {
            return out;
        }
        for (&(a, b), &c) in monomials(self.degree).iter().zip(&self.coeffs) {
            if b > 0 {
                out.coeffs[index(a, b - 1)] += c * b as f64;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.degree + other.degree);
        for (&(a, b), &c) in monomials(self.degree).iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            for (&(p, q), &d) in monomials(other.degree).iter().zip(&other.coeffs) {
                out.coeffs[index(a + p, b + q)] += c * d;
            }
        }
        out
    }

    /// `sum_i weights[i] * polys[i]`, all of the same degree.
    pub fn combine(polys: &[&Self], weights: &[f64]) -> Self {
        let degree = polys[0].degree;
        let mut out = Self::zero(degree);
        for (p, &w) in polys.iter().zip(weights) {
            debug_assert_eq!(p.degree, degree);
            for (o, c) in out.coeffs.iter_mut().zip(&p.coeffs) {
                *o += w * c;
            }
        }
        out
    }
}
