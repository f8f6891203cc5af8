//! Truncated multivariate Taylor jets in `(x, y, t)`, used as an exact
//! differentiation oracle for the manufactured sources.

#![allow(dead_code)]

use std::ops::{Add, Mul, Neg, Sub};

pub const ORDER: usize = 3;

fn multi_indices() -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for d in 0..=ORDER {
        for i in (0..=d).rev() {
            for j in (0..=(d - i)).rev() {
                out.push([i, j, d - i - j]);
            }
        }
    }
    out
}

thread_local! {
    static INDICES: Vec<[usize; 3]> = multi_indices();
}

fn position(a: [usize; 3]) -> Option<usize> {
    INDICES.with(|idx| idx.iter().position(|&b| b == a))
}

#[derive(Debug, Clone)]
pub struct Jet {
    /// Taylor coefficients `d^a f / a!`.
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = vec![0.0; INDICES.with(|i| i.len())];
        c[0] = v;
        Self { c }
    }

    /// Independent variable `dim` (0 = x, 1 = y, 2 = t) at `value`.
    pub fn variable(dim: usize, value: f64) -> Self {
        let mut j = Self::constant(value);
        let mut a = [0; 3];
        a[dim] = 1;
        j.c[position(a).unwrap()] = 1.0;
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `d^a f` at the expansion point.
    pub fn derivative(&self, a: [usize; 3]) -> f64 {
        let fact: f64 = a.iter().map(|&k| (1..=k).product::<usize>() as f64).product();
        position(a).map_or(0.0, |p| self.c[p] * fact)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// `sin` and `cos` through the nilpotent part.
    pub fn sin_cos(&self) -> (Self, Self) {
        let a = self.value();
        let mut d = self.clone();
        d.c[0] = 0.0;
        let d2 = &d * &d;
        let d3 = &d2 * &d;
        let cos_d = &Self::constant(1.0) - &d2.scale(0.5);
        let sin_d = &d - &d3.scale(1.0 / 6.0);
        let sin = &cos_d.scale(a.sin()) + &sin_d.scale(a.cos());
        let cos = &cos_d.scale(a.cos()) - &sin_d.scale(a.sin());
        (sin, cos)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        INDICES.with(|idx| {
            let mut c = vec![0.0; idx.len()];
            for (p, a) in idx.iter().enumerate() {
                if self.c[p] == 0.0 {
                    continue;
                }
                for (q, b) in idx.iter().enumerate() {
                    let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                    if s.iter().sum::<usize>() <= ORDER {
                        c[position(s).unwrap()] += self.c[p] * o.c[q];
                    }
                }
            }
            Jet { c }
        })
    }
}
