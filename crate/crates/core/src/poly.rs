//! Dense univariate polynomials with `f64` coefficients, lowest degree first.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly(coeffs);
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn monomial(c: f64, n: usize) -> Self {
        let mut v = vec![0.0; n + 1];
        v[n] = c;
        Poly::new(v)
    }

    fn trim(&mut self) {
        while matches!(self.0.last(), Some(c) if *c == 0.0) {
            self.0.pop();
        }
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn integral(&self) -> Poly {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(0.0);
        v.extend(self.0.iter().enumerate().map(|(i, c)| c / (i + 1) as f64));
        Poly::new(v)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::new(v)
    }

    pub fn truncate(&self, max_degree: usize) -> Poly {
        Poly::new(self.0.iter().take(max_degree + 1).copied().collect())
    }

    /// `self^n` truncated at `max_degree`.
    pub fn pow_truncated(&self, n: u32, max_degree: usize) -> Poly {
        let mut out = Poly::new(vec![1.0]);
        for _ in 0..n {
            out = out.mul(self).truncate(max_degree);
        }
        out
    }

    /// Divide by `x^k`, assuming the low coefficients vanish.
    pub fn shift_down(&self, k: usize) -> Poly {
        Poly::new(self.0.iter().skip(k).copied().collect())
    }

    /// True when every coefficient of the given parity is zero.
    pub fn has_parity(&self, odd: bool) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, c)| (i % 2 == 1) == odd || *c == 0.0)
    }
}
