//! Real-coefficient polynomials and rational functions in `s`.

use crate::linalg::ComplexValue;
use serde::{Deserialize, Serialize};

/// Polynomial with ascending coefficients: `c[0] + c[1] s + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// `s^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Poly(c)
    }

    fn trim(&mut self) {
        while matches!(self.0.last(), Some(&c) if c == 0.0) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn leading(&self) -> f64 {
        self.0.last().copied().unwrap_or(0.0)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.0.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Multiplies by `s^k`.
    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![0.0; k];
        c.extend_from_slice(&self.0);
        Poly(c)
    }

    pub fn eval(&self, s: ComplexValue) -> ComplexValue {
        self.0.iter().rev().fold(ComplexValue::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// Long division: `self = q * d + r` with `deg r < deg d`.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("division by the zero polynomial");
        let lead = d.leading();
        let mut r = self.0.clone();
        let Some(nd) = self.degree() else { return (Poly::zero(), Poly::zero()) };
        if nd < dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![0.0; nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let f = r[k + dd] / lead;
            q[k] = f;
            for (j, dc) in d.0.iter().enumerate() {
                r[k + j] -= f * dc;
            }
            // the eliminated coefficient is zero by construction
            r[k + dd] = 0.0;
        }
        r.truncate(dd);
        (Poly::new(q), Poly::new(r))
    }

    /// Sets coefficients below `tol * max|c|` to zero.
    pub fn clean(&self, tol: f64) -> Poly {
        let scale = self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        Poly::new(self.0.iter().map(|&c| if c.abs() <= tol * scale { 0.0 } else { c }).collect())
    }

    /// Number of leading zero low-order coefficients (roots at the origin).
    pub fn origin_multiplicity(&self, tol: f64) -> usize {
        let scale = self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        self.0.iter().take_while(|c| c.abs() <= tol * scale).count()
    }

    /// Divides by `s^k`, dropping the `k` lowest coefficients.
    pub fn unshift(&self, k: usize) -> Poly {
        Poly::new(self.0.iter().skip(k).copied().collect())
    }
}

/// `num(s) / den(s)` with a monic denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

impl Rational {
    /// Normalizes to a monic denominator; `None` if the denominator is zero.
    pub fn new(num: Poly, den: Poly) -> Option<Self> {
        let lead = den.leading();
        if den.is_zero() || lead == 0.0 {
            return None;
        }
        Some(Rational { num: num.scale(1.0 / lead), den: den.scale(1.0 / lead) })
    }

    pub fn zero() -> Self {
        Rational { num: Poly::zero(), den: Poly::constant(1.0) }
    }

    pub fn eval(&self, s: ComplexValue) -> ComplexValue {
        self.num.eval(s) / self.den.eval(s)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_strictly_proper(&self) -> bool {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => true,
            (Some(n), Some(d)) => n < d,
            (Some(_), None) => false,
        }
    }

    /// Cancels common roots at `s = 0`.
    pub fn cancel_origin(&self, tol: f64) -> Rational {
        let k = self.num.origin_multiplicity(tol).min(self.den.origin_multiplicity(tol));
        if k == 0 || self.num.is_zero() {
            return self.clone();
        }
        Rational::new(self.num.unshift(k), self.den.unshift(k)).expect("nonzero denominator")
    }
}
