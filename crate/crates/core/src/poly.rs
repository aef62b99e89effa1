//! Dense real polynomials in ascending coefficient order.

use num_complex::Complex64;
use std::ops::{Add, Mul};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(Vec<f64>);

impl Poly {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self(coefficients)
    }

    pub fn one() -> Self {
        Self(vec![1.0])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.0
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    /// Highest index whose coefficient exceeds `tol` in magnitude.
    pub fn degree_with_tol(&self, tol: f64) -> usize {
        self.0.iter().rposition(|c| c.abs() > tol).unwrap_or(0)
    }

    /// Multiplies by `z`.
    pub fn shift(&self) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(0.0);
        v.extend_from_slice(&self.0);
        Self(v)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    /// Multiplies by the linear factor `1 - d z`.
    pub fn times_one_minus(&self, d: f64) -> Self {
        if d == 0.0 {
            return self.clone();
        }
        let mut v = vec![0.0; self.0.len() + 1];
        for (k, c) in self.0.iter().enumerate() {
            v[k] += c;
            v[k + 1] -= d * c;
        }
        Self(v)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `|p(iy)|^2 - 1` written as a polynomial in `y`, constant term dropped.
    ///
    /// The real and imaginary parts of `p(iy)` are split into even and odd
    /// coefficient sequences, so the result carries no cancellation at `y = 0`.
    pub fn imaginary_axis_excess(&self) -> Poly {
        let n = self.0.len();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for (k, c) in self.0.iter().enumerate() {
            // i^k: 1, i, -1, -i
            match k % 4 {
                0 => re[k] = *c,
                1 => im[k] = *c,
                2 => re[k] = -c,
                _ => im[k] = -c,
            }
        }
        let re = Poly(re);
        let im = Poly(im);
        let mut sq = (&re * &re + &im * &im).0;
        if let Some(c0) = sq.first_mut() {
            *c0 -= 1.0;
        }
        Poly(sq)
    }
}

impl Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        let n = self.0.len().max(rhs.0.len());
        Poly((0..n).map(|k| self.coefficient(k) + rhs.coefficient(k)).collect())
    }
}

impl Add for Poly {
    type Output = Poly;

    fn add(self, rhs: Poly) -> Poly {
        &self + &rhs
    }
}

impl Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        if self.0.is_empty() || rhs.0.is_empty() {
            return Poly(Vec::new());
        }
        let mut v = vec![0.0; self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly(v)
    }
}
