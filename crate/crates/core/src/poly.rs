//! Real polynomials in ascending-degree coefficient order.
//!
//! `coeffs[0]` is the constant term. Trailing (highest-degree) zeros are
//! trimmed on construction so the leading coefficient of a nonzero polynomial
//! is always nonzero. The zero polynomial is stored as an empty vector.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `p^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self { coeffs: c }
    }

    /// Real polynomial `lead * prod (x - r_i)`. Complex roots must come in
    /// conjugate pairs; imaginary residue of the product is discarded.
    pub fn from_roots(roots: &[Complex64], lead: f64) -> Self {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= ci * r;
            }
            c = next;
        }
        Self::new(c.into_iter().map(|z| z.re * lead).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Coefficient of `p^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Multiply by `p^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = vec![0.0; k];
        c.extend_from_slice(&self.coeffs);
        Self { coeffs: c }
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(), |acc, _| &acc * self)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    /// Euclidean division; returns `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if divisor.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let dd = divisor.degree();
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Self::zero(), self.clone()));
        }
        let mut quot = vec![0.0; rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, dc) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * dc;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd);
        Ok((Self::new(quot), Self::new(rem)))
    }

    /// Roots via eigenvalues of the companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let n = self.degree();
        if n == 0 {
            return Err(Error::InvalidInput("root finding needs degree >= 1".into()));
        }
        // Exact zero roots are peeled off so they come back as exact zeros.
        let zeros = self.coeffs.iter().take_while(|c| **c == 0.0).count();
        let rest = &self.coeffs[zeros..];
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        let m = rest.len() - 1;
        match m {
            0 => {}
            1 => roots.push(Complex64::new(-rest[0] / rest[1], 0.0)),
            _ => {
                let lead = rest[m];
                let mut comp = DMatrix::<f64>::zeros(m, m);
                for i in 1..m {
                    comp[(i, i - 1)] = 1.0;
                }
                for i in 0..m {
                    comp[(i, m - 1)] = -rest[i] / lead;
                }
                let ev = balance(comp).complex_eigenvalues();
                roots.extend(ev.iter().copied());
            }
        }
        Ok(roots)
    }
}

/// Diagonal similarity scaling (powers of two) that equalizes row and column
/// norms; leaves eigenvalues unchanged.
pub(crate) fn balance(mut a: DMatrix<f64>) -> DMatrix<f64> {
    balance_with_scaling(&mut a);
    a
}

/// Balances `a` in place and returns the diagonal `d` such that the result is
/// `D^{-1} A D`.
pub(crate) fn balance_with_scaling(a: &mut DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    const RADIX: f64 = 2.0;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let g = r / RADIX;
            while cc < g {
                f *= RADIX;
                cc *= RADIX * RADIX;
            }
            let g = r * RADIX;
            while cc >= g {
                f /= RADIX;
                cc /= RADIX * RADIX;
            }
            if (cc + r) / f < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    d
}

/// Strict Hurwitz stability via the Routh array: true iff every root has a
/// strictly negative real part.
pub fn is_ct_stable(p: &Polynomial) -> Result<bool> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let n = p.degree();
    if n == 0 {
        return Err(Error::InvalidInput("stability check needs degree >= 1".into()));
    }
    // Descending coefficients, sign-normalized.
    let sign = p.leading().signum();
    let desc: Vec<f64> = p.coeffs.iter().rev().map(|c| c * sign).collect();
    if desc.iter().any(|c| *c <= 0.0) {
        return Ok(false);
    }
    let mut row0: Vec<f64> = desc.iter().step_by(2).copied().collect();
    let mut row1: Vec<f64> = desc.iter().skip(1).step_by(2).copied().collect();
    for _ in 0..n {
        if row1.is_empty() {
            break;
        }
        let pivot = row1[0];
        if pivot <= 0.0 || !pivot.is_finite() {
            return Ok(false);
        }
        let next: Vec<f64> = (0..row0.len().saturating_sub(1))
            .map(|j| {
                let a = row0.get(j + 1).copied().unwrap_or(0.0);
                let b = row1.get(j + 1).copied().unwrap_or(0.0);
                a - row0[0] * b / pivot
            })
            .collect();
        row0 = row1;
        row1 = next;
    }
    Ok(true)
}

pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    p.roots()
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Polynomial::new(c)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}p")?,
                _ => write!(f, "{c}p^{k}")?,
            }
        }
        Ok(())
    }
}
