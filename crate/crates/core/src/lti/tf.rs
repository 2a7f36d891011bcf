use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Continuous-time rational function `num(p) / den(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtTransferFunction {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl CtTransferFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(Self { num, den })
    }

    pub fn gain(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn ensure_proper(&self) -> Result<()> {
        if self.is_proper() {
            Ok(())
        } else {
            Err(Error::Improper {
                num: self.num.degree(),
                den: self.den.degree(),
            })
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        if self.den.degree() == 0 {
            return Ok(Vec::new());
        }
        self.den.roots()
    }
}

/// Discrete-time rational function in the forward shift `q`, with a monic
/// denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct DtTransferFunction {
    pub num: Polynomial,
    pub den: Polynomial,
    pub h: f64,
}

impl DtTransferFunction {
    /// Normalizes the denominator to be monic.
    pub fn new(num: Polynomial, den: Polynomial, h: f64) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("sampling period must be positive, got {h}")));
        }
        let lead = den.leading();
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
            h,
        })
    }

    pub fn gain(k: f64, h: f64) -> Result<Self> {
        Self::new(Polynomial::constant(k), Polynomial::one(), h)
    }

    /// `q^{-d}`.
    pub fn delay(d: usize, h: f64) -> Result<Self> {
        Self::new(Polynomial::one(), Polynomial::monomial(d), h)
    }

    pub fn is_causal(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn ensure_causal(&self) -> Result<()> {
        if self.is_causal() {
            Ok(())
        } else {
            Err(Error::Acausal {
                num: self.num.degree(),
                den: self.den.degree(),
            })
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.num.eval_complex(z) / self.den.eval_complex(z)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num.eval(1.0) / self.den.eval(1.0)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        if self.den.degree() == 0 {
            return Ok(Vec::new());
        }
        self.den.roots()
    }

    pub fn series(&self, other: &DtTransferFunction) -> Result<Self> {
        Self::new(&self.num * &other.num, &self.den * &other.den, self.h)
    }

    pub fn parallel(&self, other: &DtTransferFunction) -> Result<Self> {
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        Self::new(num, &self.den * &other.den, self.h)
    }

    /// Input sensitivity `C / (1 + G C)` of the loop formed by plant `g`
    /// and controller `c`.
    pub fn input_sensitivity(g: &DtTransferFunction, c: &DtTransferFunction) -> Result<Self> {
        let num = &c.num * &g.den;
        let den = &(&c.den * &g.den) + &(&g.num * &c.num);
        Self::new(num, den, g.h)
    }
}
