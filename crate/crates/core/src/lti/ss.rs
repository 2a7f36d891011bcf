//! State-space realizations and zero-order-hold discretization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::tf::{CtTransferFunction, DtTransferFunction};
use crate::error::{Error, Result};
use crate::poly::{balance_with_scaling, Polynomial};

/// Single-input state-space model `x' = A x + B u`, `y = C x + D u`.
///
/// `C` may carry several rows: a bank of filters that share the
/// denominator is realized once with one output row per numerator.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl StateSpace {
    /// Controllable canonical realization of a proper rational function.
    pub fn from_tf(tf: &CtTransferFunction) -> Result<Self> {
        tf.ensure_proper()?;
        Self::bank(&tf.den, std::slice::from_ref(&tf.num))
    }

    /// Controllable canonical realization of `num_k(p) / den(p)` for every
    /// numerator, sharing the state.
    pub fn bank(den: &Polynomial, nums: &[Polynomial]) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let n = den.degree();
        for num in nums {
            if !num.is_zero() && num.degree() > n {
                return Err(Error::Improper {
                    num: num.degree(),
                    den: n,
                });
            }
        }
        let lead = den.leading();
        let monic = den.scale(1.0 / lead);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        if n > 0 {
            for j in 0..n {
                a[(n - 1, j)] = -monic.coeff(j);
            }
        }
        let mut b = DVector::zeros(n);
        if n > 0 {
            b[n - 1] = 1.0;
        }
        let mut c = DMatrix::zeros(nums.len(), n);
        let mut d = DVector::zeros(nums.len());
        for (k, num) in nums.iter().enumerate() {
            let scaled = num.scale(1.0 / lead);
            let dk = scaled.coeff(n);
            d[k] = dk;
            for j in 0..n {
                c[(k, j)] = scaled.coeff(j) - dk * monic.coeff(j);
            }
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Frequency response of output row `k` at complex frequency `s`.
    pub fn eval(&self, k: usize, s: Complex64) -> Result<Complex64> {
        let n = self.order();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(-self.a[(i, j)], 0.0);
            }
            m[(i, i)] += s;
        }
        let rhs = DVector::<Complex64>::from_iterator(n, self.b.iter().map(|v| Complex64::new(*v, 0.0)));
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidInput("frequency coincides with a pole".into()))?;
        let mut y = Complex64::new(self.d[k], 0.0);
        for j in 0..n {
            y += self.c[(k, j)] * x[j];
        }
        Ok(y)
    }

    /// Exact zero-order-hold equivalent with sampling period `h`, computed
    /// from the exponential of the augmented matrix `[[A, B], [0, 0]] h`.
    /// The state is balanced first; the similarity is folded into B and C.
    pub fn discretize(&self, h: f64) -> Result<DiscreteStateSpace> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("sampling period must be positive, got {h}")));
        }
        let n = self.order();
        let mut a = self.a.clone();
        let t = balance_with_scaling(&mut a);
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = a[(i, j)] * h;
            }
            aug[(i, n)] = self.b[i] / t[i] * h;
        }
        let e = aug.exp();
        let ad = e.view((0, 0), (n, n)).into_owned();
        let bd = e.view((0, n), (n, 1)).column(0).into_owned();
        let mut c = self.c.clone();
        for k in 0..c.nrows() {
            for j in 0..n {
                c[(k, j)] *= t[j];
            }
        }
        Ok(DiscreteStateSpace::new(ad, bd, c, self.d.clone(), h))
    }
}

/// Discrete-time single-input state-space model
/// `x[k+1] = Ad x[k] + Bd u[k]`, `y[k] = C x[k] + D u[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    pub ad: DMatrix<f64>,
    pub bd: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub h: f64,
}

impl DiscreteStateSpace {
    pub fn new(ad: DMatrix<f64>, bd: DVector<f64>, c: DMatrix<f64>, d: DVector<f64>, h: f64) -> Self {
        Self { ad, bd, c, d, h }
    }

    /// Controllable canonical realization of a causal discrete-time transfer
    /// function.
    pub fn from_tf(tf: &DtTransferFunction) -> Result<Self> {
        tf.ensure_causal()?;
        let ss = StateSpace::bank(&tf.den, std::slice::from_ref(&tf.num))?;
        Ok(Self::new(ss.a, ss.b, ss.c, ss.d, tf.h))
    }

    pub fn order(&self) -> usize {
        self.ad.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Zero-initial-state response; one vector per output row.
    pub fn simulate(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let n = self.order();
        let p = self.outputs();
        let ad: Vec<f64> = (0..n * n).map(|idx| self.ad[(idx / n, idx % n)]).collect();
        let c: Vec<f64> = (0..p * n).map(|idx| self.c[(idx / n, idx % n)]).collect();
        let bd = self.bd.as_slice();
        let d = self.d.as_slice();
        let mut x = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut out = vec![Vec::with_capacity(u.len()); p];
        for &uk in u {
            for k in 0..p {
                let row = &c[k * n..(k + 1) * n];
                let y = row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + d[k] * uk;
                out[k].push(y);
            }
            for i in 0..n {
                let row = &ad[i * n..(i + 1) * n];
                next[i] = row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + bd[i] * uk;
            }
            std::mem::swap(&mut x, &mut next);
        }
        out
    }

    /// Markov parameters `D, C Bd, C Ad Bd, ...` of output row `k`.
    pub fn markov(&self, k: usize, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push(self.d[k]);
        let mut v = self.bd.clone();
        for _ in 1..count {
            out.push((self.c.row(k) * &v)[0]);
            v = &self.ad * v;
        }
        out
    }

    /// Transfer function of output row `k`, given the characteristic
    /// polynomial (monic, in `q`) of `Ad`.
    fn to_tf_with_den(&self, k: usize, den: Polynomial) -> Result<DtTransferFunction> {
        let n = self.order();
        let markov = self.markov(k, n + 1);
        let num: Vec<f64> = (0..=n)
            .map(|j| (j..=n).map(|i| den.coeff(i) * markov[i - j]).sum())
            .collect();
        DtTransferFunction::new(Polynomial::new(num), den, self.h)
    }

    pub fn to_tf(&self, k: usize) -> Result<DtTransferFunction> {
        let n = self.order();
        let den = if n == 0 {
            Polynomial::one()
        } else {
            let ev = self.ad.clone().complex_eigenvalues();
            Polynomial::from_roots(ev.as_slice(), 1.0)
        };
        self.to_tf_with_den(k, den)
    }
}

/// Zero-order-hold equivalent of a proper continuous-time rational function.
/// Discrete poles are `exp(s h)` of the continuous poles; the numerator
/// follows from the Markov parameters of the discretized realization.
pub fn zoh_discretize(tf: &CtTransferFunction, h: f64) -> Result<DtTransferFunction> {
    tf.ensure_proper()?;
    let ss = StateSpace::from_tf(tf)?;
    let dss = ss.discretize(h)?;
    let den = if tf.den.degree() == 0 {
        Polynomial::one()
    } else {
        let zs: Vec<Complex64> = tf.den.roots()?.iter().map(|s| (s * h).exp()).collect();
        Polynomial::from_roots(&zs, 1.0)
    };
    dss.to_tf_with_den(0, den)
}
