//! Additive model parametrization: `G(p) = B_1/(p^l A_1) + sum_{i>1} B_i/A_i`
//! with anti-monic denominators (`A_i(0) = 1`).

use std::ops::Deref;

use num_complex::Complex64;

use super::tf::CtTransferFunction;
use crate::error::{Error, Result};
use crate::poly::{is_ct_stable, Polynomial};

/// Perturbation applied to denominator roots that sit on the imaginary axis
/// during reflection.
pub const AXIS_EPS: f64 = 1e-8;

/// One additive term `B(p) / A(p)` with `A(0) = 1`.
///
/// The declared pole and zero counts are kept separately from the
/// polynomials so a vanishing leading coefficient does not change the
/// structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CtSubmodel {
    a: Polynomial,
    b: Polynomial,
    n: usize,
    m: usize,
}

impl CtSubmodel {
    pub fn new(a: Polynomial, b: Polynomial) -> Result<Self> {
        let n = a.degree();
        let m = b.degree();
        Self::with_orders(a, b, n, m)
    }

    pub fn with_orders(a: Polynomial, b: Polynomial, n: usize, m: usize) -> Result<Self> {
        if a.coeff(0) != 1.0 {
            return Err(Error::InvalidInput(format!(
                "denominator must be anti-monic (A(0) = 1), got A(0) = {}",
                a.coeff(0)
            )));
        }
        if m > n {
            return Err(Error::InvalidInput(format!("submodel has {m} zeros but only {n} poles")));
        }
        if a.degree() > n || (!b.is_zero() && b.degree() > m) {
            return Err(Error::InvalidInput("polynomial degree exceeds declared order".into()));
        }
        Ok(Self { a, b, n, m })
    }

    /// Build from `theta = [a_1..a_n, b_0..b_m]`.
    pub fn from_theta(n: usize, m: usize, theta: &[f64]) -> Result<Self> {
        if theta.len() != n + m + 1 {
            return Err(Error::LengthMismatch {
                expected: n + m + 1,
                got: theta.len(),
            });
        }
        let mut ac = Vec::with_capacity(n + 1);
        ac.push(1.0);
        ac.extend_from_slice(&theta[..n]);
        Ok(Self {
            a: Polynomial::new(ac),
            b: Polynomial::new(theta[n..].to_vec()),
            n,
            m,
        })
    }

    pub fn theta(&self) -> Vec<f64> {
        (1..=self.n)
            .map(|k| self.a.coeff(k))
            .chain((0..=self.m).map(|k| self.b.coeff(k)))
            .collect()
    }

    pub fn a(&self) -> &Polynomial {
        &self.a
    }

    pub fn b(&self) -> &Polynomial {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_params(&self) -> usize {
        self.n + self.m + 1
    }

    pub fn is_stable(&self) -> bool {
        self.n == 0 || self.a.degree() == 0 || is_ct_stable(&self.a).unwrap_or(false)
    }

    /// `B / (p^l A)`.
    pub fn tf(&self, integrator_order: usize) -> CtTransferFunction {
        CtTransferFunction {
            num: self.b.clone(),
            den: self.a.shift(integrator_order),
        }
    }
}

/// Mirror every right-half-plane denominator root into the left half-plane
/// and renormalize to `A(0) = 1`. Roots on the imaginary axis are moved to
/// real part `-AXIS_EPS`. Stable input is returned unchanged.
pub fn reflect_unstable_roots(sub: &CtSubmodel) -> Result<CtSubmodel> {
    if sub.a.coeff(0) == 0.0 {
        return Err(Error::RootAtOrigin);
    }
    if sub.a.degree() == 0 || sub.is_stable() {
        return Ok(sub.clone());
    }
    let roots = sub.a.roots()?;
    if roots.iter().any(|r| r.norm() == 0.0) {
        return Err(Error::RootAtOrigin);
    }
    let mirrored: Vec<Complex64> = roots
        .iter()
        .map(|r| {
            let re = -r.re.abs().max(AXIS_EPS);
            Complex64::new(re, r.im)
        })
        .collect();
    let rebuilt = Polynomial::from_roots(&mirrored, sub.a.leading());
    let c0 = rebuilt.coeff(0);
    if c0 == 0.0 || !c0.is_finite() {
        return Err(Error::RootAtOrigin);
    }
    let mut coeffs = rebuilt.scale(1.0 / c0).coeffs().to_vec();
    coeffs[0] = 1.0;
    let b = sub.b.scale(1.0 / c0);
    CtSubmodel::with_orders(Polynomial::new(coeffs), b, sub.n, sub.m)
}

/// Orders `(n_i, m_i)` per submodel plus integrator order and input delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelStructure {
    pub orders: Vec<(usize, usize)>,
    pub integrator_order: usize,
    pub input_delay: usize,
}

impl ModelStructure {
    pub fn new(orders: Vec<(usize, usize)>, integrator_order: usize, input_delay: usize) -> Result<Self> {
        let s = Self {
            orders,
            integrator_order,
            input_delay,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() {
            return Err(Error::InvalidInput("model needs at least one submodel".into()));
        }
        if let Some(i) = self.orders.iter().position(|(n, m)| m > n) {
            return Err(Error::InvalidInput(format!("submodel {} has more zeros than poles", i + 1)));
        }
        let biproper = self.orders.iter().filter(|(n, m)| n == m).count();
        if biproper > 1 {
            return Err(Error::InvalidInput(format!(
                "at most one submodel may have equal pole and zero counts, found {biproper}"
            )));
        }
        Ok(())
    }

    pub fn n_submodels(&self) -> usize {
        self.orders.len()
    }

    pub fn n_params(&self) -> usize {
        self.orders.iter().map(|(n, m)| n + m + 1).sum()
    }

    /// Parameter index range of each submodel inside the packed vector.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.orders
            .iter()
            .map(|(n, m)| {
                let r = start..start + n + m + 1;
                start = r.end;
                r
            })
            .collect()
    }

    /// Integrator order carried by submodel `i` (only the first one).
    pub fn integrator_of(&self, i: usize) -> usize {
        if i == 0 {
            self.integrator_order
        } else {
            0
        }
    }
}

/// Stacked parameter vector `[theta_1; ...; theta_K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveModel {
    pub submodels: Vec<CtSubmodel>,
    pub integrator_order: usize,
    pub input_delay: usize,
}

impl AdditiveModel {
    pub fn new(submodels: Vec<CtSubmodel>, integrator_order: usize, input_delay: usize) -> Result<Self> {
        let model = Self {
            submodels,
            integrator_order,
            input_delay,
        };
        model.structure().validate()?;
        Ok(model)
    }

    pub fn structure(&self) -> ModelStructure {
        ModelStructure {
            orders: self.submodels.iter().map(|s| (s.n, s.m)).collect(),
            integrator_order: self.integrator_order,
            input_delay: self.input_delay,
        }
    }

    pub fn n_submodels(&self) -> usize {
        self.submodels.len()
    }

    /// Transfer function of submodel `i`, including the integrator on the
    /// first submodel.
    pub fn submodel_tf(&self, i: usize) -> CtTransferFunction {
        let l = if i == 0 { self.integrator_order } else { 0 };
        self.submodels[i].tf(l)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (0..self.n_submodels()).map(|i| self.submodel_tf(i).eval(s)).sum()
    }

    /// Human-readable structural warnings: shared denominator roots and
    /// near-common factors between numerator and denominator.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let roots: Vec<Vec<Complex64>> = self
            .submodels
            .iter()
            .map(|s| if s.a.degree() >= 1 { s.a.roots().unwrap_or_default() } else { Vec::new() })
            .collect();
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                for ri in &roots[i] {
                    for rj in &roots[j] {
                        let scale = ri.norm().max(rj.norm()).max(1.0);
                        if (ri - rj).norm() < 1e-8 * scale {
                            out.push(format!("submodels {} and {} share a denominator root near {ri}", i + 1, j + 1));
                        }
                    }
                }
            }
        }
        for (i, s) in self.submodels.iter().enumerate() {
            let det = super::sylvester::sylvester_matrix(&-&s.b, &s.a).determinant();
            if det.abs() < super::sylvester::DEFAULT_RESULTANT_THRESHOLD * super::sylvester::resultant_scale(&s.b, &s.a) {
                out.push(format!("submodel {} numerator and denominator are nearly non-coprime (|det S| = {det:e})", i + 1));
            }
        }
        out
    }
}

pub fn pack_parameters(model: &AdditiveModel) -> ParameterVector {
    ParameterVector(model.submodels.iter().flat_map(|s| s.theta()).collect())
}

pub fn unpack_parameters(beta: &[f64], structure: &ModelStructure) -> Result<AdditiveModel> {
    structure.validate()?;
    if beta.len() != structure.n_params() {
        return Err(Error::LengthMismatch {
            expected: structure.n_params(),
            got: beta.len(),
        });
    }
    let submodels = structure
        .orders
        .iter()
        .zip(structure.blocks())
        .map(|(&(n, m), r)| CtSubmodel::from_theta(n, m, &beta[r]))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdditiveModel {
        submodels,
        integrator_order: structure.integrator_order,
        input_delay: structure.input_delay,
    })
}

/// Single rational function over the common denominator `p^l prod A_i`.
pub fn additive_to_unfactored(model: &AdditiveModel) -> CtTransferFunction {
    let l = model.integrator_order;
    let den = model
        .submodels
        .iter()
        .fold(Polynomial::one(), |acc, s| &acc * &s.a)
        .shift(l);
    let mut num = Polynomial::zero();
    for (i, s) in model.submodels.iter().enumerate() {
        let others = model
            .submodels
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .fold(Polynomial::one(), |acc, (_, o)| &acc * &o.a);
        let mut term = &s.b * &others;
        if i != 0 {
            term = term.shift(l);
        }
        num = &num + &term;
    }
    CtTransferFunction { num, den }
}
