//! Continuous-time prefiltering of ZOH-held sampled signals and
//! discrete-time difference-equation filtering.

use super::signal::SampledSignal;
use crate::error::{Error, Result};
use crate::lti::{CtTransferFunction, DtTransferFunction, StateSpace};
use crate::poly::Polynomial;

/// Apply `num_k(p) / den(p)` for every numerator to the ZOH interpolation of
/// `x`, sampled at the same instants. One state trajectory is shared by all
/// outputs.
pub fn filter_bank(x: &[f64], h: f64, den: &Polynomial, nums: &[Polynomial]) -> Result<Vec<Vec<f64>>> {
    let ss = StateSpace::bank(den, nums)?;
    Ok(ss.discretize(h)?.simulate(x))
}

/// `f(p) x(t_k)` with `x` held constant between samples and zero initial
/// state.
pub fn filter_ct_zoh(x: &SampledSignal, f: &CtTransferFunction) -> Result<SampledSignal> {
    f.ensure_proper()?;
    let mut out = filter_bank(x.values(), x.h(), &f.den, std::slice::from_ref(&f.num))?;
    Ok(x.with_values(out.pop().unwrap_or_default()))
}

/// Columns `p^j / (p^l A(p)) x(t_k)` for each `j` in `orders`.
pub fn derivative_filter_bank(
    x: &SampledSignal,
    a: &Polynomial,
    integrator_order: usize,
    orders: &[usize],
) -> Result<Vec<SampledSignal>> {
    let den = a.shift(integrator_order);
    if let Some(&j) = orders.iter().find(|&&j| j > den.degree()) {
        return Err(Error::Improper {
            num: j,
            den: den.degree(),
        });
    }
    let nums: Vec<Polynomial> = orders.iter().map(|&j| Polynomial::monomial(j)).collect();
    Ok(filter_bank(x.values(), x.h(), &den, &nums)?
        .into_iter()
        .map(|v| x.with_values(v))
        .collect())
}

/// Difference-equation output of a causal discrete-time transfer function,
/// zero initial conditions.
pub fn filter_dt(x: &SampledSignal, f: &DtTransferFunction) -> Result<SampledSignal> {
    Ok(x.with_values(filter_dt_values(x.values(), f)?))
}

pub(crate) fn filter_dt_values(x: &[f64], f: &DtTransferFunction) -> Result<Vec<f64>> {
    f.ensure_causal()?;
    let n = f.den.degree();
    let lead = f.den.leading();
    let b: Vec<f64> = (0..=n).map(|i| f.num.coeff(i) / lead).collect();
    let a: Vec<f64> = (0..=n).map(|i| f.den.coeff(i) / lead).collect();
    let mut y = vec![0.0; x.len()];
    for k in 0..x.len() {
        // sum_i a_i y[k-n+i] = sum_i b_i x[k-n+i], a_n = 1
        let mut acc = 0.0;
        for i in 0..=n {
            if k + i >= n {
                acc += b[i] * x[k + i - n];
            }
        }
        for i in 0..n {
            if k + i >= n {
                acc -= a[i] * y[k + i - n];
            }
        }
        y[k] = acc;
    }
    Ok(y)
}
