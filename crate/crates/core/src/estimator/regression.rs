//! Residual outputs, regressors and instruments for the additive iterations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::AdditiveModel;
use crate::poly::Polynomial;
use crate::signals::filter_bank;
use crate::signals::signal::{delay_values, SampledSignal};
use crate::signals::simulate::closed_loop_input;
use crate::lti::DtTransferFunction;

/// Regressor `Phi` (N x P), instrument `PhiHat` (N x P) and residual-output
/// matrix `Upsilon` (N x K) evaluated at one iterate.
#[derive(Debug, Clone)]
pub struct RegressionSnapshot {
    pub phi: DMatrix<f64>,
    pub phi_hat: DMatrix<f64>,
    pub upsilon: DMatrix<f64>,
    /// Parameter index range of each submodel.
    pub blocks: Vec<std::ops::Range<usize>>,
}

impl RegressionSnapshot {
    pub fn new(
        phi: DMatrix<f64>,
        phi_hat: DMatrix<f64>,
        upsilon: DMatrix<f64>,
        blocks: Vec<std::ops::Range<usize>>,
    ) -> Result<Self> {
        let p = blocks.last().map_or(0, |b| b.end);
        let n = phi.nrows();
        if phi.ncols() != p || phi_hat.ncols() != p || phi_hat.nrows() != n || upsilon.nrows() != n {
            return Err(Error::InvalidInput("regression snapshot dimensions are inconsistent".into()));
        }
        if upsilon.ncols() != blocks.len() {
            return Err(Error::InvalidInput(format!(
                "residual-output matrix has {} columns for {} submodels",
                upsilon.ncols(),
                blocks.len()
            )));
        }
        Ok(Self {
            phi,
            phi_hat,
            upsilon,
            blocks,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.phi.ncols()
    }

    /// Keep rows `k..`.
    pub fn skip_rows(&self, k: usize) -> RegressionSnapshot {
        let n = self.n_samples();
        let k = k.min(n.saturating_sub(1));
        RegressionSnapshot {
            phi: self.phi.rows(k, n - k).into_owned(),
            phi_hat: self.phi_hat.rows(k, n - k).into_owned(),
            upsilon: self.upsilon.rows(k, n - k).into_owned(),
            blocks: self.blocks.clone(),
        }
    }
}

pub(crate) fn columns_to_matrix(n: usize, cols: Vec<Vec<f64>>) -> DMatrix<f64> {
    let p = cols.len();
    DMatrix::from_iterator(n, p, cols.into_iter().flatten())
}

fn check_filters_stable(model: &AdditiveModel) -> Result<()> {
    match model.submodels.iter().position(|s| !s.is_stable()) {
        Some(i) => Err(Error::UnstableModel { submodel: i + 1 }),
        None => Ok(()),
    }
}

/// `G_i(p) u(t_k - d h)` for every submodel.
pub(crate) fn submodel_outputs(model: &AdditiveModel, ud: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    (0..model.n_submodels())
        .map(|i| {
            let tf = model.submodel_tf(i);
            tf.ensure_proper()?;
            Ok(filter_bank(ud, h, &tf.den, std::slice::from_ref(&tf.num))?.remove(0))
        })
        .collect()
}

fn residuals_from_parts(y: &[f64], parts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..parts.len())
        .map(|i| {
            let mut r = y.to_vec();
            for (l, part) in parts.iter().enumerate() {
                if l != i {
                    for (a, b) in r.iter_mut().zip(part) {
                        *a -= b;
                    }
                }
            }
            r
        })
        .collect()
}

/// Residual outputs `y_tilde_i = y - sum_{l != i} G_l u` and their filtered
/// versions `y_f,i = y_tilde_i / A_i`.
pub fn residual_outputs(
    y: &SampledSignal,
    u: &SampledSignal,
    model: &AdditiveModel,
) -> Result<(Vec<SampledSignal>, Vec<SampledSignal>)> {
    y.check_compatible(u)?;
    check_filters_stable(model)?;
    let ud = delay_values(u.values(), model.input_delay);
    let parts = submodel_outputs(model, &ud, u.h())?;
    let yt = residuals_from_parts(y.values(), &parts);
    let mut yf = Vec::with_capacity(yt.len());
    for (s, r) in model.submodels.iter().zip(&yt) {
        yf.push(y.with_values(filter_bank(r, y.h(), s.a(), &[Polynomial::one()])?.remove(0)));
    }
    Ok((yt.into_iter().map(|v| y.with_values(v)).collect(), yf))
}

/// Input-side columns `p^j / (p^l A_i) z` for `j = 0..m_i`, per submodel.
fn input_columns(model: &AdditiveModel, zd: &[f64], h: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    model
        .submodels
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let l = if i == 0 { model.integrator_order } else { 0 };
            let nums: Vec<Polynomial> = (0..=s.m()).map(Polynomial::monomial).collect();
            filter_bank(zd, h, &s.a().shift(l), &nums)
        })
        .collect()
}

/// Gradient columns `-p^j B_i / (p^l A_i^2) z` for `j = 1..n_i`, per
/// submodel.
fn gradient_columns(model: &AdditiveModel, zd: &[f64], h: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    model
        .submodels
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.n() == 0 {
                return Ok(Vec::new());
            }
            let l = if i == 0 { model.integrator_order } else { 0 };
            let den = (s.a() * s.a()).shift(l);
            let neg_b = -s.b();
            let nums: Vec<Polynomial> = (1..=s.n()).map(|j| neg_b.shift(j)).collect();
            filter_bank(zd, h, &den, &nums)
        })
        .collect()
}

/// Output-side columns `-p^j / A_i y_tilde_i` for `j = 1..n_i`.
fn output_columns(model: &AdditiveModel, yt: &[Vec<f64>], h: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    model
        .submodels
        .iter()
        .zip(yt)
        .map(|(s, r)| {
            if s.n() == 0 {
                return Ok(Vec::new());
            }
            let nums: Vec<Polynomial> = (1..=s.n()).map(|j| -&Polynomial::monomial(j)).collect();
            filter_bank(r, h, s.a(), &nums)
        })
        .collect()
}

fn interleave(first: Vec<Vec<Vec<f64>>>, second: Vec<Vec<Vec<f64>>>) -> Vec<Vec<f64>> {
    first.into_iter().zip(second).flat_map(|(a, b)| a.into_iter().chain(b)).collect()
}

/// Regressor matrix with block `i` equal to
/// `[-p^j / A_i y_tilde_i (j = 1..n_i), p^j / (p^l A_i) u (j = 0..m_i)]`.
/// The output columns never carry the integrator.
pub fn build_regressor(y: &SampledSignal, u: &SampledSignal, model: &AdditiveModel) -> Result<DMatrix<f64>> {
    let (yt, _) = residual_outputs(y, u, model)?;
    let yt: Vec<Vec<f64>> = yt.into_iter().map(|s| s.into_values()).collect();
    let ud = delay_values(u.values(), model.input_delay);
    let cols = interleave(output_columns(model, &yt, u.h())?, input_columns(model, &ud, u.h())?);
    Ok(columns_to_matrix(u.len(), cols))
}

/// Instrument built from an (undelayed) excitation `z`; the model's input
/// delay is applied here.
pub fn instrument_from(z: &SampledSignal, model: &AdditiveModel) -> Result<DMatrix<f64>> {
    check_filters_stable(model)?;
    let zd = delay_values(z.values(), model.input_delay);
    let cols = interleave(gradient_columns(model, &zd, z.h())?, input_columns(model, &zd, z.h())?);
    Ok(columns_to_matrix(z.len(), cols))
}

/// Open-loop instrument: the gradient of the simulated model output with
/// respect to the parameters.
pub fn build_instrument_open(u: &SampledSignal, model: &AdditiveModel) -> Result<DMatrix<f64>> {
    instrument_from(u, model)
}

/// Closed-loop instrument: the open-loop filters applied to
/// `S_uo(q) r`, with the sensitivity rebuilt from `model`.
pub fn build_instrument_closed(
    r: &SampledSignal,
    model: &AdditiveModel,
    controller: &DtTransferFunction,
) -> Result<DMatrix<f64>> {
    check_filters_stable(model)?;
    let z = closed_loop_input(model, controller, r)?;
    instrument_from(&z, model)
}

/// Snapshot at `model` with instrument excitation `z` (the measured input
/// in open loop, `S_uo r` in closed loop).
pub(crate) fn snapshot(
    y: &SampledSignal,
    u: &SampledSignal,
    z: Option<&SampledSignal>,
    model: &AdditiveModel,
) -> Result<RegressionSnapshot> {
    y.check_compatible(u)?;
    check_filters_stable(model)?;
    let h = u.h();
    let n = u.len();
    let ud = delay_values(u.values(), model.input_delay);
    let parts = submodel_outputs(model, &ud, h)?;
    let yt = residuals_from_parts(y.values(), &parts);
    let yf: Vec<Vec<f64>> = model
        .submodels
        .iter()
        .zip(&yt)
        .map(|(s, r)| Ok(filter_bank(r, h, s.a(), &[Polynomial::one()])?.remove(0)))
        .collect::<Result<_>>()?;
    let u_cols = input_columns(model, &ud, h)?;
    let phi = columns_to_matrix(n, interleave(output_columns(model, &yt, h)?, u_cols.clone()));
    let phi_hat = match z {
        None => columns_to_matrix(n, interleave(gradient_columns(model, &ud, h)?, u_cols)),
        Some(z) => {
            z.check_compatible(u)?;
            instrument_from(z, model)?
        }
    };
    RegressionSnapshot::new(phi, phi_hat, columns_to_matrix(n, yf), model.structure().blocks())
}
