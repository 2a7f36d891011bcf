//! Consistency and covariance diagnostics for simulation studies, plus
//! Sylvester-based identifiability checks.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::regression::{columns_to_matrix, submodel_outputs};
use crate::estimator::{instrument_from, Mode};
use crate::lti::sylvester::{resultant_scale, sylvester_matrix, DEFAULT_RESULTANT_THRESHOLD};
use crate::lti::AdditiveModel;
use crate::poly::Polynomial;
use crate::signals::filter_bank;
use crate::signals::signal::{delay_values, SampledSignal};
use crate::signals::simulate::closed_loop_input;
use crate::signals::Dataset;

fn check_same_structure(true_model: &AdditiveModel, current: &AdditiveModel) -> Result<()> {
    if true_model.structure() != current.structure() {
        return Err(Error::InvalidInput("true and current models must share the same structure".into()));
    }
    Ok(())
}

/// Regressor free of noise and interpolation error, built from the
/// noise-free excitation `z` (the input in open loop, `S_uo r` in closed
/// loop): block `i` is
/// `[-p^j B_i* / (p^l A_i A_i*) z (j = 1..n_i), p^j / (p^l A_i) z (j = 0..m_i)]`.
pub fn noise_free_regressor(z: &SampledSignal, true_model: &AdditiveModel, current: &AdditiveModel) -> Result<DMatrix<f64>> {
    check_same_structure(true_model, current)?;
    if let Some(i) = current.submodels.iter().position(|s| !s.is_stable()) {
        return Err(Error::UnstableModel { submodel: i + 1 });
    }
    let zd = delay_values(z.values(), current.input_delay);
    let h = z.h();
    let mut cols = Vec::new();
    for (i, (s, t)) in current.submodels.iter().zip(&true_model.submodels).enumerate() {
        let l = if i == 0 { current.integrator_order } else { 0 };
        if s.n() > 0 {
            let den = (s.a() * t.a()).shift(l);
            let nb = -t.b();
            let nums: Vec<Polynomial> = (1..=s.n()).map(|j| nb.shift(j)).collect();
            cols.extend(filter_bank(&zd, h, &den, &nums)?);
        }
        let nums: Vec<Polynomial> = (0..=s.m()).map(Polynomial::monomial).collect();
        cols.extend(filter_bank(&zd, h, &s.a().shift(l), &nums)?);
    }
    Ok(columns_to_matrix(z.len(), cols))
}

/// Decomposition of the regressor error `Delta = phi - phi_tilde` for
/// noise-free data.
#[derive(Debug, Clone)]
pub struct InterpolationError {
    /// Filtering the sampled output versus filtering jointly with the
    /// input.
    pub interpolation: DMatrix<f64>,
    /// Contribution of the other submodels' errors through the residual
    /// output; zero at the true parameters.
    pub bias: DMatrix<f64>,
}

impl InterpolationError {
    pub fn total(&self) -> DMatrix<f64> {
        &self.interpolation + &self.bias
    }
}

/// `Delta` per output-derivative column; input columns are zero.
pub fn interpolation_error_matrix(
    z: &SampledSignal,
    true_model: &AdditiveModel,
    current: &AdditiveModel,
) -> Result<InterpolationError> {
    check_same_structure(true_model, current)?;
    let h = z.h();
    let n = z.len();
    let zd = delay_values(z.values(), current.input_delay);
    let x_true = submodel_outputs(true_model, &zd, h)?;
    let x_cur = submodel_outputs(current, &zd, h)?;
    let phi_t = noise_free_regressor(z, true_model, current)?;
    let p = phi_t.ncols();
    let mut interp = DMatrix::zeros(n, p);
    let mut bias = DMatrix::zeros(n, p);
    let mut col = 0;
    for (i, s) in current.submodels.iter().enumerate() {
        if s.n() > 0 {
            let nums: Vec<Polynomial> = (1..=s.n()).map(|j| -&Polynomial::monomial(j)).collect();
            let sampled = filter_bank(&x_true[i], h, s.a(), &nums)?;
            let mut other = vec![0.0; n];
            for l in (0..current.n_submodels()).filter(|&l| l != i) {
                for k in 0..n {
                    other[k] += x_true[l][k] - x_cur[l][k];
                }
            }
            let biased = filter_bank(&other, h, s.a(), &nums)?;
            for j in 0..s.n() {
                for k in 0..n {
                    interp[(k, col + j)] = sampled[j][k] - phi_t[(k, col + j)];
                    bias[(k, col + j)] = biased[j][k];
                }
            }
        }
        col += s.n_params();
    }
    Ok(InterpolationError {
        interpolation: interp,
        bias,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    /// `sigma_min((1/N) PhiHat^T PhiTilde)`.
    pub sigma_min: f64,
    /// `||(1/N) PhiHat^T Delta||_2`.
    pub delta_norm: f64,
    pub satisfied: bool,
    pub sylvester_determinants: Vec<f64>,
}

/// Compare the interpolation-error term with the smallest singular value
/// of the noise-free modified normal matrix.
pub fn check_theorem2_condition(
    phi_hat: &DMatrix<f64>,
    phi_tilde: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    model: &AdditiveModel,
) -> Result<ConsistencyReport> {
    let n = phi_hat.nrows() as f64;
    if phi_tilde.shape() != phi_hat.shape() || delta.shape() != phi_hat.shape() {
        return Err(Error::InvalidInput("instrument, regressor and Delta shapes differ".into()));
    }
    let m = phi_hat.tr_mul(phi_tilde) / n;
    let sigma_min = m.singular_values().min();
    let delta_norm = (phi_hat.tr_mul(delta) / n).singular_values().max();
    Ok(ConsistencyReport {
        sigma_min,
        delta_norm,
        satisfied: delta_norm < sigma_min,
        sylvester_determinants: identifiability_check(model).sylvester_determinants,
    })
}

/// Build every ingredient from a noise-free dataset and run
/// [`check_theorem2_condition`] at `current`.
pub fn theorem2_report(
    data: &Dataset,
    true_model: &AdditiveModel,
    current: &AdditiveModel,
    mode: &Mode,
) -> Result<ConsistencyReport> {
    let (z, phi_hat) = match mode {
        Mode::Open => (data.u.clone(), instrument_from(&data.u, current)?),
        Mode::Closed { controller } => {
            let r = data
                .r
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("closed-loop diagnostics require a reference signal".into()))?;
            let rt = closed_loop_input(true_model, controller, r)?;
            let zh = closed_loop_input(current, controller, r)?;
            (rt, instrument_from(&zh, current)?)
        }
    };
    let phi_tilde = noise_free_regressor(&z, true_model, current)?;
    let delta = interpolation_error_matrix(&z, true_model, current)?.total();
    check_theorem2_condition(&phi_hat, &phi_tilde, &delta, current)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `sigma2 M_zp^{-1} M_zz M_pz^{-1}` with `M_zp = (1/N) zeta^T psi`, the
/// white-noise asymptotic covariance of an IV estimate with instrument
/// `zeta`.
pub fn asymptotic_covariance(zeta: &DMatrix<f64>, psi: &DMatrix<f64>, sigma2: f64) -> Result<DMatrix<f64>> {
    if zeta.shape() != psi.shape() {
        return Err(Error::InvalidInput("instrument and gradient shapes differ".into()));
    }
    let n = zeta.nrows() as f64;
    let m_zp = zeta.tr_mul(psi) / n;
    let m_zz = zeta.tr_mul(zeta) / n;
    let inv = m_zp.clone().try_inverse().ok_or_else(|| Error::Singular {
        condition: f64::INFINITY,
    })?;
    Ok(symmetrize(&(&inv * m_zz * inv.transpose() * sigma2)))
}

/// Sample variance of the output-error residual at `model`.
pub fn residual_variance(data: &Dataset, model: &AdditiveModel) -> Result<f64> {
    let ud = delay_values(data.u.values(), model.input_delay);
    let parts = submodel_outputs(model, &ud, data.h())?;
    let mut eps = data.y.values().to_vec();
    for p in &parts {
        for (e, v) in eps.iter_mut().zip(p) {
            *e -= v;
        }
    }
    Ok(data.y.with_values(eps).variance())
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub label: String,
    pub sigma2: f64,
    pub p_iv: Vec<Vec<f64>>,
    /// Sample covariance of `sqrt(N) (beta_hat - beta*)` over Monte Carlo
    /// runs, when available.
    pub sample_covariance: Option<Vec<Vec<f64>>>,
    /// Smallest eigenvalue of `sample_covariance - p_iv`.
    pub psd_margin: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Sample covariance of `sqrt(n) (estimates - truth)`.
pub fn sample_covariance(estimates: &[Vec<f64>], truth: &[f64], n: usize) -> Result<DMatrix<f64>> {
    let p = truth.len();
    if estimates.len() < 2 {
        return Err(Error::InvalidInput("sample covariance needs at least two estimates".into()));
    }
    let scaled: Vec<Vec<f64>> = estimates
        .iter()
        .map(|e| e.iter().zip(truth).map(|(a, b)| (n as f64).sqrt() * (a - b)).collect())
        .collect();
    let mean: Vec<f64> = (0..p).map(|j| scaled.iter().map(|s| s[j]).sum::<f64>() / scaled.len() as f64).collect();
    let mut c = DMatrix::zeros(p, p);
    for s in &scaled {
        for i in 0..p {
            for j in 0..p {
                c[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    Ok(symmetrize(&(c / (scaled.len() - 1) as f64)))
}

pub fn covariance_report(p_iv: &DMatrix<f64>, sigma2: f64, sample: Option<&DMatrix<f64>>) -> CovarianceReport {
    CovarianceReport {
        label: "white-noise formula".into(),
        sigma2,
        p_iv: rows(p_iv),
        sample_covariance: sample.map(rows),
        psd_margin: sample.map(|s| min_eigenvalue(&(s - p_iv))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityReport {
    /// `|det S(-B_i, A_i)|` per submodel.
    pub sylvester_determinants: Vec<f64>,
    /// Smallest distance between roots of different denominators.
    pub min_root_distance: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn identifiability_check(model: &AdditiveModel) -> IdentifiabilityReport {
    let mut warnings = Vec::new();
    let dets: Vec<f64> = model
        .submodels
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d = sylvester_matrix(&-s.b(), s.a()).determinant().abs();
            if d < DEFAULT_RESULTANT_THRESHOLD * resultant_scale(s.b(), s.a()) {
                warnings.push(format!("submodel {}: numerator and denominator share a root (|det S| = {d:e})", i + 1));
            }
            d
        })
        .collect();
    let roots: Vec<Vec<_>> = model
        .submodels
        .iter()
        .map(|s| if s.a().degree() > 0 { s.a().roots().unwrap_or_default() } else { Vec::new() })
        .collect();
    let mut min_dist: Option<f64> = None;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            for a in &roots[i] {
                for b in &roots[j] {
                    let d = (a - b).norm();
                    min_dist = Some(min_dist.map_or(d, |m| m.min(d)));
                    if d < 1e-8 * a.norm().max(b.norm()).max(1.0) {
                        warnings.push(format!("submodels {} and {} share the denominator root {a}", i + 1, j + 1));
                    }
                }
            }
        }
    }
    IdentifiabilityReport {
        sylvester_determinants: dets,
        min_root_distance: min_dist,
        warnings,
    }
}
