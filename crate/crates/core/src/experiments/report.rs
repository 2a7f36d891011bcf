//! Serializable reports written by the command-line tool.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::ModelSpec;
use crate::diagnostics::{
    asymptotic_covariance, covariance_report, identifiability_check, residual_variance, theorem2_report,
    ConsistencyReport, CovarianceReport, IdentifiabilityReport,
};
use crate::error::{Error, Result};
use crate::estimator::{instrument_from, EstimationResult, Mode, Termination};
use crate::lti::{AdditiveModel, CtTransferFunction};
use crate::signals::{closed_loop_input, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub label: String,
    pub mode: String,
    pub converged: bool,
    pub termination: String,
    pub iterations: usize,
    pub beta: Vec<f64>,
    pub model: ModelSpec,
    pub orthogonality_residual: f64,
    pub condition_numbers: Vec<f64>,
    /// Off-block-diagonal magnitude of each full solve relative to its
    /// Frobenius norm.
    pub off_block_residuals: Vec<f64>,
    pub trajectory: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// `SRIVC-equivalent` / `CLSRIVC-equivalent` for single-submodel
/// structures, `additive` otherwise.
pub fn estimator_label(k: usize, mode: &Mode) -> &'static str {
    match (k, mode) {
        (1, Mode::Open) => "SRIVC-equivalent",
        (1, Mode::Closed { .. }) => "CLSRIVC-equivalent",
        (_, Mode::Open) => "additive RIV (open loop)",
        (_, Mode::Closed { .. }) => "additive RIV (closed loop)",
    }
}

impl EstimateReport {
    pub fn new(res: &EstimationResult, mode: &Mode) -> Self {
        Self {
            label: estimator_label(res.model.n_submodels(), mode).into(),
            mode: match mode {
                Mode::Open => "open".into(),
                Mode::Closed { .. } => "closed".into(),
            },
            converged: res.converged,
            termination: match res.termination {
                Termination::Converged => "converged".into(),
                Termination::MaxIterations => "max_iterations".into(),
            },
            iterations: res.iterations,
            beta: res.beta.0.clone(),
            model: ModelSpec::from_model(&res.model),
            orthogonality_residual: res.orthogonality_residual,
            condition_numbers: res.condition_numbers.clone(),
            off_block_residuals: res.off_block_residuals.clone(),
            trajectory: res.trajectory.clone(),
            warnings: res.warnings.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub beta: Vec<f64>,
    pub model: ModelSpec,
    /// Largest relative frequency-response mismatch between the factored sum
    /// and the original over the check grid.
    pub max_relative_mismatch: f64,
    pub warnings: Vec<String>,
}

/// Largest `|G_sum(jw) - G(jw)| / |G(jw)|` over `points` log-spaced
/// frequencies spanning the pole magnitudes.
pub fn frequency_mismatch(tf: &CtTransferFunction, model: &AdditiveModel, points: usize) -> Result<f64> {
    let mags: Vec<f64> = if tf.den.degree() > 0 {
        tf.den.roots()?.iter().map(|r| r.norm()).filter(|m| *m > 0.0).collect()
    } else {
        Vec::new()
    };
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min).min(1.0) / 10.0;
    let hi = mags.iter().copied().fold(0.0, f64::max).max(1.0) * 10.0;
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let w = lo * (hi / lo).powf(k as f64 / (points.max(2) - 1) as f64);
        let s = Complex64::new(0.0, w);
        let g = tf.eval(s);
        worst = worst.max((model.eval(s) - g).norm() / g.norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub consistency: Option<ConsistencyReport>,
    pub covariance: CovarianceReport,
    pub identifiability: IdentifiabilityReport,
    /// Parts that could not be computed and why.
    pub omitted: Vec<String>,
}

/// Diagnostics at `current`. Interpolation-error checks and the
/// true-gradient covariance need `true_model`; without it they are omitted
/// and the covariance uses the instrument as its own gradient.
pub fn diagnose(
    data: &Dataset,
    current: &AdditiveModel,
    true_model: Option<&AdditiveModel>,
    mode: &Mode,
) -> Result<DiagnoseReport> {
    let mut omitted = Vec::new();
    let excitation = |m: &AdditiveModel| -> Result<_> {
        match mode {
            Mode::Open => Ok(data.u.clone()),
            Mode::Closed { controller } => {
                let r = data
                    .r
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("closed-loop diagnostics require a reference column".into()))?;
                closed_loop_input(m, controller, r)
            }
        }
    };
    let zeta = instrument_from(&excitation(current)?, current)?;
    let consistency = match true_model {
        Some(t) => Some(theorem2_report(data, t, current, mode)?),
        None => {
            omitted.push("consistency: no true model given, interpolation error not computable".into());
            None
        }
    };
    let psi = match true_model {
        Some(t) => instrument_from(&excitation(t)?, t)?,
        None => {
            omitted.push("covariance: no true model given, gradient taken at the estimate".into());
            zeta.clone()
        }
    };
    let sigma2 = residual_variance(data, current)?;
    let p = asymptotic_covariance(&zeta, &psi, sigma2)?;
    Ok(DiagnoseReport {
        consistency,
        covariance: covariance_report(&p, sigma2, None),
        identifiability: identifiability_check(current),
        omitted,
    })
}

/// Command-line exit status: 2 for input errors, 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnstableModel { .. } | Error::UnstableClosedLoop { .. } | Error::Singular { .. } | Error::NonFinite { .. } => 3,
        _ => 2,
    }
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))
}
