//! Refined IV iterations with block-diagonal extraction.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::regression::{snapshot, submodel_outputs, RegressionSnapshot};
use crate::error::{Error, Result};
use crate::lti::{pack_parameters, reflect_unstable_roots, unpack_parameters, AdditiveModel, DtTransferFunction, ModelStructure, ParameterVector};
use crate::signals::generate::rng;
use crate::signals::signal::{delay_values, SampledSignal};
use crate::signals::simulate::closed_loop_input;
use crate::signals::Dataset;

/// Condition numbers above this are treated as numerically singular.
pub const SINGULAR_CONDITION: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StabilityPolicy {
    #[default]
    Reflect,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClosedLoopPolicy {
    #[default]
    Error,
    ReuseLastSensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub max_iterations: usize,
    /// Relative 2-norm change of the parameter vector. `None` picks
    /// `1e-10` in open loop and `1e-7` in closed loop.
    pub tolerance: Option<f64>,
    pub stability: StabilityPolicy,
    pub condition_warning: f64,
    pub closed_loop_instability: ClosedLoopPolicy,
    /// Drop the first `10 max(n_i)` samples from the sample moments.
    pub burn_in: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: None,
            stability: StabilityPolicy::Reflect,
            condition_warning: 1e12,
            closed_loop_instability: ClosedLoopPolicy::Error,
            burn_in: false,
        }
    }
}

impl EstimatorConfig {
    pub fn tolerance_for(&self, mode: &Mode) -> f64 {
        self.tolerance.unwrap_or(match mode {
            Mode::Open => 1e-10,
            Mode::Closed { .. } => 1e-7,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(Error::InvalidInput(format!("tolerance must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Open,
    Closed { controller: DtTransferFunction },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// One solve of the modified normal equations.
#[derive(Debug, Clone)]
pub struct IterationStep {
    /// P x K solution; column `i` holds the estimate obtained from the
    /// residual output of submodel `i`.
    pub b_full: DMatrix<f64>,
    pub beta_next: ParameterVector,
    /// Condition number of the column-equilibrated modified normal matrix.
    pub condition: f64,
    /// Largest off-block-diagonal magnitude divided by the Frobenius norm of
    /// `b_full`.
    pub off_block: f64,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub beta: ParameterVector,
    pub model: AdditiveModel,
    pub converged: bool,
    pub iterations: usize,
    /// `beta^0 .. beta^iterations`.
    pub trajectory: Vec<Vec<f64>>,
    pub condition_numbers: Vec<f64>,
    pub off_block_residuals: Vec<f64>,
    pub termination: Termination,
    /// `|| (1/N) sum phi_hat eps ||_inf` at the final estimate.
    pub orthogonality_residual: f64,
    /// Solution matrix of the last iteration.
    pub b_full: DMatrix<f64>,
    pub warnings: Vec<String>,
}

fn rms_scales(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows().max(1) as f64;
    m.column_iter()
        .map(|c| {
            let r = (c.norm_squared() / n).sqrt();
            if r > 0.0 && r.is_finite() {
                1.0 / r
            } else {
                1.0
            }
        })
        .collect()
}

/// Solve `M B_full = (1/N) PhiHat^T Upsilon` with `M = (1/N) PhiHat^T Phi`
/// and read the estimate from the block diagonal of `B_full`.
pub fn iterate_once(s: &RegressionSnapshot) -> Result<IterationStep> {
    let n = s.n_samples() as f64;
    let p = s.n_params();
    let k = s.blocks.len();
    if s.phi.iter().chain(s.phi_hat.iter()).chain(s.upsilon.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    // Equilibrate with RMS column scalings of instrument and regressor.
    let dh = rms_scales(&s.phi_hat);
    let dp = rms_scales(&s.phi);
    let mut m = s.phi_hat.tr_mul(&s.phi) / n;
    let mut rhs = s.phi_hat.tr_mul(&s.upsilon) / n;
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] *= dh[i] * dp[j];
        }
        for j in 0..k {
            rhs[(i, j)] *= dh[i];
        }
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let mut b_full = m
        .full_piv_lu()
        .solve(&rhs)
        .ok_or(Error::Singular { condition })?;
    for i in 0..p {
        for j in 0..k {
            b_full[(i, j)] *= dp[i];
        }
    }
    let mut beta = Vec::with_capacity(p);
    let mut off: f64 = 0.0;
    for (col, blk) in s.blocks.iter().enumerate() {
        for row in 0..p {
            if blk.contains(&row) {
                beta.push(b_full[(row, col)]);
            } else {
                off = off.max(b_full[(row, col)].abs());
            }
        }
    }
    let norm = b_full.norm();
    Ok(IterationStep {
        off_block: if norm > 0.0 { off / norm } else { 0.0 },
        b_full,
        beta_next: ParameterVector(beta),
        condition,
    })
}

fn stabilize(model: AdditiveModel, policy: StabilityPolicy, warnings: &mut Vec<String>, iteration: usize) -> Result<AdditiveModel> {
    let mut out = model.clone();
    for (i, s) in model.submodels.iter().enumerate() {
        if s.is_stable() {
            continue;
        }
        match policy {
            StabilityPolicy::Error => return Err(Error::UnstableModel { submodel: i + 1 }),
            StabilityPolicy::Reflect => {
                out.submodels[i] = reflect_unstable_roots(s)?;
                warnings.push(format!("iteration {iteration}: reflected unstable poles of submodel {}", i + 1));
            }
        }
    }
    Ok(out)
}

fn burn_in_rows(structure: &ModelStructure) -> usize {
    10 * structure.orders.iter().map(|(n, _)| *n).max().unwrap_or(0)
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let d: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let o: f64 = old.iter().map(|v| v * v).sum::<f64>().sqrt();
    if o > 0.0 {
        d / o
    } else {
        d
    }
}

/// Instrument excitation at `model`: `None` in open loop (the measured
/// input is used), `S_uo r` in closed loop.
fn excitation(
    data: &Dataset,
    model: &AdditiveModel,
    mode: &Mode,
    policy: ClosedLoopPolicy,
    last: &mut Option<SampledSignal>,
    warnings: &mut Vec<String>,
    iteration: usize,
) -> Result<Option<SampledSignal>> {
    let Mode::Closed { controller } = mode else {
        return Ok(None);
    };
    let r = data
        .r
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("closed-loop estimation requires a reference signal".into()))?;
    match closed_loop_input(model, controller, r) {
        Ok(z) => {
            *last = Some(z.clone());
            Ok(Some(z))
        }
        Err(e @ Error::UnstableClosedLoop { .. }) => match (policy, last.as_ref()) {
            (ClosedLoopPolicy::ReuseLastSensitivity, Some(z)) => {
                warnings.push(format!("iteration {iteration}: closed loop unstable, reusing previous sensitivity"));
                Ok(Some(z.clone()))
            }
            _ => Err(e),
        },
        Err(e) => Err(e),
    }
}

/// Output-error orthogonality residual `|| (1/N) PhiHat^T eps ||_inf`.
fn orthogonality(data: &Dataset, model: &AdditiveModel, s: &RegressionSnapshot) -> Result<f64> {
    let ud = delay_values(data.u.values(), model.input_delay);
    let parts = submodel_outputs(model, &ud, data.h())?;
    let mut eps = data.y.values().to_vec();
    for part in &parts {
        for (e, v) in eps.iter_mut().zip(part) {
            *e -= v;
        }
    }
    let n = s.n_samples();
    let eps = &eps[data.len() - n..];
    let mut worst: f64 = 0.0;
    for c in s.phi_hat.column_iter() {
        let v = c.iter().zip(eps).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        worst = worst.max(v.abs());
    }
    Ok(worst)
}

/// Iterate from `beta_init` until the relative parameter change drops below
/// the tolerance or the iteration budget is spent.
pub fn estimate(
    data: &Dataset,
    structure: &ModelStructure,
    beta_init: &[f64],
    config: &EstimatorConfig,
    mode: &Mode,
) -> Result<EstimationResult> {
    config.validate()?;
    structure.validate()?;
    let tol = config.tolerance_for(mode);
    let skip = if config.burn_in { burn_in_rows(structure) } else { 0 };
    let mut warnings = Vec::new();
    let mut model = stabilize(unpack_parameters(beta_init, structure)?, config.stability, &mut warnings, 0)?;
    let mut trajectory = vec![pack_parameters(&model).into_inner()];
    let mut conds = Vec::new();
    let mut offs = Vec::new();
    let mut last_z = None;
    let mut b_full = DMatrix::zeros(0, 0);
    let mut termination = Termination::MaxIterations;
    let mut snap = None;
    for it in 1..=config.max_iterations {
        let z = excitation(data, &model, mode, config.closed_loop_instability, &mut last_z, &mut warnings, it)?;
        let s = snapshot(&data.y, &data.u, z.as_ref(), &model)?.skip_rows(skip);
        let step = iterate_once(&s).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { iteration: it },
            e => e,
        })?;
        if step.beta_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: it });
        }
        if step.condition > config.condition_warning {
            warnings.push(format!("iteration {it}: condition number {:.3e}", step.condition));
        }
        conds.push(step.condition);
        offs.push(step.off_block);
        b_full = step.b_full;
        let next = stabilize(unpack_parameters(&step.beta_next, structure)?, config.stability, &mut warnings, it)?;
        let beta = pack_parameters(&next).into_inner();
        let change = rel_change(&beta, trajectory.last().unwrap());
        trajectory.push(beta);
        model = next;
        snap = Some(s);
        if change < tol {
            termination = Termination::Converged;
            break;
        }
    }
    let iterations = trajectory.len() - 1;
    // Orthogonality is evaluated with the instrument at the final estimate.
    let final_z = excitation(data, &model, mode, config.closed_loop_instability, &mut last_z, &mut warnings, iterations)?;
    let final_snap = match snapshot(&data.y, &data.u, final_z.as_ref(), &model) {
        Ok(s) => s.skip_rows(skip),
        Err(_) => snap.expect("at least one iteration ran"),
    };
    let orthogonality_residual = orthogonality(data, &model, &final_snap)?;
    Ok(EstimationResult {
        beta: pack_parameters(&model),
        converged: termination == Termination::Converged,
        model,
        iterations,
        trajectory,
        condition_numbers: conds,
        off_block_residuals: offs,
        termination,
        orthogonality_residual,
        b_full,
        warnings,
    })
}

/// Elementwise `beta (1 + U(-fraction, fraction))`.
pub fn perturb_parameters(beta: &[f64], fraction: f64, seed: u64) -> Result<ParameterVector> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("perturbation fraction must lie in [0, 1), got {fraction}")));
    }
    if fraction == 0.0 {
        return Ok(ParameterVector(beta.to_vec()));
    }
    let mut g = rng(seed);
    Ok(ParameterVector(
        beta.iter()
            .map(|b| b * (1.0 + g.random_range(-fraction..fraction)))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::CtSubmodel;
    use crate::poly::Polynomial;
    use crate::signals::{generate_signal, simulate_closed_loop, simulate_open_loop, ExperimentConfig, NoiseModel, SignalSpec};

    fn plant() -> AdditiveModel {
        AdditiveModel::new(
            vec![
                CtSubmodel::new(Polynomial::new(vec![1.0, 0.25, 0.25]), Polynomial::constant(3.0)).unwrap(),
                CtSubmodel::new(Polynomial::new(vec![1.0, 0.01, 0.025]), Polynomial::constant(1.0)).unwrap(),
            ],
            0,
            0,
        )
        .unwrap()
    }

    fn pid() -> DtTransferFunction {
        DtTransferFunction::new(
            Polynomial::new(vec![0.00454, -0.02058, 0.02329]),
            Polynomial::new(vec![0.0, -1.0, 1.0]),
            0.05,
        )
        .unwrap()
    }

    fn open_data(n: usize) -> Dataset {
        let cfg = ExperimentConfig {
            model: plant(),
            controller: None,
            excitation: SignalSpec::GaussianWhite { variance: 1.0 },
            noise: NoiseModel::none(),
            n,
            h: 0.05,
            seed: 3,
        };
        simulate_open_loop(&cfg).unwrap().data
    }

    #[test]
    fn zero_upsilon_gives_zero_estimate() {
        let d = open_data(500);
        let mut s = snapshot(&d.y, &d.u, None, &plant()).unwrap();
        s.upsilon.fill(0.0);
        let step = iterate_once(&s).unwrap();
        assert!(step.beta_next.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fixed_point_at_truth_open_loop() {
        let d = open_data(2000);
        let truth = pack_parameters(&plant());
        let step = iterate_once(&snapshot(&d.y, &d.u, None, &plant()).unwrap()).unwrap();
        for (a, b) in step.beta_next.iter().zip(truth.iter()) {
            assert!((a - b).abs() < 1e-8 * b.abs(), "{a} vs {b}");
        }
        assert!(step.off_block < 1e-8);
    }

    #[test]
    fn converges_quickly_from_truth() {
        let d = open_data(2000);
        let s = plant().structure();
        let truth = pack_parameters(&plant());
        let res = estimate(&d, &s, &truth, &EstimatorConfig::default(), &Mode::Open).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 2);
        assert_eq!(res.trajectory.len(), res.iterations + 1);
    }

    #[test]
    fn closed_loop_fixed_point() {
        let cfg = ExperimentConfig {
            model: plant(),
            controller: Some(pid()),
            excitation: SignalSpec::GaussianWhite { variance: 1.0 },
            noise: NoiseModel::none(),
            n: 2000,
            h: 0.05,
            seed: 9,
        };
        let d = simulate_closed_loop(&cfg).unwrap().data;
        let z = closed_loop_input(&plant(), &pid(), d.r.as_ref().unwrap()).unwrap();
        let step = iterate_once(&snapshot(&d.y, &d.u, Some(&z), &plant()).unwrap()).unwrap();
        let truth = pack_parameters(&plant());
        for (a, b) in step.beta_next.iter().zip(truth.iter()) {
            assert!((a - b).abs() < 1e-8 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn max_iterations_one_reports_not_converged() {
        let d = open_data(1000);
        let s = plant().structure();
        let init = perturb_parameters(&pack_parameters(&plant()), 0.05, 1).unwrap();
        let cfg = EstimatorConfig {
            max_iterations: 1,
            ..Default::default()
        };
        let res = estimate(&d, &s, &init, &cfg, &Mode::Open).unwrap();
        assert!(!res.converged);
        assert_eq!(res.trajectory.len(), 2);
        assert_eq!(res.termination, Termination::MaxIterations);
    }

    #[test]
    fn zero_controller_is_degenerate() {
        let d = open_data(300);
        let r = generate_signal(&SignalSpec::GaussianWhite { variance: 1.0 }, 300, 0.05, 2).unwrap();
        let d = Dataset::new(d.u, d.y, Some(r)).unwrap();
        let zero = DtTransferFunction::gain(0.0, 0.05).unwrap();
        let s = plant().structure();
        let res = estimate(&d, &s, &pack_parameters(&plant()), &EstimatorConfig::default(), &Mode::Closed { controller: zero });
        assert!(matches!(res, Err(Error::Singular { .. })));
    }

    #[test]
    fn perturbation_bounds_and_determinism() {
        let b = [1.0, -2.0, 1e-3, 5.0];
        assert_eq!(perturb_parameters(&b, 0.0, 1).unwrap().0, b.to_vec());
        let p = perturb_parameters(&b, 0.05, 7).unwrap();
        assert_eq!(p, perturb_parameters(&b, 0.05, 7).unwrap());
        for (x, y) in p.iter().zip(&b) {
            assert!(((x / y) - 1.0).abs() <= 0.05);
        }
        assert!(perturb_parameters(&b, 1.0, 1).is_err());
    }

    #[test]
    fn error_policy_rejects_unstable_init() {
        let d = open_data(200);
        let s = plant().structure();
        let mut init = pack_parameters(&plant()).into_inner();
        init[0] = -0.25;
        let cfg = EstimatorConfig {
            stability: StabilityPolicy::Error,
            ..Default::default()
        };
        assert!(matches!(estimate(&d, &s, &init, &cfg, &Mode::Open), Err(Error::UnstableModel { submodel: 1 })));
        assert!(estimate(&d, &s, &init, &EstimatorConfig::default(), &Mode::Open).is_ok());
    }
}
