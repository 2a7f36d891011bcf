//! Monte Carlo harness over sample sizes, runs and estimator variants.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentFile, Variant};
use super::factor::{factor_unfactored, unfactored_parameters, unfactored_structure};
use crate::error::{Error, Result};
use crate::estimator::{estimate, perturb_parameters, EstimatorConfig, Mode};
use crate::lti::{pack_parameters, unpack_parameters, AdditiveModel};
use crate::signals::{mix_seed, simulate_closed_loop, simulate_open_loop, Dataset, ExperimentConfig};

#[derive(Debug, Clone)]
pub struct MonteCarloPlan {
    /// `n` and `seed` are replaced per cell.
    pub template: ExperimentConfig,
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub variants: Vec<Variant>,
    pub perturb: f64,
    pub base_seed: u64,
    pub estimator: EstimatorConfig,
}

impl MonteCarloPlan {
    pub fn from_file(f: &ExperimentFile) -> Result<Self> {
        let mc = f
            .montecarlo
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("missing [montecarlo] section".into()))?;
        let plan = Self {
            template: f.experiment(0, 0)?,
            sizes: mc.sizes.clone(),
            runs: mc.runs,
            variants: mc.variants.clone(),
            perturb: mc.perturb,
            base_seed: mc.base_seed.unwrap_or(f.seed),
            estimator: f.estimator.clone(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("montecarlo.sizes must be nonempty and strictly increasing".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidInput("montecarlo.runs must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidInput("montecarlo.variants must not be empty".into()));
        }
        if self.variants.iter().any(|v| v.closed_loop()) && self.template.controller.is_none() {
            return Err(Error::InvalidInput("closed-loop variants require a [controller] section".into()));
        }
        if !(0.0..1.0).contains(&self.perturb) {
            return Err(Error::InvalidInput("montecarlo.perturb must lie in [0, 1)".into()));
        }
        self.estimator.validate()
    }

    pub fn truth(&self) -> Vec<f64> {
        pack_parameters(&self.template.model).into_inner()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub n: usize,
    pub run: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Additive parameters; factored for the unfactored variants.
    pub beta: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub n: usize,
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    pub non_convergence_rate: f64,
    /// Per-parameter mean squared error over converged runs.
    pub mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub rows: Vec<MseRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub parameter_names: Vec<String>,
    pub truth: Vec<f64>,
    pub summary: Vec<VariantSummary>,
    pub runs: Vec<RunRecord>,
}

pub fn parameter_names(model: &AdditiveModel) -> Vec<String> {
    let mut names = Vec::new();
    for (i, s) in model.submodels.iter().enumerate() {
        names.extend((1..=s.n()).map(|j| format!("a{}_{j}", i + 1)));
        names.extend((0..=s.m()).map(|j| format!("b{}_{j}", i + 1)));
    }
    names
}

/// Per-parameter MSE of one variant at one sample size, over converged
/// runs only.
pub fn mse_row(runs: &[RunRecord], truth: &[f64], variant: Variant, n: usize) -> MseRow {
    let cell: Vec<&RunRecord> = runs.iter().filter(|r| r.variant == variant && r.n == n).collect();
    let good: Vec<&Vec<f64>> = cell.iter().filter(|r| r.converged).filter_map(|r| r.beta.as_ref()).collect();
    let mse = (0..truth.len())
        .map(|j| {
            if good.is_empty() {
                f64::NAN
            } else {
                good.iter().map(|b| (b[j] - truth[j]).powi(2)).sum::<f64>() / good.len() as f64
            }
        })
        .collect();
    let total = cell.len();
    MseRow {
        n,
        runs: total,
        converged: good.len(),
        failed: cell.iter().filter(|r| r.error.is_some()).count(),
        non_convergence_rate: if total == 0 { 0.0 } else { (total - good.len()) as f64 / total as f64 },
        mse,
    }
}

fn run_variant(plan: &MonteCarloPlan, data: &Dataset, variant: Variant, init_seed: u64) -> Result<(bool, usize, Vec<f64>)> {
    let truth = &plan.template.model;
    let structure = truth.structure();
    let init = perturb_parameters(&plan.truth(), plan.perturb, init_seed)?;
    let mode = if variant.closed_loop() {
        Mode::Closed {
            controller: plan.template.controller.clone().expect("validated"),
        }
    } else {
        Mode::Open
    };
    if !variant.unfactored() {
        let res = estimate(data, &structure, &init, &plan.estimator, &mode)?;
        return Ok((res.converged, res.iterations, res.beta.into_inner()));
    }
    let single = unfactored_structure(&structure);
    let init = unfactored_parameters(&unpack_parameters(&init, &structure)?);
    let res = estimate(data, &single, &init, &plan.estimator, &mode)?;
    let factored = factor_unfactored(&res.model.submodel_tf(0), &structure, Some(truth))?;
    Ok((res.converged, res.iterations, pack_parameters(&factored).into_inner()))
}

fn run_cell(plan: &MonteCarloPlan, si: usize, run: usize) -> Vec<RunRecord> {
    let n = plan.sizes[si];
    let cfg = ExperimentConfig {
        n,
        seed: mix_seed(plan.base_seed, &[si as u64, run as u64]),
        ..plan.template.clone()
    };
    let sim = if cfg.controller.is_some() {
        simulate_closed_loop(&cfg)
    } else {
        simulate_open_loop(&cfg)
    };
    plan.variants
        .iter()
        .map(|&variant| {
            let base = RunRecord {
                variant,
                n,
                run,
                converged: false,
                iterations: 0,
                beta: None,
                error: None,
            };
            let outcome = sim.as_ref().map_err(|e| e.to_string()).and_then(|s| {
                let seed = mix_seed(plan.base_seed, &[si as u64, run as u64, variant.index()]);
                run_variant(plan, &s.data, variant, seed).map_err(|e| e.to_string())
            });
            match outcome {
                Ok((converged, iterations, beta)) => RunRecord {
                    converged,
                    iterations,
                    beta: Some(beta),
                    ..base
                },
                Err(e) => RunRecord { error: Some(e), ..base },
            }
        })
        .collect()
}

/// Run every (size, run, variant) cell on a pool of `workers` threads.
/// Data realizations are shared across variants within a cell; starting
/// points are drawn per variant.
pub fn run_montecarlo(plan: &MonteCarloPlan, workers: usize) -> Result<MonteCarloReport> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<(usize, usize)> = (0..plan.sizes.len()).flat_map(|si| (0..plan.runs).map(move |r| (si, r))).collect();
    let per_cell: Vec<Vec<RunRecord>> = pool.install(|| cells.par_iter().map(|&(si, r)| run_cell(plan, si, r)).collect());
    let mut runs: Vec<RunRecord> = per_cell.into_iter().flatten().collect();
    runs.sort_by_key(|r| (r.variant.index(), r.n, r.run));
    let truth = plan.truth();
    let summary = plan
        .variants
        .iter()
        .map(|&variant| VariantSummary {
            variant,
            rows: plan.sizes.iter().map(|&n| mse_row(&runs, &truth, variant, n)).collect(),
        })
        .collect();
    Ok(MonteCarloReport {
        parameter_names: parameter_names(&plan.template.model),
        truth,
        summary,
        runs,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl MonteCarloReport {
    pub fn mse_csv(&self, variant: Variant) -> Option<String> {
        let s = self.summary.iter().find(|s| s.variant == variant)?;
        let mut out = format!("n,runs,converged,failed,{}\n", self.parameter_names.join(","));
        for r in &s.rows {
            let vals: Vec<String> = r.mse.iter().map(|v| fmt(*v)).collect();
            let _ = writeln!(out, "{},{},{},{},{}", r.n, r.runs, r.converged, r.failed, vals.join(","));
        }
        Some(out)
    }

    pub fn runs_csv(&self) -> String {
        let mut out = format!("variant,n,run,converged,iterations,error,{}\n", self.parameter_names.join(","));
        for r in &self.runs {
            let vals: Vec<String> = match &r.beta {
                Some(b) => b.iter().map(|v| fmt(*v)).collect(),
                None => vec![String::new(); self.parameter_names.len()],
            };
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.variant.name(),
                r.n,
                r.run,
                r.converged,
                r.iterations,
                err,
                vals.join(",")
            );
        }
        out
    }

    /// `mse_<variant>.csv` per variant, `runs.csv` and `summary.toml`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        for s in &self.summary {
            put(&format!("mse_{}.csv", s.variant.name()), self.mse_csv(s.variant).unwrap())?;
        }
        put("runs.csv", self.runs_csv())?;
        #[derive(Serialize)]
        struct Summary<'a> {
            parameter_names: &'a [String],
            truth: &'a [f64],
            variants: &'a [VariantSummary],
        }
        let text = toml::to_string(&Summary {
            parameter_names: &self.parameter_names,
            truth: &self.truth,
            variants: &self.summary,
        })
        .map_err(|e| Error::InvalidInput(format!("cannot serialize summary: {e}")))?;
        put("summary.toml", text)
    }
}
