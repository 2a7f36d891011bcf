//! TOML experiment files.
//!
//! ```toml
//! h = 0.05
//! n = 5000
//! seed = 1
//! mode = "closed"            # optional, inferred from [controller]
//!
//! [model]
//! integrator_order = 0
//! input_delay = 0
//! [[model.submodels]]
//! a = [0.25, 0.25]           # a_1 .. a_n, A(p) = 1 + a_1 p + ... + a_n p^n
//! b = [3.0]                  # b_0 .. b_m
//!
//! [excitation]
//! kind = "gaussian_white"
//! variance = 1.0
//!
//! [noise]                    # v = (num / den)(q) e, coefficients ascending in q
//! num = [1.0]
//! den = [1.0]
//! variance = 0.01
//!
//! [controller]               # either num/den ascending in q, or kp/ki/kd
//! kp = 0.0115
//! ki = 0.00725
//! kd = 0.00454
//!
//! [estimator]                # see EstimatorConfig
//! max_iterations = 100
//!
//! [init]                     # beta = [...] or perturb = 0.05 with seed
//! perturb = 0.05
//! seed = 7
//!
//! [montecarlo]
//! sizes = [2000, 8000, 32000]
//! runs = 50
//! variants = ["additive_open"]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{perturb_parameters, EstimatorConfig, Mode};
use crate::lti::{pack_parameters, AdditiveModel, CtSubmodel, DtTransferFunction};
use crate::poly::Polynomial;
use crate::signals::{ExperimentConfig, NoiseModel, SignalSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmodelSpec {
    /// `a_1 .. a_n`; the constant term is fixed to one.
    #[serde(default)]
    pub a: Vec<f64>,
    /// `b_0 .. b_m`.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub integrator_order: usize,
    #[serde(default)]
    pub input_delay: usize,
    pub submodels: Vec<SubmodelSpec>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<AdditiveModel> {
        let subs = self
            .submodels
            .iter()
            .map(|s| {
                let mut theta = s.a.clone();
                theta.extend_from_slice(&s.b);
                if s.b.is_empty() {
                    return Err(Error::InvalidInput("model.submodels.b must not be empty".into()));
                }
                CtSubmodel::from_theta(s.a.len(), s.b.len() - 1, &theta)
            })
            .collect::<Result<Vec<_>>>()?;
        AdditiveModel::new(subs, self.integrator_order, self.input_delay)
    }

    pub fn from_model(model: &AdditiveModel) -> Self {
        Self {
            integrator_order: model.integrator_order,
            input_delay: model.input_delay,
            submodels: model
                .submodels
                .iter()
                .map(|s| {
                    let t = s.theta();
                    SubmodelSpec {
                        a: t[..s.n()].to_vec(),
                        b: t[s.n()..].to_vec(),
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ControllerSpec {
    Transfer { num: Vec<f64>, den: Vec<f64> },
    /// `kp + ki q / (q - 1) + kd (q - 1) / q`.
    Pid {
        #[serde(default)]
        kp: f64,
        #[serde(default)]
        ki: f64,
        #[serde(default)]
        kd: f64,
    },
}

impl ControllerSpec {
    pub fn build(&self, h: f64) -> Result<DtTransferFunction> {
        match self {
            Self::Transfer { num, den } => DtTransferFunction::new(Polynomial::new(num.clone()), Polynomial::new(den.clone()), h),
            &Self::Pid { kp, ki, kd } => DtTransferFunction::new(
                Polynomial::new(vec![kd, -kp - 2.0 * kd, kp + ki + kd]),
                Polynomial::new(vec![0.0, -1.0, 1.0]),
                h,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default = "unit")]
    pub num: Vec<f64>,
    #[serde(default = "unit")]
    pub den: Vec<f64>,
    pub variance: f64,
}

fn unit() -> Vec<f64> {
    vec![1.0]
}

impl NoiseSpec {
    pub fn build(&self) -> Result<NoiseModel> {
        NoiseModel::new(Polynomial::new(self.num.clone()), Polynomial::new(self.den.clone()), self.variance)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub beta: Option<Vec<f64>>,
    /// Relative uniform perturbation of the `[model]` parameters.
    pub perturb: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AdditiveOpen,
    AdditiveClosed,
    SrivcUnfactored,
    ClsrivcUnfactored,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::AdditiveOpen,
        Variant::AdditiveClosed,
        Variant::SrivcUnfactored,
        Variant::ClsrivcUnfactored,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::AdditiveOpen => "additive_open",
            Self::AdditiveClosed => "additive_closed",
            Self::SrivcUnfactored => "srivc_unfactored",
            Self::ClsrivcUnfactored => "clsrivc_unfactored",
        }
    }

    /// Position in [`Variant::ALL`], used for seeding.
    pub fn index(self) -> u64 {
        Self::ALL.iter().position(|v| *v == self).unwrap() as u64
    }

    pub fn closed_loop(self) -> bool {
        matches!(self, Self::AdditiveClosed | Self::ClsrivcUnfactored)
    }

    pub fn unfactored(self) -> bool {
        matches!(self, Self::SrivcUnfactored | Self::ClsrivcUnfactored)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub variants: Vec<Variant>,
    #[serde(default = "default_perturb")]
    pub perturb: f64,
    /// Defaults to the top-level `seed`.
    pub base_seed: Option<u64>,
    pub workers: Option<usize>,
}

fn default_perturb() -> f64 {
    0.05
}

/// Rational function in `p`, coefficients ascending, to be split by
/// `factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnfactoredSpec {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub h: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub mode: Option<ModeName>,
    pub model: Option<ModelSpec>,
    pub excitation: Option<SignalSpec>,
    pub noise: Option<NoiseSpec>,
    pub controller: Option<ControllerSpec>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub init: Option<InitSpec>,
    pub montecarlo: Option<MonteCarloSpec>,
    pub unfactored: Option<UnfactoredSpec>,
}

fn default_n() -> usize {
    1000
}

impl ExperimentFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let f: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if !(f.h > 0.0) || !f.h.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("field `h` must be a positive sampling period, got {}", f.h),
            });
        }
        f.estimator.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn model(&self) -> Result<AdditiveModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("missing [model] section".into()))?
            .build()
    }

    pub fn controller(&self) -> Result<Option<DtTransferFunction>> {
        self.controller.as_ref().map(|c| c.build(self.h)).transpose()
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        self.noise.as_ref().map_or(Ok(NoiseModel::none()), NoiseSpec::build)
    }

    /// `mode` override, else the file's `mode`, else closed when a
    /// controller is given.
    pub fn mode(&self, override_mode: Option<ModeName>) -> Result<Mode> {
        let name = override_mode.or(self.mode).unwrap_or(if self.controller.is_some() {
            ModeName::Closed
        } else {
            ModeName::Open
        });
        match name {
            ModeName::Open => Ok(Mode::Open),
            ModeName::Closed => Ok(Mode::Closed {
                controller: self
                    .controller()?
                    .ok_or_else(|| Error::InvalidInput("closed-loop mode requires a [controller] section".into()))?,
            }),
        }
    }

    pub fn experiment(&self, n: usize, seed: u64) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            model: self.model()?,
            controller: self.controller()?,
            excitation: self
                .excitation
                .clone()
                .ok_or_else(|| Error::InvalidInput("missing [excitation] section".into()))?,
            noise: self.noise()?,
            n,
            h: self.h,
            seed,
        })
    }

    /// Starting parameters: `init.beta`, else the `[model]` parameters
    /// perturbed by `init.perturb`, else the `[model]` parameters.
    pub fn beta_init(&self) -> Result<Vec<f64>> {
        let init = self.init.clone().unwrap_or_default();
        if let Some(b) = init.beta {
            if init.perturb.is_some() {
                return Err(Error::InvalidInput("init.beta and init.perturb are mutually exclusive".into()));
            }
            return Ok(b);
        }
        let beta = pack_parameters(&self.model()?).into_inner();
        match init.perturb {
            Some(f) => Ok(perturb_parameters(&beta, f, init.seed)?.into_inner()),
            None => Ok(beta),
        }
    }
}
