//! Additive refined instrumental-variable estimator for open- and
//! closed-loop data.

pub mod iterate;
pub mod regression;

pub use iterate::{
    estimate, iterate_once, perturb_parameters, ClosedLoopPolicy, EstimationResult, EstimatorConfig, IterationStep,
    Mode, StabilityPolicy, Termination, SINGULAR_CONDITION,
};
pub use regression::{
    build_instrument_closed, build_instrument_open, build_regressor, instrument_from, residual_outputs,
    RegressionSnapshot,
};
