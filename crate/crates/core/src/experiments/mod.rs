//! Experiment configuration, Monte Carlo studies, factoring and reports
//! behind the command-line tool.

pub mod config;
pub mod factor;
pub mod montecarlo;
pub mod report;

pub use config::{ControllerSpec, ExperimentFile, InitSpec, ModeName, ModelSpec, MonteCarloSpec, NoiseSpec, SubmodelSpec, Variant};
pub use factor::{factor_unfactored, unfactored_parameters, unfactored_structure};
pub use montecarlo::{mse_row, parameter_names, run_montecarlo, MonteCarloPlan, MonteCarloReport, MseRow, RunRecord};
pub use report::{diagnose, estimator_label, exit_code, frequency_mismatch, DiagnoseReport, EstimateReport, FactorReport};
