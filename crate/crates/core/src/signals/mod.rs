//! Sampled signals, ZOH prefiltering, generators and data simulation.

pub mod dataset;
pub mod filter;
pub mod generate;
pub mod signal;
pub mod simulate;

pub use dataset::Dataset;
pub use filter::{derivative_filter_bank, filter_bank, filter_ct_zoh, filter_dt};
pub use generate::{generate_signal, mix_seed, multisine_bins, NoiseModel, SignalSpec};
pub use signal::{snr_db, SampledSignal};
pub use simulate::{
    closed_loop_input, closed_loop_pole_moduli, discrete_plant, model_output, simulate_closed_loop, simulate_open_loop, ExperimentConfig,
    Simulation,
};
