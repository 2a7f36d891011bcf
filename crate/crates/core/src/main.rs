use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use addident::estimator::estimate;
use addident::experiments::report::to_toml;
use addident::experiments::{
    diagnose, exit_code, factor_unfactored, frequency_mismatch, run_montecarlo, EstimateReport, ExperimentFile,
    FactorReport, ModeName, ModelSpec, MonteCarloPlan,
};
use addident::lti::{pack_parameters, unpack_parameters, CtTransferFunction, ModelStructure};
use addident::poly::Polynomial;
use addident::signals::{closed_loop_pole_moduli, simulate_closed_loop, simulate_open_loop, Dataset};
use addident::{Error, Result};

#[derive(Parser)]
#[command(name = "addident", version, about = "Additive continuous-time model identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Open,
    Closed,
}

impl From<ModeArg> for ModeName {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Open => ModeName::Open,
            ModeArg::Closed => ModeName::Closed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate a model from a CSV dataset.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Run a Monte Carlo study and write CSV tables to a directory.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the plan's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Split a single rational model into the additive structure of
    /// `[model]`, taken from `[unfactored]` or a single-submodel estimate
    /// report.
    Factor {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Consistency, covariance and identifiability diagnostics.
    Diagnose {
        /// Supplies the true model in `[model]` and the controller.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Estimate report to diagnose; the true model is used when omitted.
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<i32> {
    let f = ExperimentFile::load(config)?;
    let cfg = f.experiment(f.n, seed.unwrap_or(f.seed))?;
    let sim = match &cfg.controller {
        Some(_) => simulate_closed_loop(&cfg)?,
        None => simulate_open_loop(&cfg)?,
    };
    sim.data.write_csv(out)?;
    println!("N = {}, h = {}", cfg.n, cfg.h);
    if cfg.noise.variance() > 0.0 {
        println!("SNR = {:.2} dB", sim.snr_db());
    } else {
        println!("SNR = inf (noise-free)");
    }
    if let Some(c) = &cfg.controller {
        let m = closed_loop_pole_moduli(&cfg.model, c)?;
        println!("closed loop stable, largest pole modulus {:.6}", m.first().copied().unwrap_or(0.0));
    }
    Ok(0)
}

fn run_estimate(config: &Path, data: &Path, out: Option<&Path>, mode: Option<ModeArg>) -> Result<i32> {
    let f = ExperimentFile::load(config)?;
    let data = Dataset::read_csv(data)?;
    let structure = f.model()?.structure();
    let mode = f.mode(mode.map(Into::into))?;
    let beta = f.beta_init()?;
    let res = estimate(&data, &structure, &beta, &f.estimator, &mode)?;
    let rep = EstimateReport::new(&res, &mode);
    emit(&to_toml(&rep)?, out)?;
    if !rep.converged {
        eprintln!("no convergence after {} iterations", rep.iterations);
        return Ok(1);
    }
    Ok(0)
}

fn montecarlo(config: &Path, out: &Path, workers: Option<usize>, seed: Option<u64>) -> Result<i32> {
    let f = ExperimentFile::load(config)?;
    let mut plan = MonteCarloPlan::from_file(&f)?;
    if let Some(s) = seed {
        plan.base_seed = s;
    }
    let workers = workers
        .or(f.montecarlo.as_ref().and_then(|m| m.workers))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rep = run_montecarlo(&plan, workers)?;
    rep.write(out)?;
    for s in &rep.summary {
        for r in &s.rows {
            println!(
                "{:<20} N = {:<7} converged {}/{} failed {}",
                s.variant.name(),
                r.n,
                r.converged,
                r.runs,
                r.failed
            );
        }
    }
    Ok(0)
}

fn factor(config: &Path, estimate: Option<&Path>, out: Option<&Path>) -> Result<i32> {
    let f = ExperimentFile::load(config)?;
    let reference = f.model()?;
    let tf = match (estimate, &f.unfactored) {
        (Some(p), _) => {
            let rep = EstimateReport::load(p)?;
            let single = rep.model.build()?;
            if single.n_submodels() != 1 {
                return Err(Error::InvalidInput("factor expects a single-submodel estimate".into()));
            }
            single.submodel_tf(0)
        }
        (None, Some(u)) => CtTransferFunction::new(Polynomial::new(u.num.clone()), Polynomial::new(u.den.clone()))?,
        (None, None) => return Err(Error::InvalidInput("give --estimate or an [unfactored] section".into())),
    };
    let structure = reference.structure();
    let model = factor_unfactored(&tf, &structure, Some(&reference))?;
    let mismatch = frequency_mismatch(&tf, &model, 10)?;
    let mut warnings = model.warnings();
    if mismatch > 1e-6 {
        warnings.push(format!("factored sum deviates from the input by {mismatch:e} (numerator truncation)"));
    }
    let rep = FactorReport {
        beta: pack_parameters(&model).into_inner(),
        model: ModelSpec::from_model(&model),
        max_relative_mismatch: mismatch,
        warnings,
    };
    emit(&to_toml(&rep)?, out)?;
    Ok(0)
}

fn run_diagnose(config: &Path, data: &Path, estimate: Option<&Path>, out: Option<&Path>, mode: Option<ModeArg>) -> Result<i32> {
    let f = ExperimentFile::load(config)?;
    let data = Dataset::read_csv(data)?;
    let mode = f.mode(mode.map(Into::into))?;
    let truth = f.model.as_ref().map(ModelSpec::build).transpose()?;
    let current = match (estimate, &truth) {
        (Some(p), _) => {
            let rep = EstimateReport::load(p)?;
            let m = rep.model.build()?;
            let s: ModelStructure = m.structure();
            unpack_parameters(&rep.beta, &s)?
        }
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(Error::InvalidInput("give --estimate or a [model] section".into())),
    };
    let truth = truth.filter(|t| t.structure() == current.structure());
    let rep = diagnose(&data, &current, truth.as_ref(), &mode)?;
    emit(&to_toml(&rep)?, out)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out, seed } => simulate(config, out, *seed),
        Command::Estimate { config, data, out, mode } => run_estimate(config, data, out.as_deref(), *mode),
        Command::Montecarlo { config, out, workers, seed } => montecarlo(config, out, *workers, *seed),
        Command::Factor { config, estimate, out } => factor(config, estimate.as_deref(), out.as_deref()),
        Command::Diagnose { config, data, estimate, out, mode } => {
            run_diagnose(config, data, estimate.as_deref(), out.as_deref(), *mode)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
