//! Seeded excitation and noise generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::filter::filter_dt_values;
use super::signal::SampledSignal;
use crate::error::{Error, Result};
use crate::lti::DtTransferFunction;
use crate::poly::Polynomial;

/// Excitation signal description, tagged by `kind` in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    GaussianWhite {
        variance: f64,
    },
    /// Random-phase multisine with `lines` equal-amplitude components on
    /// exact DFT bins spread evenly over `[f_min, f_max]` Hz.
    Multisine {
        f_min: f64,
        f_max: f64,
        lines: usize,
        #[serde(default = "one")]
        rms: f64,
    },
    /// Random binary sequence `±amplitude`, each level held for `hold`
    /// samples.
    Prbs {
        amplitude: f64,
        #[serde(default = "one_usize")]
        hold: usize,
    },
    Zero,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// splitmix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a list of indices.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// DFT bins used by a multisine: `lines` indices evenly spread over the
/// bins whose frequency `k / (N h)` lies in `[f_min, f_max]`.
pub fn multisine_bins(f_min: f64, f_max: f64, lines: usize, n: usize, h: f64) -> Result<Vec<usize>> {
    if !(f_min >= 0.0) || !(f_max >= f_min) || lines == 0 {
        return Err(Error::InvalidInput(format!(
            "empty multisine band [{f_min}, {f_max}] Hz with {lines} lines"
        )));
    }
    let df = 1.0 / (n as f64 * h);
    let lo = ((f_min / df) - 1e-9).ceil().max(1.0) as usize;
    let hi = ((f_max / df) + 1e-9).floor().min(((n - 1) / 2) as f64) as usize;
    if hi < lo {
        return Err(Error::InvalidInput(format!(
            "multisine band [{f_min}, {f_max}] Hz contains no DFT bin below Nyquist for N = {n}"
        )));
    }
    let available = hi - lo + 1;
    if lines > available {
        return Err(Error::InvalidInput(format!(
            "multisine requests {lines} lines but the band holds only {available} bins"
        )));
    }
    if lines == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) as f64 / (lines - 1) as f64;
    Ok((0..lines).map(|i| lo + (i as f64 * step).round() as usize).collect())
}

/// Reproducible signal of length `n` at period `h`.
pub fn generate_signal(spec: &SignalSpec, n: usize, h: f64, seed: u64) -> Result<SampledSignal> {
    if n == 0 {
        return Err(Error::InvalidInput("signal length must be positive".into()));
    }
    let mut rng = rng(seed);
    let values = match *spec {
        SignalSpec::GaussianWhite { variance } => {
            if !(variance >= 0.0) {
                return Err(Error::InvalidInput(format!("variance must be nonnegative, got {variance}")));
            }
            let dist = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidInput(e.to_string()))?;
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        SignalSpec::Multisine {
            f_min,
            f_max,
            lines,
            rms,
        } => {
            let bins = multisine_bins(f_min, f_max, lines, n, h)?;
            let amp = rms * (2.0 / lines as f64).sqrt();
            let phases: Vec<f64> = bins.iter().map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            let w = std::f64::consts::TAU / n as f64;
            (0..n)
                .map(|t| {
                    bins.iter()
                        .zip(&phases)
                        .map(|(&k, ph)| (w * ((k * t) % n) as f64 + ph).cos())
                        .sum::<f64>()
                        * amp
                })
                .collect()
        }
        SignalSpec::Prbs { amplitude, hold } => {
            let hold = hold.max(1);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let level = if rng.random::<bool>() { amplitude } else { -amplitude };
                for _ in 0..hold.min(n - out.len()) {
                    out.push(level);
                }
            }
            out
        }
        SignalSpec::Zero => vec![0.0; n],
    };
    SampledSignal::new(values, h)
}

/// ARMA output disturbance `v = (C(q) / D(q)) e` with white Gaussian `e` of
/// variance `variance`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    num: Polynomial,
    den: Polynomial,
    variance: f64,
}

impl NoiseModel {
    /// `num` and `den` are ascending in `q`. The denominator is normalized to
    /// be monic and must have all roots strictly inside the unit circle.
    pub fn new(num: Polynomial, den: Polynomial, variance: f64) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::InvalidInput(format!("noise variance must be nonnegative, got {variance}")));
        }
        if !num.is_zero() && num.degree() > den.degree() {
            return Err(Error::Acausal {
                num: num.degree(),
                den: den.degree(),
            });
        }
        if den.degree() >= 1 {
            if let Some(r) = den.roots()?.into_iter().find(|r| r.norm() >= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "noise filter pole {r} is not strictly inside the unit circle"
                )));
            }
        }
        let lead = den.leading();
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
            variance,
        })
    }

    pub fn white(variance: f64) -> Result<Self> {
        Self::new(Polynomial::one(), Polynomial::one(), variance)
    }

    pub fn none() -> Self {
        Self {
            num: Polynomial::one(),
            den: Polynomial::one(),
            variance: 0.0,
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn filter(&self, h: f64) -> Result<DtTransferFunction> {
        DtTransferFunction::new(self.num.clone(), self.den.clone(), h)
    }

    /// Stationary variance of `v`, `variance * sum_k g_k^2` from the impulse
    /// response truncated once it has decayed.
    pub fn output_variance(&self) -> Result<f64> {
        let f = self.filter(1.0)?;
        let mut imp = vec![0.0; 20_000];
        imp[0] = 1.0;
        let g = filter_dt_values(&imp, &f)?;
        Ok(self.variance * g.iter().map(|v| v * v).sum::<f64>())
    }

    pub fn generate(&self, n: usize, h: f64, seed: u64) -> Result<SampledSignal> {
        if self.variance == 0.0 {
            return SampledSignal::zeros(n, h);
        }
        let e = generate_signal(
            &SignalSpec::GaussianWhite {
                variance: self.variance,
            },
            n,
            h,
            seed,
        )?;
        Ok(e.with_values(filter_dt_values(e.values(), &self.filter(h)?)?))
    }
}
