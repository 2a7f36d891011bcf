use crate::error::{Error, Result};

/// Uniformly sampled real sequence, `t_k = k h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    values: Vec<f64>,
    h: f64,
}

impl SampledSignal {
    pub fn new(values: Vec<f64>, h: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("signal must have at least one sample".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("sampling period must be positive, got {h}")));
        }
        Ok(Self { values, h })
    }

    pub fn zeros(n: usize, h: f64) -> Result<Self> {
        Self::new(vec![0.0; n], h)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same length and sampling period.
    pub fn check_compatible(&self, other: &SampledSignal) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::SignalMismatch(format!("lengths {} and {}", self.len(), other.len())));
        }
        if (self.h - other.h).abs() > 1e-12 * self.h {
            return Err(Error::SignalMismatch(format!("sampling periods {} and {}", self.h, other.h)));
        }
        Ok(())
    }

    /// New signal with the same sampling period.
    pub fn with_values(&self, values: Vec<f64>) -> SampledSignal {
        SampledSignal { values, h: self.h }
    }

    pub fn add(&self, other: &SampledSignal) -> Result<SampledSignal> {
        self.check_compatible(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &SampledSignal) -> Result<SampledSignal> {
        self.check_compatible(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, s: f64) -> SampledSignal {
        self.with_values(self.values.iter().map(|v| v * s).collect())
    }

    /// Shift right by `d` samples, zero-padded.
    pub fn delay(&self, d: usize) -> SampledSignal {
        self.with_values(delay_values(&self.values, d))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / self.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }
}

pub(crate) fn delay_values(x: &[f64], d: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if d < n {
        out[d..].copy_from_slice(&x[..n - d]);
    }
    out
}

/// Signal-to-noise ratio in dB, `10 log10(var(x) / var(v))`.
pub fn snr_db(x: &SampledSignal, v: &SampledSignal) -> f64 {
    10.0 * (x.variance() / v.variance()).log10()
}
