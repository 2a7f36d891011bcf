//! Input/output records and their CSV form `k,t,u,y[,r]`.

use std::path::Path;

use super::signal::SampledSignal;
use crate::error::{Error, Result};

/// Sampled input, output and (closed loop) reference on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: SampledSignal,
    pub y: SampledSignal,
    pub r: Option<SampledSignal>,
}

impl Dataset {
    pub fn new(u: SampledSignal, y: SampledSignal, r: Option<SampledSignal>) -> Result<Self> {
        u.check_compatible(&y)?;
        if let Some(r) = &r {
            u.check_compatible(r)?;
        }
        Ok(Self { u, y, r })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.u.h()
    }

    /// Drop the first `k` samples of every signal.
    pub fn skip(&self, k: usize) -> Result<Dataset> {
        if k >= self.len() {
            return Err(Error::InvalidInput(format!("cannot discard {k} of {} samples", self.len())));
        }
        let cut = |s: &SampledSignal| s.with_values(s.values()[k..].to_vec());
        Ok(Dataset {
            u: cut(&self.u),
            y: cut(&self.y),
            r: self.r.as_ref().map(cut),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["k", "t", "u", "y"];
        if self.r.is_some() {
            header.push("r");
        }
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        let h = self.h();
        for k in 0..self.len() {
            let mut row = vec![
                k.to_string(),
                format!("{:.16e}", k as f64 * h),
                format!("{:.16e}", self.u.values()[k]),
                format!("{:.16e}", self.y.values()[k]),
            ];
            if let Some(r) = &self.r {
                row.push(format!("{:.16e}", r.values()[k]));
            }
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a dataset; the sampling period is inferred from the `t` column,
    /// which must be uniform within `1e-9` relative.
    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let mut rd = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = rd.headers().map_err(|e| csv_error(path, e))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let (ti, ui, yi) = match (col("t"), col("u"), col("y")) {
            (Some(t), Some(u), Some(y)) => (t, u, y),
            _ => return Err(parse_err("header must contain columns t, u and y".into())),
        };
        let ri = col("r");
        let (mut t, mut u, mut y, mut r) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let get = |i: usize, name: &str| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("row {}: invalid value in column {name}", line + 1)))
            };
            t.push(get(ti, "t")?);
            u.push(get(ui, "u")?);
            y.push(get(yi, "y")?);
            if let Some(ri) = ri {
                r.push(get(ri, "r")?);
            }
        }
        if t.len() < 2 {
            return Err(parse_err("at least two samples are needed to infer the sampling period".into()));
        }
        let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(h > 0.0) {
            return Err(parse_err("time column must be increasing".into()));
        }
        for (k, tk) in t.iter().enumerate() {
            let expected = t[0] + k as f64 * h;
            if (tk - expected).abs() > 1e-9 * h.max(expected.abs()) {
                return Err(parse_err(format!("time column is not uniform at row {}", k + 1)));
            }
        }
        let r = if ri.is_some() { Some(SampledSignal::new(r, h)?) } else { None };
        Dataset::new(SampledSignal::new(u, h)?, SampledSignal::new(y, h)?, r)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!()
    }
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
