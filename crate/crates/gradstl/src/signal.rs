//! Finite signals: named state variables sampled at strictly increasing,
//! arbitrarily spaced times.
//!
//! A signal is a sequence of samples `S_0 .. S_{n-1}` taken at times
//! `t_0 < t_1 < ... < t_{n-1}`. Nothing is assumed about the spacing;
//! the whole engine is built around non-uniform sampling, so the time
//! column is mandatory and gaps between consecutive samples
//! ([`Signal::delta_t`]) drive the temporal semantics.
//!
//! The file format is plain CSV: header `t,<name1>,...,<nameM>`, one row
//! per sample. Numbers are written so that reading them back yields the
//! identical value.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid signal: {message}")]
    Validation { message: String },
    #[error("sample index {k} out of range for signal with {n} samples")]
    Index { k: usize, n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An immutable, validated signal: `n` samples of `m` named variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    names: Vec<String>,
    times: Vec<f64>,
    /// Row-major `n x m`: `values[k * m + i]` is variable `i` at sample `k`.
    values: Vec<f64>,
}

impl Signal {
    /// Build a signal from its parts, checking every invariant: at least
    /// one sample and one variable, consistent dimensions, unique names,
    /// strictly increasing times, and finite entries throughout.
    pub fn new(names: Vec<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Signal, SignalError> {
        let invalid = |message: String| Err(SignalError::Validation { message });
        if names.is_empty() {
            return invalid("no state variables".into());
        }
        if times.is_empty() {
            return invalid("no samples".into());
        }
        for (i, a) in names.iter().enumerate() {
            if a.is_empty() {
                return invalid(format!("variable {i} has an empty name"));
            }
            if names[..i].contains(a) {
                return invalid(format!("duplicate variable name `{a}`"));
            }
        }
        if values.len() != times.len() * names.len() {
            return invalid(format!(
                "value matrix has {} entries, expected {} samples x {} variables",
                values.len(),
                times.len(),
                names.len()
            ));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return invalid(format!("non-finite time {t}"));
        }
        for (k, w) in times.windows(2).enumerate() {
            if w[0] >= w[1] {
                return invalid(format!(
                    "times must be strictly increasing, but t[{}] = {} and t[{}] = {}",
                    k,
                    w[0],
                    k + 1,
                    w[1]
                ));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("non-finite value {v}"));
        }
        Ok(Signal { names, times, values })
    }

    /// Number of samples `n = |S|`.
    pub fn sample_count(&self) -> usize {
        self.times.len()
    }

    /// Number of state variables `m`.
    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Sample `S_k` as a slice of the `m` variable values.
    ///
    /// Panics if `k` is out of range; evaluation entry points validate
    /// their index before descending.
    pub fn sample(&self, k: usize) -> &[f64] {
        let m = self.width();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.width() + i]
    }

    /// Overwrite one entry. The time axis is untouched, so only finiteness
    /// needs rechecking.
    pub fn set_value(&mut self, k: usize, i: usize, v: f64) -> Result<(), SignalError> {
        if k >= self.sample_count() {
            return Err(SignalError::Index { k, n: self.sample_count() });
        }
        if i >= self.width() {
            return Err(SignalError::Validation {
                message: format!("variable index {i} out of range for width {}", self.width()),
            });
        }
        if !v.is_finite() {
            return Err(SignalError::Validation { message: format!("non-finite value {v}") });
        }
        let m = self.width();
        self.values[k * m + i] = v;
        Ok(())
    }

    /// Time gap between sample `k` and `k + 1`.
    pub fn delta_t(&self, k: usize) -> Result<f64, SignalError> {
        if k + 1 >= self.sample_count() {
            return Err(SignalError::Index { k, n: self.sample_count() });
        }
        Ok(self.times[k + 1] - self.times[k])
    }
}

/// Read a signal from a CSV file.
pub fn load_signal(path: impl AsRef<Path>) -> Result<Signal, SignalError> {
    let text = std::fs::read_to_string(path)?;
    parse_signal(&text)
}

/// Parse a signal from CSV text (same contract as [`load_signal`]).
pub fn parse_signal(text: &str) -> Result<Signal, SignalError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SignalError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let mut cols = header.trim_end().split(',');
    match cols.next() {
        Some("t") => {}
        _ => {
            return Err(SignalError::Parse {
                line: 1,
                message: "header must start with a `t` time column".into(),
            })
        }
    }
    let names: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    let m = names.len();

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != m + 1 {
            return Err(SignalError::Parse {
                line,
                message: format!("expected {} fields, found {}", m + 1, fields.len()),
            });
        }
        let mut parsed = fields.iter().map(|f| {
            f.trim().parse::<f64>().map_err(|_| SignalError::Parse {
                line,
                message: format!("`{}` is not a number", f.trim()),
            })
        });
        times.push(parsed.next().unwrap()?);
        for v in parsed {
            values.push(v?);
        }
    }
    Signal::new(names, times, values)
}

/// Write a signal as CSV. Values are printed with enough digits that
/// [`load_signal`] reproduces them bit for bit.
pub fn save_signal(s: &Signal, path: impl AsRef<Path>) -> Result<(), SignalError> {
    std::fs::write(path, render_signal(s))?;
    Ok(())
}

pub fn render_signal(s: &Signal) -> String {
    let mut out = String::new();
    out.push('t');
    for name in s.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..s.sample_count() {
        let _ = write!(out, "{}", s.times()[k]);
        for i in 0..s.width() {
            let _ = write!(out, ",{}", s.value(k, i));
        }
        out.push('\n');
    }
    out
}
