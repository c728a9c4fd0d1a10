//! Self-similar delay synthesis, the feedback delay line, sensor-noise specs
//! and long-range-dependence diagnostics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracfilter::generate_fgn;

/// Hurst exponent of the measured network delay.
pub const DELAY_HURST: f64 = 0.8837;
/// Spectral exponent of persistent sensor noise.
pub const PERSISTENT_BETA: f64 = 0.668;
/// Fewest block sizes accepted by [`rs_hurst`].
pub const MIN_BLOCK_SIZES: usize = 4;

/// Where per-sample delays come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySource {
    /// fGn-driven series with the configured Hurst exponent.
    #[default]
    Synthetic,
    /// One delay in seconds per line, replayed cyclically.
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    #[serde(default = "default_delay_hurst")]
    pub hurst: f64,
    /// Mean delay (s).
    pub mean_delay: f64,
    /// Upper clip (s).
    pub max_delay: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: DelaySource,
}

fn default_delay_hurst() -> f64 {
    DELAY_HURST
}

impl DelaySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::Config(format!("delay hurst must lie in (0, 1), got {}", self.hurst)));
        }
        if !(self.mean_delay >= 0.0 && self.mean_delay <= self.max_delay && self.max_delay.is_finite()) {
            return Err(Error::Config(format!(
                "delay requires 0 ≤ mean_delay ≤ max_delay, got {} and {}",
                self.mean_delay, self.max_delay
            )));
        }
        Ok(())
    }
}

/// Sensor noise added to the measured output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Spectral exponent β ∈ [−1, 1]; `H = (1 + β)/2`.
    pub beta: f64,
    /// Standard deviation of the driving white noise.
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.beta) {
            return Err(Error::OrderOutOfRange(self.beta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn generate(&self, n_samples: usize, dt: f64) -> Result<Vec<f64>> {
        self.validate()?;
        generate_fgn(self.beta, n_samples, self.sigma, dt, self.seed)
    }
}

/// Per-sample delays (s), all within `[0, max_delay]`.
///
/// Synthetic series are fGn with `β = 2H − 1`, standardised and mapped to
/// `mean + (mean/2)·z` before clipping.
pub fn generate_delay_series(spec: &DelaySpec, n_samples: usize, dt: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    let clip = |d: f64| d.clamp(0.0, spec.max_delay);
    match &spec.source {
        DelaySource::Synthetic => {
            let raw = generate_fgn(2.0 * spec.hurst - 1.0, n_samples, 1.0, dt, spec.seed)?;
            let (mean, var) = mean_and_population_variance(&raw);
            let sd = var.sqrt();
            Ok(raw
                .iter()
                .map(|&x| {
                    let z = if sd > 0.0 { (x - mean) / sd } else { 0.0 };
                    clip(spec.mean_delay + 0.5 * spec.mean_delay * z)
                })
                .collect())
        }
        DelaySource::Trace { path } => {
            let trace = read_trace(path)?;
            Ok((0..n_samples).map(|k| clip(trace[k % trace.len()])).collect())
        }
    }
}

/// Reads a delay trace: one non-negative number per non-blank line.
pub fn read_trace(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Config(format!("{}:{}: not a number: {line:?}", path.display(), i + 1)))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("{}:{}: delay must be non-negative", path.display(), i + 1)));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: empty delay trace", path.display())));
    }
    Ok(out)
}

/// Receiver-side zero-order hold over a growing history of samples.
///
/// At step `k` the source index is `⌊k − d_k/dt⌋`, clamped to `[0, k]` and
/// never allowed to move backwards, so late packets cannot replace newer
/// ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayLine {
    history: Vec<f64>,
    newest: usize,
}

impl DelayLine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `sample` as step `k` and returns the value seen after `delay`.
    pub fn push(&mut self, sample: f64, delay: f64, dt: f64) -> f64 {
        self.history.push(sample);
        let k = self.history.len() - 1;
        let idx = source_index(k, delay, dt).max(self.newest);
        self.newest = idx;
        self.history[idx]
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.newest = 0;
    }
}

fn source_index(k: usize, delay: f64, dt: f64) -> usize {
    let back = k as f64 - delay / dt + 1e-9;
    if back <= 0.0 {
        0
    } else {
        (back.floor() as usize).min(k)
    }
}

/// Batch form of [`DelayLine`].
pub fn delay_line(delays: &[f64], signal: &[f64], dt: f64) -> Result<Vec<f64>> {
    if delays.len() != signal.len() {
        return Err(Error::LengthMismatch {
            left: delays.len(),
            right: signal.len(),
        });
    }
    let mut line = DelayLine::new();
    Ok(signal
        .iter()
        .zip(delays)
        .map(|(&s, &d)| line.push(s, d, dt))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstEstimate {
    pub hurst: f64,
    /// `log C_H`
    pub intercept: f64,
    pub block_sizes: Vec<usize>,
    /// Mean rescaled range per block size.
    pub mean_rs: Vec<f64>,
    pub r_squared: f64,
    /// Whether `0 < H < 1.5`.
    pub valid: bool,
}

/// Powers of two from 16 up to `len / 8`.
pub fn default_block_sizes(len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 16;
    while n <= len / 8 {
        out.push(n);
        n *= 2;
    }
    out
}

/// Rescaled-range Hurst estimate from a log-log least-squares fit of the
/// block-averaged `R/S` against block size. Blocks with zero spread are
/// skipped; a size with no usable block is dropped.
pub fn rs_hurst(series: &[f64], block_sizes: Option<&[usize]>) -> Result<HurstEstimate> {
    let sizes: Vec<usize> = match block_sizes {
        Some(s) => s.to_vec(),
        None => default_block_sizes(series.len()),
    };
    let largest = sizes.iter().copied().max().unwrap_or(0);
    if sizes.len() < MIN_BLOCK_SIZES || series.len() < 2 * largest || sizes.iter().any(|&n| n < 2) {
        return Err(Error::SeriesTooShort {
            needed: (2 * largest).max(2 * 16 * 8),
            got: series.len(),
        });
    }
    let mut used = Vec::new();
    let mut mean_rs = Vec::new();
    for &n in &sizes {
        let mut total = 0.0;
        let mut count = 0usize;
        for block in series.chunks_exact(n) {
            let (mean, var) = mean_and_population_variance(block);
            let s = var.sqrt();
            if !(s > 0.0) {
                continue;
            }
            let (mut acc, mut lo, mut hi) = (0.0_f64, 0.0_f64, 0.0_f64);
            for &x in block {
                acc += x - mean;
                lo = lo.min(acc);
                hi = hi.max(acc);
            }
            total += (hi - lo) / s;
            count += 1;
        }
        if count > 0 {
            used.push(n);
            mean_rs.push(total / count as f64);
        }
    }
    if used.is_empty() {
        return Err(Error::ZeroVariance);
    }
    if used.len() < MIN_BLOCK_SIZES {
        return Err(Error::SeriesTooShort {
            needed: 2 * largest,
            got: series.len(),
        });
    }
    let xs: Vec<f64> = used.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = mean_rs.iter().map(|v| v.ln()).collect();
    let (slope, intercept, r_squared) = ols(&xs, &ys);
    Ok(HurstEstimate {
        hurst: slope,
        intercept,
        block_sizes: used,
        mean_rs,
        r_squared,
        valid: slope > 0.0 && slope < 1.5,
    })
}

/// Slope, intercept and coefficient of determination of `y ≈ a x + b`.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

fn mean_and_population_variance(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Biased sample autocorrelation for lags `0..=max_lag`, normalised so the
/// lag-0 value is one.
pub fn sample_acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n == 0 || max_lag >= n / 4 {
        return Err(Error::SeriesTooShort {
            needed: 4 * (max_lag + 1),
            got: n,
        });
    }
    let (mean, var) = mean_and_population_variance(series);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|l| {
            let c: f64 = (0..n - l).map(|i| (series[i] - mean) * (series[i + l] - mean)).sum();
            c / n as f64 / var
        })
        .collect())
}

/// Unbiased variance of each prefix (Welford); element 0 is zero.
pub fn running_variance(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in series.iter().enumerate() {
        let count = (k + 1) as f64;
        let delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
        out.push(if k == 0 { 0.0 } else { m2 / k as f64 });
    }
    out
}
