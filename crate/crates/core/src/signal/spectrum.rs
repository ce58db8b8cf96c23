use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{SpectralConfig, Waveform};

/// In-band periodogram bins, normalized to (almost) unit sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    /// In-band power before normalization.
    pub raw_power: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Frequency of the strongest in-band bin.
    pub fn peak_frequency(&self) -> f64 {
        let (i, _) = self
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("spectrum is non-empty");
        self.freqs[i]
    }
}

/// One-sided periodogram `|X_k|^2 / N` of the mean-removed signal for
/// `k = 0..=N/2`.
pub(crate) fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Indices of periodogram bins whose center frequency lies in the band.
pub(crate) fn band_bins(n: usize, fs: f64, lo: f64, hi: f64) -> Vec<usize> {
    let df = fs / n as f64;
    let tol = 1e-9 * df;
    (0..=n / 2)
        .filter(|&k| {
            let f = k as f64 * df;
            f >= lo - tol && f <= hi + tol
        })
        .collect()
}

/// Periodogram restricted to `cfg.band`, each bin divided by the in-band
/// total plus `cfg.epsilon`.
pub fn psd_normalized(x: &Waveform, cfg: &SpectralConfig) -> Result<Spectrum> {
    cfg.validate()?;
    if x.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "spectrum needs at least 8 samples, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let bins = band_bins(n, x.fs(), cfg.band.lo, cfg.band.hi);
    if bins.is_empty() {
        return Err(Error::InsufficientResolution(format!(
            "{n} samples at {} Hz leave no bin inside [{}, {}] Hz",
            x.fs(),
            cfg.band.lo,
            cfg.band.hi
        )));
    }
    let p = periodogram(x.samples());
    let raw_power: Vec<f64> = bins.iter().map(|&k| p[k]).collect();
    let total: f64 = raw_power.iter().sum();
    let denom = total + cfg.epsilon;
    Ok(Spectrum {
        freqs: bins.iter().map(|&k| k as f64 * x.fs() / n as f64).collect(),
        power: raw_power.iter().map(|v| v / denom).collect(),
        raw_power,
    })
}

/// Mean squared difference of the normalized in-band spectra.
pub fn psd_mse(yhat: &Waveform, y: &Waveform, cfg: &SpectralConfig) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(Error::format(format!(
            "length mismatch: {} vs {}",
            yhat.len(),
            y.len()
        )));
    }
    if yhat.fs() != y.fs() {
        return Err(Error::format(format!(
            "sample rate mismatch: {} vs {}",
            yhat.fs(),
            y.fs()
        )));
    }
    let a = psd_normalized(yhat, cfg)?;
    let b = psd_normalized(y, cfg)?;
    let sum: f64 = a.power.iter().zip(&b.power).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(sum / a.len() as f64)
}
