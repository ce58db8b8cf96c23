//! One-dimensional respiration signal processing: annotation-to-waveform
//! synthesis, smoothness-prior detrending, zero-phase band-pass filtering,
//! peak picking, rate estimation, normalized spectra and evaluation
//! statistics.

mod detrend;
mod filter;
mod peaks;
mod spectrum;
mod stats;

pub use detrend::{detrend, SmoothnessPrior};
pub use filter::{butter_bandpass, butter_bandpass_filtfilt, filtfilt, lfilter, lfilter_zi, IirCoeffs};
pub use peaks::{detect_peaks, find_local_maxima, peak_prominences, PROMINENCE_FRACTION};
pub use spectrum::{psd_mse, psd_normalized, Spectrum};
pub use stats::{eval_stats, EvalStats};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::round_half_up;

/// Default Gaussian width for annotation synthesis, in samples.
pub const DEFAULT_SIGMA: f64 = 4.0;
/// Default detrending weight.
pub const DEFAULT_LAMBDA: f64 = 100.0;
/// Gaussian support is truncated beyond this many standard deviations.
pub const GAUSSIAN_TRUNCATION: f64 = 6.0;

/// A uniformly sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    fs: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::config(format!("sample rate must be positive, got {fs}")));
        }
        if samples.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "waveform needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(format!("waveform sample {i} is not finite")));
        }
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.fs)
    }

    /// Running sum; inverts frame-to-frame differencing up to a constant.
    pub fn cumulative_sum(&self) -> Waveform {
        let mut acc = 0.0;
        let samples = self
            .samples
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Waveform {
            samples,
            fs: self.fs,
        }
    }

    /// CSV with header `t_seconds,value` and 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_seconds,value\n");
        for (i, v) in self.samples.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{}",
                format_significant(i as f64 / self.fs, 9),
                format_significant(*v, 9)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("t_seconds,value") {
            return Err(Error::format(format!("{}: missing CSV header", path.display())));
        }
        let mut t = Vec::new();
        let mut v = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::format(format!("{}: line {} malformed", path.display(), n + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::format(format!("{}: bad number {s:?}", path.display())))
            };
            t.push(parse(a)?);
            v.push(parse(b)?);
        }
        if t.len() < 2 || t[1] <= t[0] {
            return Err(Error::format(format!("{}: cannot infer sample rate", path.display())));
        }
        let fs = (t.len() - 1) as f64 / (t[t.len() - 1] - t[0]);
        Waveform::new(v, fs)
    }
}

/// `%.9g`-style formatting: `digits` significant digits, trailing zeros
/// trimmed, scientific notation outside [1e-5, 1e9).
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Strictly increasing, non-negative event times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeakList {
    timestamps: Vec<f64>,
}

impl PeakList {
    pub fn new(timestamps: Vec<f64>) -> Result<Self> {
        if let Some(t) = timestamps.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Annotation(format!("peak time {t} is negative or not finite")));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Annotation(format!(
                "peak times not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { timestamps })
    }

    /// Peaks given as frame indices at `fps`.
    pub fn from_frames(frames: &[usize], fps: f64) -> Result<Self> {
        Self::new(frames.iter().map(|&i| i as f64 / fps).collect())
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Pass band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Band {
    fn default() -> Self {
        Self { lo: 0.3, hi: 1.0 }
    }
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let band = Self { lo, hi };
        band.validate()?;
        Ok(band)
    }

    pub fn from_bpm(lo_bpm: f64, hi_bpm: f64) -> Result<Self> {
        Self::new(lo_bpm / 60.0, hi_bpm / 60.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi.is_finite()) {
            return Err(Error::config(format!(
                "band must satisfy 0 < lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Band edges in breaths per minute.
    pub fn bpm(&self) -> (f64, f64) {
        (self.lo * 60.0, self.hi * 60.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    pub band: Band,
    pub epsilon: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            band: Band::default(),
            epsilon: 1e-8,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        self.band.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::config("spectral epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaussianKernel {
    /// Each annotated peak contributes a bump of height 1.
    #[default]
    UnitPeak,
    /// Each bump integrates to 1 over the sample grid's continuous axis.
    Density,
}

pub fn waveform_from_peaks(
    peaks: &PeakList,
    fs: f64,
    sigma: f64,
    duration: f64,
) -> Result<Waveform> {
    waveform_from_peaks_with(peaks, fs, sigma, duration, GaussianKernel::UnitPeak)
}

/// Sum of Gaussians of width `sigma` samples centered on each peak,
/// sampled at `fs` over `duration` seconds.
pub fn waveform_from_peaks_with(
    peaks: &PeakList,
    fs: f64,
    sigma: f64,
    duration: f64,
    kernel: GaussianKernel,
) -> Result<Waveform> {
    if peaks.is_empty() {
        return Err(Error::Annotation("no annotated peaks".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    if !(fs > 0.0) {
        return Err(Error::config(format!("sample rate must be positive, got {fs}")));
    }
    let last = *peaks.timestamps().last().expect("non-empty");
    if duration < last {
        return Err(Error::Annotation(format!(
            "duration {duration} s ends before the last peak at {last} s"
        )));
    }
    let n = round_half_up(duration * fs) as usize;
    let scale = match kernel {
        GaussianKernel::UnitPeak => 1.0,
        GaussianKernel::Density => 1.0 / (sigma / fs * (2.0 * std::f64::consts::PI).sqrt()),
    };
    let mut w = vec![0.0; n];
    let reach = GAUSSIAN_TRUNCATION * sigma;
    for &t in peaks.timestamps() {
        let center = t * fs;
        let lo = (center - reach).ceil().max(0.0) as usize;
        let hi = ((center + reach).floor() as usize).min(n.saturating_sub(1));
        for (i, slot) in w.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = i as f64 - center;
            *slot += scale * (-(d * d) / (2.0 * sigma * sigma)).exp();
        }
    }
    Waveform::new(w, fs)
}

/// `60 / mean(successive intervals)`.
pub fn rate_from_peaks(peaks: &PeakList) -> Result<f64> {
    let t = peaks.timestamps();
    if t.len() < 2 {
        return Err(Error::NoRate(format!("need at least 2 peaks, found {}", t.len())));
    }
    let mean_interval = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    Ok(60.0 / mean_interval)
}

/// Annotation file: peak frame indices for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub clip_id: String,
    pub fps: f64,
    pub peaks: Vec<usize>,
}

impl AnnotationFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: AnnotationFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if !(file.fps > 0.0) {
            return Err(Error::Annotation(format!("{}: fps must be positive", path.display())));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn peak_list(&self) -> Result<PeakList> {
        PeakList::from_frames(&self.peaks, self.fps)
    }
}
