use crate::error::{Error, Result};
use crate::signal::{waveform_from_peaks, PeakList, Waveform};

use super::channels::{ChannelMode, ChannelTensor};

/// Everything a predictor may look at for one clip.
pub struct PredictorInput<'a> {
    pub tensor: &'a ChannelTensor,
    /// Sample rate of the tensor's frame pairs.
    pub fs: f64,
    /// Annotated peaks, for reference predictors only.
    pub annotations: Option<&'a PeakList>,
    /// Frame count and rate of the clip before any resampling.
    pub clip_frames: usize,
    pub clip_fps: f64,
    /// Gaussian width in samples for annotation-derived waveforms.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub waveform: Waveform,
    /// The waveform is a frame-to-frame derivative and must be integrated
    /// before detrending.
    pub differenced: bool,
}

/// Maps a channel tensor to a respiration waveform.
pub trait Predictor: Send + Sync {
    fn name(&self) -> &'static str;
    fn predict(&self, input: &PredictorInput<'_>) -> Result<Prediction>;
}

pub const PREDICTOR_NAMES: [&str; 2] = ["motion", "loopback"];

pub fn predictor_by_name(name: &str) -> Result<Box<dyn Predictor>> {
    match name {
        "motion" => Ok(Box::new(MotionPredictor)),
        "loopback" => Ok(Box::new(LoopbackPredictor)),
        other => Err(Error::config(format!(
            "unknown predictor {other:?}; available: {}",
            PREDICTOR_NAMES.join(", ")
        ))),
    }
}

/// Parameter-free motion aggregation.
pub struct MotionPredictor;

impl Predictor for MotionPredictor {
    fn name(&self) -> &'static str {
        "motion"
    }

    fn predict(&self, input: &PredictorInput<'_>) -> Result<Prediction> {
        Ok(Prediction {
            waveform: motion_respiration_signal(input.tensor, input.fs)?,
            differenced: true,
        })
    }
}

/// Emits the annotation-derived waveform, so the rest of the pipeline sees
/// exactly what the ground-truth path sees.
pub struct LoopbackPredictor;

impl Predictor for LoopbackPredictor {
    fn name(&self) -> &'static str {
        "loopback"
    }

    fn predict(&self, input: &PredictorInput<'_>) -> Result<Prediction> {
        let peaks = input
            .annotations
            .ok_or_else(|| Error::config("the loopback predictor needs annotations"))?;
        let waveform = truth_waveform(peaks, input.clip_fps, input.clip_frames, input.sigma)?;
        Ok(Prediction {
            waveform,
            differenced: false,
        })
    }
}

/// Gaussian-bump waveform over a clip of `frames` samples at `fps`.
pub fn truth_waveform(peaks: &PeakList, fps: f64, frames: usize, sigma: f64) -> Result<Waveform> {
    waveform_from_peaks(peaks, fps, sigma, frames as f64 / fps)
}

/// Sums `values` by recursive halving so the result does not depend on how
/// the per-frame partial sums were produced.
fn pairwise_sum<const N: usize>(values: &[[f64; N]]) -> [f64; N] {
    match values.len() {
        0 => [0.0; N],
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            let (a, b) = (pairwise_sum(a), pairwise_sum(b));
            std::array::from_fn(|i| a[i] + b[i])
        }
    }
}

/// Unit principal axis of a 2x2 covariance `[[a, b], [b, c]]`.
fn principal_axis(a: f64, b: f64, c: f64) -> (f64, f64) {
    if b == 0.0 {
        return if a >= c { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    let half = 0.5 * (a - c);
    let lambda = 0.5 * (a + c) + (half * half + b * b).sqrt();
    let (x, y) = (lambda - c, b);
    let n = x.hypot(y);
    (x / n, y / n)
}

/// Per frame pair: the magnitude-weighted spatial mean of the flow projected
/// on the clip's dominant motion axis (flow modes), or the mean luminance of
/// the difference channels (`Diff6`). The result is a differenced signal.
pub fn motion_respiration_signal(tensor: &ChannelTensor, fs: f64) -> Result<Waveform> {
    if tensor.is_empty() {
        return Err(Error::InsufficientData("empty channel tensor".into()));
    }
    let c = tensor.channels();
    let samples: Vec<f64> = match tensor.mode {
        ChannelMode::Diff6 => tensor
            .frames
            .iter()
            .map(|f| {
                let sum: f64 = f
                    .chunks_exact(c)
                    .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
                    .sum();
                sum / (tensor.width * tensor.height) as f64
            })
            .collect(),
        ChannelMode::Flow3 | ChannelMode::Flow6 => {
            // Per-frame [n, su, sv, suu, svv, suv] partial sums.
            let partial: Vec<[f64; 6]> = tensor
                .frames
                .iter()
                .map(|f| {
                    let mut s = [0.0f64; 6];
                    for px in f.chunks_exact(c) {
                        let (u, v) = (px[0] as f64, px[1] as f64);
                        s[0] += 1.0;
                        s[1] += u;
                        s[2] += v;
                        s[3] += u * u;
                        s[4] += v * v;
                        s[5] += u * v;
                    }
                    s
                })
                .collect();
            let [n, su, sv, suu, svv, suv] = pairwise_sum(&partial);
            let (mu, mv) = (su / n, sv / n);
            let (a, b, cc) = (suu / n - mu * mu, suv / n - mu * mv, svv / n - mv * mv);
            let (mut ex, mut ey) = principal_axis(a, b, cc);
            // The axis's dominant component points positive, so chunks and
            // clips with the same motion direction agree in sign.
            let dominant = if ex.abs() >= ey.abs() { ex } else { ey };
            if dominant < 0.0 {
                ex = -ex;
                ey = -ey;
            }
            tensor
                .frames
                .iter()
                .map(|f| {
                    let (mut num, mut den) = (0.0f64, 0.0f64);
                    for px in f.chunks_exact(c) {
                        let m = px[2] as f64;
                        num += m * (ex * px[0] as f64 + ey * px[1] as f64);
                        den += m;
                    }
                    if den > 0.0 {
                        num / den
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} frame pair(s) are too few for a waveform",
            samples.len()
        )));
    }
    Waveform::new(samples, fs)
}
