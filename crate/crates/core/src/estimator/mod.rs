//! End-to-end estimation: ROI, crops, motion, channel tensor, predictor,
//! then integration, detrending, band-pass filtering, peak picking and the
//! rate.

mod channels;
mod predictor;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Stage, StageExt};
use crate::flow::{crop_sequence, flow_pairs, normalize_flows, FlowAlgorithm, FlowConfig};
use crate::frame::{Box2D, FrameSequence};
use crate::roi::{aggregate_roi, DetectionTrack, RoiConfig};
use crate::signal::{
    butter_bandpass_filtfilt, detect_peaks, detrend, rate_from_peaks, Band, PeakList, SpectralConfig, Waveform,
    DEFAULT_LAMBDA, DEFAULT_SIGMA,
};

pub use channels::{compose_channels, ChannelMode, ChannelTensor};
pub use predictor::{
    motion_respiration_signal, predictor_by_name, truth_waveform, LoopbackPredictor, MotionPredictor, Prediction,
    Predictor, PredictorInput, PREDICTOR_NAMES,
};

/// Chunk length used when chunked prediction is requested without a size.
pub const DEFAULT_CHUNK_FRAMES: usize = 180;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub roi: RoiConfig,
    pub flow: FlowConfig,
    pub channel_mode: ChannelMode,
    pub spectral: SpectralConfig,
    /// Width in samples of the Gaussian bumps of annotation waveforms.
    pub sigma: f64,
    /// Detrending smoothness weight.
    pub lambda: f64,
    pub predictor: String,
    /// Run the predictor on consecutive chunks of this many frame pairs
    /// instead of the whole clip.
    pub chunk_frames: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            roi: RoiConfig::default(),
            flow: FlowConfig::default(),
            channel_mode: ChannelMode::Flow3,
            spectral: SpectralConfig::default(),
            sigma: DEFAULT_SIGMA,
            lambda: DEFAULT_LAMBDA,
            predictor: "motion".into(),
            chunk_frames: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.roi.validate()?;
        self.flow.validate()?;
        self.spectral.validate()?;
        let diff_engine = self.flow.algorithm == FlowAlgorithm::FrameDiff;
        let diff_mode = self.channel_mode == ChannelMode::Diff6;
        if diff_engine != diff_mode {
            return Err(Error::config(format!(
                "channel mode {:?} is incompatible with flow algorithm {:?}",
                self.channel_mode, self.flow.algorithm
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if let Some(k) = self.chunk_frames {
            if k < 2 {
                return Err(Error::config(format!("chunk_frames must be at least 2, got {k}")));
            }
        }
        predictor_by_name(&self.predictor).map(|_| ())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn with_band(&self, band: Band) -> Self {
        let mut cfg = self.clone();
        cfg.spectral.band = band;
        cfg
    }
}

/// Integrates (if needed), detrends and band-passes a predictor output.
pub fn post_process(prediction: &Prediction, lambda: f64, band: &Band) -> Result<Waveform> {
    let integrated = if prediction.differenced {
        prediction.waveform.cumulative_sum()
    } else {
        prediction.waveform.clone()
    };
    let detrended = detrend(&integrated, lambda)?;
    butter_bandpass_filtfilt(&detrended, band)
}

/// Peaks and rate of a post-processed waveform.
pub fn rate_of(waveform: &Waveform, band: &Band) -> Result<(PeakList, f64)> {
    let peaks = detect_peaks(waveform, band).stage(Stage::Peaks)?;
    let bpm = rate_from_peaks(&peaks).stage(Stage::Rate)?;
    Ok((peaks, bpm))
}

/// Rate derived from annotations through the same post-processing as
/// predictions.
pub fn reference_rate(peaks: &PeakList, clip_fps: f64, clip_frames: usize, cfg: &PipelineConfig) -> Result<f64> {
    let waveform = truth_waveform(peaks, clip_fps, clip_frames, cfg.sigma).stage(Stage::Truth)?;
    let prediction = Prediction {
        waveform,
        differenced: false,
    };
    let processed = post_process(&prediction, cfg.lambda, &cfg.spectral.band).stage(Stage::Truth)?;
    rate_of(&processed, &cfg.spectral.band).map(|(_, bpm)| bpm)
}

/// Post-processed waveform of a clip plus the ROI it was computed in.
#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub roi: Box2D,
    pub waveform: Waveform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub roi: Box2D,
    pub waveform: Waveform,
    pub peaks: PeakList,
    pub bpm: f64,
}

fn predict_chunked(
    predictor: &dyn Predictor,
    input: &PredictorInput<'_>,
    chunk: Option<usize>,
) -> Result<Prediction> {
    let Some(len) = chunk.filter(|&k| k < input.tensor.len()) else {
        return predictor.predict(input);
    };
    let mut chunks = input.tensor.chunks(len);
    // A trailing single pair cannot form a waveform on its own.
    if let Some(tail) = chunks.pop_if(|c| c.len() < 2) {
        chunks.last_mut().unwrap().frames.extend(tail.frames);
    }
    let mut samples = Vec::with_capacity(input.tensor.len());
    let mut differenced = None;
    for c in &chunks {
        let p = predictor.predict(&PredictorInput { tensor: c, ..*input })?;
        if *differenced.get_or_insert(p.differenced) != p.differenced {
            return Err(Error::config("predictor changed its differencing flag between chunks"));
        }
        samples.extend_from_slice(p.waveform.samples());
    }
    Ok(Prediction {
        waveform: Waveform::new(samples, input.fs)?,
        differenced: differenced.unwrap_or(true),
    })
}

/// Runs every stage up to the band-passed waveform. Errors carry the stage
/// they came from.
pub fn estimate_waveform(
    clip: &FrameSequence,
    detections: &DetectionTrack,
    annotations: Option<&PeakList>,
    cfg: &PipelineConfig,
) -> Result<Processed> {
    cfg.validate().stage(Stage::Input)?;
    detections
        .validate_for_clip(clip.len(), clip.width(), clip.height())
        .stage(Stage::Input)?;
    if let Some(peaks) = annotations {
        if peaks.timestamps().last().is_some_and(|&t| t > clip.duration()) {
            return Err(Error::Annotation(format!(
                "annotated peak after the clip ends at {} s",
                clip.duration()
            ))
            .at(Stage::Input));
        }
    }
    let predictor = predictor_by_name(&cfg.predictor).stage(Stage::Input)?;
    let roi = aggregate_roi(detections, &cfg.roi).stage(Stage::Roi)?;
    let crops = crop_sequence(clip, &roi, &cfg.flow).stage(Stage::Crop)?;
    let flows = if cfg.channel_mode.uses_flow() {
        let mut flows = flow_pairs(&crops, &cfg.flow).stage(Stage::Flow)?;
        normalize_flows(&mut flows, cfg.flow.normalization);
        flows
    } else {
        Vec::new()
    };
    let tensor = compose_channels(&flows, crops.frames(), cfg.channel_mode).stage(Stage::Channels)?;
    let input = PredictorInput {
        tensor: &tensor,
        fs: crops.fps(),
        annotations,
        clip_frames: clip.len(),
        clip_fps: clip.fps(),
        sigma: cfg.sigma,
    };
    let prediction = predict_chunked(predictor.as_ref(), &input, cfg.chunk_frames).stage(Stage::Predictor)?;
    let waveform = post_process(&prediction, cfg.lambda, &cfg.spectral.band).stage(Stage::PostProcess)?;
    Ok(Processed { roi, waveform })
}

pub fn estimate(
    clip: &FrameSequence,
    detections: &DetectionTrack,
    annotations: Option<&PeakList>,
    cfg: &PipelineConfig,
) -> Result<Estimate> {
    let Processed { roi, waveform } = estimate_waveform(clip, detections, annotations, cfg)?;
    let (peaks, bpm) = rate_of(&waveform, &cfg.spectral.band)?;
    Ok(Estimate {
        roi,
        waveform,
        peaks,
        bpm,
    })
}
