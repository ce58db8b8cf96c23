//! Writes synthetic clips to disk as a manifest-backed dataset.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{round_half_up, save_frames, VideoMeta};
use crate::signal::{AnnotationFile, Band};

use super::manifest::{DatasetManifest, ManifestEntry, SleepingPosition};
use super::synth::{synth_clip, SynthParams};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthDatasetConfig {
    pub subjects: usize,
    pub clips_per_subject: usize,
    /// Each subject's base rate is drawn uniformly from this range.
    pub bpm_min: f64,
    pub bpm_max: f64,
    /// Clip rates scatter uniformly within this distance of the subject's
    /// base rate, clamped to the range.
    pub clip_spread_bpm: f64,
    pub seed: u64,
    /// Template for every clip; `bpm` and `seed` are overwritten.
    pub clip: SynthParams,
    /// Subjects with a rate outside this band get a widened band override.
    pub reference_band: Band,
}

/// Margin between a subject's extreme rates and its widened band edges.
const BAND_MARGIN: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClipSpec {
    pub subject_id: String,
    pub clip_id: String,
    pub params: SynthParams,
    /// Subject-specific band, when the reference band misses its rates.
    pub band: Option<Band>,
}

impl Default for SynthDatasetConfig {
    fn default() -> Self {
        Self {
            subjects: 12,
            clips_per_subject: 2,
            bpm_min: 16.0,
            bpm_max: 40.0,
            clip_spread_bpm: 2.0,
            seed: 0,
            clip: SynthParams::default(),
            reference_band: Band::default(),
        }
    }
}

impl SynthDatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.clips_per_subject == 0 {
            return Err(Error::config("need at least one subject and one clip per subject"));
        }
        if !(self.bpm_min <= self.bpm_max) {
            return Err(Error::config(format!(
                "bpm range [{}, {}] is empty",
                self.bpm_min, self.bpm_max
            )));
        }
        if !(self.clip_spread_bpm >= 0.0) {
            return Err(Error::config("clip_spread_bpm must be non-negative"));
        }
        for bpm in [self.bpm_min, self.bpm_max] {
            SynthParams { bpm, ..self.clip.clone() }.validate()?;
        }
        self.reference_band.validate()
    }

    /// Per-clip generator parameters in manifest order.
    pub fn clip_specs(&self) -> Vec<SynthClipSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for s in 0..self.subjects {
            let subject_id = format!("subject{s:02}");
            let first = out.len();
            let base = if self.bpm_max > self.bpm_min {
                rng.random_range(self.bpm_min..self.bpm_max)
            } else {
                self.bpm_min
            };
            for c in 0..self.clips_per_subject {
                let jitter = if self.clip_spread_bpm > 0.0 {
                    rng.random_range(-self.clip_spread_bpm..=self.clip_spread_bpm)
                } else {
                    0.0
                };
                let bpm = (base + jitter).clamp(self.bpm_min, self.bpm_max);
                let params = SynthParams {
                    bpm,
                    seed: rng.random(),
                    ..self.clip.clone()
                };
                out.push(SynthClipSpec {
                    subject_id: subject_id.clone(),
                    clip_id: format!("{subject_id}_clip{c}"),
                    params,
                    band: None,
                });
            }
            let band = self.subject_band(out[first..].iter().map(|c| c.params.bpm / 60.0));
            out[first..].iter_mut().for_each(|c| c.band = band);
        }
        out
    }

    /// Subjects the reference band fits keep it. Others get a band hugging
    /// their own rates: widening only one edge would let pulse harmonics
    /// through and double the count of slow breaths.
    fn subject_band(&self, freqs: impl Iterator<Item = f64> + Clone) -> Option<Band> {
        let lo = freqs.clone().fold(f64::INFINITY, f64::min);
        let hi = freqs.fold(0.0, f64::max);
        let reference = self.reference_band;
        if lo >= reference.lo && hi <= reference.hi {
            return None;
        }
        Some(Band {
            lo: (1.0 - BAND_MARGIN) * lo,
            hi: (1.0 + BAND_MARGIN) * hi,
        })
    }
}

/// Renders every clip under `dir` (frames, detections, annotations) and
/// writes `manifest.json` with paths relative to `dir`. Annotation peaks are
/// the true maxima rounded to the nearest frame.
pub fn write_synthetic_dataset(dir: &Path, cfg: &SynthDatasetConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut clips = Vec::new();
    for (i, spec) in cfg.clip_specs().into_iter().enumerate() {
        let SynthClipSpec {
            subject_id,
            clip_id,
            params,
            band,
        } = spec;
        let clip = synth_clip(&params)?;
        let rel = PathBuf::from(&clip_id);
        let root = dir.join(&rel);
        let meta = VideoMeta {
            fps: params.fps,
            color_mode: params.color_mode,
            subject_id: subject_id.clone(),
            clip_id: clip_id.clone(),
        };
        save_frames(&clip.frames, &root.join("frames"), &meta)?;
        clip.detections.save(&root.join("detections.json"))?;
        let peaks = clip
            .peaks
            .timestamps()
            .iter()
            .map(|t| round_half_up(t * params.fps) as usize)
            .collect();
        AnnotationFile {
            clip_id: clip_id.clone(),
            fps: params.fps,
            peaks,
        }
        .save(&root.join("annotations.json"))?;
        clips.push(ManifestEntry {
            subject_id,
            clip_id,
            frames: rel.join("frames"),
            detections: rel.join("detections.json"),
            annotations: rel.join("annotations.json"),
            sleeping_position: if i % 4 == 3 { SleepingPosition::Side } else { SleepingPosition::Supine },
            band,
        });
    }
    let manifest = DatasetManifest { clips };
    manifest.save(&dir.join(MANIFEST_FILE))?;
    DatasetManifest::load(&dir.join(MANIFEST_FILE))
}
