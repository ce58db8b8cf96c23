use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{load_frames, round_half_up, FrameSequence, META_FILE};
use crate::roi::DetectionTrack;
use crate::signal::{AnnotationFile, Band, PeakList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SleepingPosition {
    #[default]
    Supine,
    Side,
    Prone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub clip_id: String,
    /// Frame directory holding `meta.json`.
    pub frames: PathBuf,
    pub detections: PathBuf,
    pub annotations: PathBuf,
    #[serde(default)]
    pub sleeping_position: SleepingPosition,
    /// Subject-specific pass band replacing the configured one.
    #[serde(default)]
    pub band: Option<Band>,
}

/// One clip with everything needed to estimate and score it.
#[derive(Debug, Clone)]
pub struct LoadedClip {
    pub frames: FrameSequence,
    pub detections: DetectionTrack,
    pub peaks: PeakList,
}

impl ManifestEntry {
    /// Loads frames, detections and annotations and checks they describe the
    /// same clip.
    pub fn load(&self) -> Result<LoadedClip> {
        let meta_path = self.frames.join(META_FILE);
        let meta = crate::frame::read_meta(&meta_path)?;
        if meta.clip_id != self.clip_id || meta.subject_id != self.subject_id {
            return Err(Error::Manifest(format!(
                "{} describes {}/{}, manifest says {}/{}",
                meta_path.display(),
                meta.subject_id,
                meta.clip_id,
                self.subject_id,
                self.clip_id
            )));
        }
        let frames = load_frames(&self.frames, &meta_path)?;
        let detections = DetectionTrack::load(&self.detections)?;
        detections.validate_for_clip(frames.len(), frames.width(), frames.height())?;
        let ann = AnnotationFile::load(&self.annotations)?;
        if ann.clip_id != self.clip_id {
            return Err(Error::Annotation(format!(
                "{} is for clip {}, expected {}",
                self.annotations.display(),
                ann.clip_id,
                self.clip_id
            )));
        }
        if ann.fps != frames.fps() {
            return Err(Error::Annotation(format!(
                "annotations at {} fps, frames at {} fps",
                ann.fps,
                frames.fps()
            )));
        }
        if let Some(&last) = ann.peaks.last() {
            if last >= frames.len() {
                return Err(Error::Annotation(format!(
                    "peak at frame {last} beyond clip of {} frames",
                    frames.len()
                )));
            }
        }
        Ok(LoadedClip {
            frames,
            detections,
            peaks: ann.peak_list()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub clips: Vec<ManifestEntry>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl DatasetManifest {
    /// Reads a manifest; relative paths are taken from the manifest's
    /// directory. Every referenced path must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut manifest.clips {
            resolve(base, &mut c.frames);
            resolve(base, &mut c.detections);
            resolve(base, &mut c.annotations);
        }
        manifest.validate()?;
        for c in &manifest.clips {
            for p in [&c.frames, &c.detections, &c.annotations] {
                if !p.exists() {
                    return Err(Error::Manifest(format!("clip {}: {} does not exist", c.clip_id, p.display())));
                }
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Ids non-empty, clip ids unique, bands valid.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.clips {
            if c.subject_id.is_empty() || c.clip_id.is_empty() {
                return Err(Error::Manifest("subject_id and clip_id must be non-empty".into()));
            }
            if !seen.insert(&c.clip_id) {
                return Err(Error::Manifest(format!("duplicate clip id {}", c.clip_id)));
            }
            if let Some(b) = &c.band {
                b.validate()?;
            }
        }
        Ok(())
    }

    /// Sorted distinct subject ids.
    pub fn subjects(&self) -> Vec<String> {
        self.clips
            .iter()
            .map(|c| c.subject_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn restrict_to(&self, subjects: &[String]) -> Self {
        let keep: BTreeSet<&String> = subjects.iter().collect();
        Self {
            clips: self.clips.iter().filter(|c| keep.contains(&c.subject_id)).cloned().collect(),
        }
    }

    /// Keeps a seeded random `fraction` of the subjects (at least one).
    pub fn subset(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!("subset fraction {fraction} outside (0, 1]")));
        }
        let mut subjects = self.subjects();
        let n = (round_half_up(fraction * subjects.len() as f64) as usize).max(1);
        subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        subjects.truncate(n);
        Ok(self.restrict_to(&subjects))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(subject: &str, clip: &str) -> ManifestEntry {
        ManifestEntry {
            subject_id: subject.into(),
            clip_id: clip.into(),
            frames: "f".into(),
            detections: "d.json".into(),
            annotations: "a.json".into(),
            sleeping_position: SleepingPosition::Supine,
            band: None,
        }
    }

    #[test]
    fn duplicate_clip_rejected() {
        let m = DatasetManifest {
            clips: vec![entry("s1", "c1"), entry("s2", "c1")],
        };
        assert!(matches!(m.validate(), Err(Error::Manifest(_))));
    }

    #[test]
    fn subjects_and_subsets() {
        let m = DatasetManifest {
            clips: (0..8).map(|i| entry(&format!("s{}", i / 2), &format!("c{i}"))).collect(),
        };
        assert_eq!(m.subjects(), vec!["s0", "s1", "s2", "s3"]);
        let half = m.subset(0.5, 3).unwrap();
        assert_eq!(half.subjects().len(), 2);
        assert_eq!(half.clips.len(), 4);
        assert_eq!(half, m.subset(0.5, 3).unwrap());
        assert!(m.subset(0.0, 1).is_err());
    }

    #[test]
    fn json_shape() {
        let text = r#"{"clips": [{"subject_id": "s1", "clip_id": "c1", "frames": "c1/frames",
            "detections": "c1/det.json", "annotations": "c1/ann.json",
            "sleeping_position": "side", "band": {"lo": 0.25, "hi": 0.9}}]}"#;
        let m: DatasetManifest = serde_json::from_str(text).unwrap();
        assert_eq!(m.clips[0].sleeping_position, SleepingPosition::Side);
        assert_eq!(m.clips[0].band.unwrap().lo, 0.25);
    }

    #[test]
    fn missing_paths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        DatasetManifest { clips: vec![entry("s1", "c1")] }.save(&path).unwrap();
        assert!(matches!(DatasetManifest::load(&path), Err(Error::Manifest(_))));
    }
}
