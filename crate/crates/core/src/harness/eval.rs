//! Subject-wise batch evaluation and its JSON report.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, reference_rate, PipelineConfig};
use crate::signal::{eval_stats, EvalStats};

use super::manifest::{DatasetManifest, ManifestEntry, SleepingPosition};
use super::protocol::FoldSpec;

pub const REPORT_SCHEMA: &str = "resp-eval/1";

/// Rates of one clip. A clip counts toward the metrics only when both rates
/// are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub subject_id: String,
    pub clip_id: String,
    pub sleeping_position: SleepingPosition,
    pub truth_bpm: Option<f64>,
    pub pred_bpm: Option<f64>,
    /// Peaks found in the predicted waveform.
    pub n_peaks: usize,
    pub stage_errors: Vec<String>,
}

impl ClipRecord {
    pub fn rates(&self) -> Option<(f64, f64)> {
        Some((self.pred_bpm?, self.truth_bpm?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject_id: String,
    /// Clips with both rates.
    pub n_clips: usize,
    /// Mean over the subject's clips.
    pub pred_bpm: f64,
    pub truth_bpm: f64,
    /// Clip-level metrics within the subject.
    pub stats: EvalStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: FoldSpec,
    pub subjects: Vec<SubjectResult>,
    /// Metrics over the subject means; absent when no test subject has a
    /// usable clip.
    pub average: Option<EvalStats>,
    pub excluded_clips: usize,
    /// Test subjects with no usable clip.
    pub excluded_subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossFoldMean {
    pub mae: f64,
    pub rmse: f64,
    /// Mean over the folds where the correlation is defined.
    pub pearson: Option<f64>,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub config_fingerprint: String,
    pub config: PipelineConfig,
    /// Fold seed, when the folds were generated.
    pub seed: Option<u64>,
    pub folds: Vec<FoldReport>,
    pub mean: Option<CrossFoldMean>,
    pub clips: Vec<ClipRecord>,
    pub excluded_clips: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn evaluate_clip(entry: &ManifestEntry, cfg: &PipelineConfig) -> Result<ClipRecord> {
    let labelled = |e: Error| Error::Manifest(format!("clip {}: {e}", entry.clip_id));
    let clip = entry.load().map_err(labelled)?;
    let cfg = match entry.band {
        Some(band) => cfg.with_band(band),
        None => cfg.clone(),
    };
    let mut stage_errors = Vec::new();
    let mut keep_no_rate = |r: Result<f64>| -> Result<Option<f64>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) if e.is_no_rate() => {
                stage_errors.push(e.to_string());
                Ok(None)
            }
            Err(e) => Err(labelled(e)),
        }
    };
    let truth_bpm = keep_no_rate(reference_rate(&clip.peaks, clip.frames.fps(), clip.frames.len(), &cfg))?;
    let mut n_peaks = 0;
    let est = estimate(&clip.frames, &clip.detections, Some(&clip.peaks), &cfg).map(|e| {
        n_peaks = e.peaks.len();
        e.bpm
    });
    let pred_bpm = keep_no_rate(est)?;
    Ok(ClipRecord {
        subject_id: entry.subject_id.clone(),
        clip_id: entry.clip_id.clone(),
        sleeping_position: entry.sleeping_position,
        truth_bpm,
        pred_bpm,
        n_peaks,
        stage_errors,
    })
}

fn check_fold(fold: &FoldSpec, available: &BTreeSet<&String>) -> Result<()> {
    if fold.test.is_empty() {
        return Err(Error::config(format!("fold {} has an empty test set", fold.fold_index)));
    }
    let mut seen = BTreeSet::new();
    for s in fold.train.iter().chain(&fold.val).chain(&fold.test) {
        if !seen.insert(s) {
            return Err(Error::config(format!("fold {}: subject {s} assigned twice", fold.fold_index)));
        }
    }
    if let Some(s) = fold.test.iter().find(|s| !available.contains(s)) {
        return Err(Error::Manifest(format!(
            "fold {} tests subject {s}, which has no clips",
            fold.fold_index
        )));
    }
    Ok(())
}

fn fold_report(fold: &FoldSpec, records: &[ClipRecord]) -> Result<FoldReport> {
    let mut subjects = Vec::new();
    let mut excluded_subjects = Vec::new();
    let mut excluded_clips = 0;
    for s in &fold.test {
        let clips: Vec<&ClipRecord> = records.iter().filter(|r| &r.subject_id == s).collect();
        let rates: Vec<(f64, f64)> = clips.iter().filter_map(|r| r.rates()).collect();
        excluded_clips += clips.len() - rates.len();
        if rates.is_empty() {
            excluded_subjects.push(s.clone());
            continue;
        }
        let (pred, truth): (Vec<f64>, Vec<f64>) = rates.into_iter().unzip();
        let n = pred.len() as f64;
        subjects.push(SubjectResult {
            subject_id: s.clone(),
            n_clips: pred.len(),
            pred_bpm: pred.iter().sum::<f64>() / n,
            truth_bpm: truth.iter().sum::<f64>() / n,
            stats: eval_stats(&pred, &truth)?,
        });
    }
    let average = if subjects.is_empty() {
        None
    } else {
        let pred: Vec<f64> = subjects.iter().map(|s| s.pred_bpm).collect();
        let truth: Vec<f64> = subjects.iter().map(|s| s.truth_bpm).collect();
        Some(eval_stats(&pred, &truth)?)
    };
    Ok(FoldReport {
        fold: fold.clone(),
        subjects,
        average,
        excluded_clips,
        excluded_subjects,
    })
}

fn cross_fold_mean(folds: &[FoldReport]) -> Option<CrossFoldMean> {
    let stats: Vec<&EvalStats> = folds.iter().filter_map(|f| f.average.as_ref()).collect();
    if stats.is_empty() {
        return None;
    }
    let n = stats.len() as f64;
    let rhos: Vec<f64> = stats.iter().filter_map(|s| s.pearson).collect();
    Some(CrossFoldMean {
        mae: stats.iter().map(|s| s.mae).sum::<f64>() / n,
        rmse: stats.iter().map(|s| s.rmse).sum::<f64>() / n,
        pearson: (!rhos.is_empty()).then(|| rhos.iter().sum::<f64>() / rhos.len() as f64),
        folds: stats.len(),
    })
}

/// Estimates every clip of every test subject once (in parallel), then
/// aggregates per subject and per fold. Clips are processed in sorted order,
/// so the report does not depend on manifest order.
pub fn evaluate(manifest: &DatasetManifest, folds: &[FoldSpec], cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    manifest.validate()?;
    if folds.is_empty() {
        return Err(Error::config("no folds to evaluate"));
    }
    let available: BTreeSet<&String> = manifest.clips.iter().map(|c| &c.subject_id).collect();
    for f in folds {
        check_fold(f, &available)?;
    }
    let tested: BTreeSet<&String> = folds.iter().flat_map(|f| &f.test).collect();
    let mut entries: Vec<&ManifestEntry> = manifest
        .clips
        .iter()
        .filter(|c| tested.contains(&c.subject_id))
        .collect();
    entries.sort_by(|a, b| (&a.subject_id, &a.clip_id).cmp(&(&b.subject_id, &b.clip_id)));

    let clips: Vec<ClipRecord> = entries
        .par_iter()
        .map(|e| evaluate_clip(e, cfg))
        .collect::<Result<_>>()?;

    let mut by_subject: BTreeMap<&String, Vec<ClipRecord>> = BTreeMap::new();
    for r in &clips {
        by_subject.entry(&r.subject_id).or_default().push(r.clone());
    }
    let fold_reports = folds
        .iter()
        .map(|f| {
            let records: Vec<ClipRecord> = f
                .test
                .iter()
                .flat_map(|s| by_subject.get(s).cloned().unwrap_or_default())
                .collect();
            fold_report(f, &records)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        schema: REPORT_SCHEMA.into(),
        config_fingerprint: cfg.fingerprint(),
        config: cfg.clone(),
        seed: None,
        mean: cross_fold_mean(&fold_reports),
        excluded_clips: clips.iter().filter(|r| r.rates().is_none()).count(),
        folds: fold_reports,
        clips,
    })
}
