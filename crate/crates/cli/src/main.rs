//! `resp-bench`: estimate respiration rates from frame directories, generate
//! synthetic datasets, and run subject-wise evaluations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use resp_core::estimator::{estimate_waveform, rate_of, PipelineConfig};
use resp_core::flow::{flow_sequence, write_flow_dump};
use resp_core::frame::{load_frames, read_meta, META_FILE};
use resp_core::harness::{
    enumerate_splits, evaluate, fold_boxes_svg, fold_error_boxes, histogram, histogram_svg, make_folds,
    split_distribution, split_distribution_svg, write_synthetic_dataset, DatasetManifest, FoldSizes, FoldSpec,
    SynthDatasetConfig,
};
use resp_core::roi::DetectionTrack;

/// Histogram bin width for rate plots, BPM.
const RATE_BIN_BPM: f64 = 2.0;

#[derive(Parser)]
#[command(name = "resp-bench", version, about = "Video respiration rate estimation and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the respiration waveform and rate of one clip.
    Estimate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Pipeline config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_waveform: PathBuf,
        #[arg(long)]
        out_rate: PathBuf,
        /// Binary dump of the normalized flow fields.
        #[arg(long)]
        flow_dump: Option<PathBuf>,
    },
    /// Render a synthetic dataset with a manifest.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for the rate histogram.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Cross-validated evaluation over a manifest.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Enumerate every train/validation/test split.
    Splits {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Assign subjects to folds.
    Folds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct RateRecord {
    clip_id: String,
    subject_id: String,
    bpm: Option<f64>,
    n_peaks: usize,
    stage_errors: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoldsSection {
    k: usize,
    train: usize,
    val: usize,
    test: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsetSection {
    fraction: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalFile {
    /// Relative to the config file.
    manifest: PathBuf,
    #[serde(default)]
    pipeline: PipelineConfig,
    folds: FoldsSection,
    #[serde(default)]
    subset: Option<SubsetSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitsFile {
    subjects: usize,
    train: usize,
    val: usize,
}

/// Either an explicit subject list or the subjects of a manifest.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoldsFile {
    #[serde(default)]
    manifest: Option<PathBuf>,
    #[serde(default)]
    subjects: Option<Vec<String>>,
    folds: FoldsSection,
}

#[derive(Serialize)]
struct FoldsOutput<'a> {
    seed: u64,
    folds: &'a [FoldSpec],
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn run_estimate(
    frames: &Path,
    detections: &Path,
    config: Option<&Path>,
    out_waveform: &Path,
    out_rate: &Path,
    flow_dump: Option<&Path>,
) -> Result<()> {
    let cfg: PipelineConfig = match config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    let meta_path = frames.join(META_FILE);
    let meta = read_meta(&meta_path)?;
    let clip = load_frames(frames, &meta_path)?;
    let track = DetectionTrack::load(detections)?;
    let processed = estimate_waveform(&clip, &track, None, &cfg)?;
    write_text(out_waveform, &processed.waveform.to_csv())?;
    if let Some(path) = flow_dump {
        let fields = flow_sequence(&clip, &processed.roi, &cfg.flow)?;
        write_flow_dump(path, &fields)?;
    }
    let mut record = RateRecord {
        clip_id: meta.clip_id,
        subject_id: meta.subject_id,
        bpm: None,
        n_peaks: 0,
        stage_errors: vec![],
    };
    match rate_of(&processed.waveform, &cfg.spectral.band) {
        Ok((peaks, bpm)) => {
            record.bpm = Some(bpm);
            record.n_peaks = peaks.len();
        }
        Err(e) if e.is_no_rate() => record.stage_errors.push(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    write_json(out_rate, &record)
}

fn run_synth(config: &Path, out: &Path, plots: Option<&Path>) -> Result<()> {
    let cfg: SynthDatasetConfig = read_json(config)?;
    let manifest = write_synthetic_dataset(out, &cfg)?;
    if let Some(dir) = plots {
        let rates: Vec<f64> = cfg.clip_specs().iter().map(|c| c.params.bpm).collect();
        let h = histogram(&rates, RATE_BIN_BPM);
        write_json(&dir.join("rate_histogram.json"), &h)?;
        write_text(&dir.join("rate_histogram.svg"), &histogram_svg(&h, "Generated respiration rates (BPM)"))?;
    }
    eprintln!("wrote {} clips to {}", manifest.clips.len(), out.display());
    Ok(())
}

fn folds_for(subjects: &[String], f: &FoldsSection) -> Result<Vec<FoldSpec>> {
    Ok(make_folds(subjects, f.k, FoldSizes::new(f.train, f.val, f.test), f.seed)?)
}

fn run_eval(config: &Path, out: &Path, plots: Option<&Path>) -> Result<()> {
    let cfg: EvalFile = read_json(config)?;
    let mut manifest = DatasetManifest::load(&relative_to(config, &cfg.manifest))?;
    if let Some(s) = &cfg.subset {
        manifest = manifest.subset(s.fraction, s.seed)?;
    }
    let folds = folds_for(&manifest.subjects(), &cfg.folds)?;
    let mut report = evaluate(&manifest, &folds, &cfg.pipeline)?;
    report.seed = Some(cfg.folds.seed);
    write_text(out, &(report.to_json() + "\n"))?;
    if let Some(dir) = plots {
        let truth: Vec<f64> = report.clips.iter().filter_map(|c| c.truth_bpm).collect();
        let h = histogram(&truth, RATE_BIN_BPM);
        write_json(&dir.join("rate_histogram.json"), &h)?;
        write_text(&dir.join("rate_histogram.svg"), &histogram_svg(&h, "Reference respiration rates (BPM)"))?;
        let boxes = fold_error_boxes(&report);
        write_json(&dir.join("fold_mae_boxes.json"), &boxes)?;
        write_text(&dir.join("fold_mae_boxes.svg"), &fold_boxes_svg(&boxes, "Absolute error per fold (BPM)"))?;
    }
    if let Some(m) = &report.mean {
        eprintln!("MAE {:.3}  RMSE {:.3}  over {} folds", m.mae, m.rmse, m.folds);
    }
    Ok(())
}

fn run_splits(config: &Path, out: &Path, plots: Option<&Path>) -> Result<()> {
    let cfg: SplitsFile = read_json(config)?;
    let splits = enumerate_splits(cfg.subjects, cfg.train, cfg.val)?;
    write_json(out, &splits)?;
    if let Some(dir) = plots {
        let d = split_distribution(cfg.subjects, &splits);
        write_json(&dir.join("split_distribution.json"), &d)?;
        write_text(
            &dir.join("split_distribution.svg"),
            &split_distribution_svg(&d, "Test-set appearances per subject"),
        )?;
    }
    eprintln!("{} splits", splits.len());
    Ok(())
}

fn run_folds(config: &Path, out: &Path) -> Result<()> {
    let cfg: FoldsFile = read_json(config)?;
    let subjects = match (&cfg.manifest, &cfg.subjects) {
        (Some(m), None) => DatasetManifest::load(&relative_to(config, m))?.subjects(),
        (None, Some(s)) => s.clone(),
        _ => bail!("give exactly one of `manifest` and `subjects`"),
    };
    let folds = folds_for(&subjects, &cfg.folds)?;
    write_json(
        out,
        &FoldsOutput {
            seed: cfg.folds.seed,
            folds: &folds,
        },
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate {
            frames,
            detections,
            config,
            out_waveform,
            out_rate,
            flow_dump,
        } => run_estimate(
            &frames,
            &detections,
            config.as_deref(),
            &out_waveform,
            &out_rate,
            flow_dump.as_deref(),
        ),
        Command::Synth { config, out, plots } => run_synth(&config, &out, plots.as_deref()),
        Command::Eval { config, out, plots } => run_eval(&config, &out, plots.as_deref()),
        Command::Splits { config, out, plots } => run_splits(&config, &out, plots.as_deref()),
        Command::Folds { config, out } => run_folds(&config, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
