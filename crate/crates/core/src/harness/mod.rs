mod dataset;
mod eval;
mod manifest;
mod plots;
mod protocol;
mod synth;

pub use dataset::{write_synthetic_dataset, SynthClipSpec, SynthDatasetConfig, MANIFEST_FILE};
pub use eval::{evaluate, ClipRecord, CrossFoldMean, EvalReport, FoldReport, SubjectResult, REPORT_SCHEMA};
pub use manifest::{DatasetManifest, LoadedClip, ManifestEntry, SleepingPosition};
pub use plots::{
    fold_boxes_svg, fold_error_boxes, histogram, histogram_svg, split_distribution, split_distribution_svg, BoxStats,
    FoldBox, Histogram, SplitDistribution,
};
pub use protocol::{enumerate_splits, make_folds, FoldSizes, FoldSpec, Split};
pub use synth::{synth_clip, SynthClip, SynthParams};
