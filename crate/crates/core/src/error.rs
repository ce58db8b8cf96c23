use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Roi,
    Resample,
    Crop,
    Flow,
    Channels,
    Predictor,
    PostProcess,
    Peaks,
    Rate,
    Truth,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Input => "input",
            Stage::Roi => "roi",
            Stage::Resample => "resample",
            Stage::Crop => "crop",
            Stage::Flow => "flow",
            Stage::Channels => "channels",
            Stage::Predictor => "predictor",
            Stage::PostProcess => "post_process",
            Stage::Peaks => "peaks",
            Stage::Rate => "rate",
            Stage::Truth => "truth",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("no rate: {0}")]
    NoRate(String),
    #[error("insufficient spectral resolution: {0}")]
    InsufficientResolution(String),
    #[error("frame pair {index}: {source}")]
    FramePair {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub fn at(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error with stage and frame-pair labels peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::FramePair { source, .. } => source.root(),
            other => other,
        }
    }

    /// Outermost stage label, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub fn is_no_rate(&self) -> bool {
        matches!(self.root(), Error::NoRate(_))
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
