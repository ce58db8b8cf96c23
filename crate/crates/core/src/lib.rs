//! Video-based respiration estimation without learned models.
//!
//! The pipeline mirrors a classical remote-respiration setup:
//!
//! 1. [`roi`] turns sparse body/face detections into one stable crop.
//! 2. [`flow`] computes dense motion (Farnebäck or TV-L1) or plain frame
//!    differences inside the crop.
//! 3. [`estimator`] composes motion/appearance channels and reduces them
//!    to a respiration waveform.
//! 4. [`signal`] detrends, band-passes and picks peaks to get a rate.
//! 5. [`harness`] runs subject-wise cross-validation over manifests,
//!    including synthetic clips with known ground truth.

// `!(x > 0.0)` style checks deliberately reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod flow;
pub mod frame;
pub mod harness;
mod linalg;
pub mod roi;
pub mod signal;

pub use error::{Error, Result, Stage};
pub use frame::{crop_clamped, resample_fps, Box2D, ClipRef, ColorMode, Frame, FrameSequence, Plane};
