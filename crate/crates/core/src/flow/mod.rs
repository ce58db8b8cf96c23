//! Dense optical flow between consecutive ROI crops.
//!
//! Both engines work on Rec. 601 luminance in `0..=255` and return
//! displacements in pixels per frame: a pixel at `x` in the earlier frame
//! is found at `x + (u, v)` in the later one. Identical inputs give exactly
//! zero flow.

mod dump;
mod farneback;
pub(crate) mod image_ops;
mod tvl1;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{crop_clamped, resample_fps, Box2D, FloatImage, Frame, FrameSequence, Plane};

pub use dump::{read_flow_dump, write_flow_dump, FLOW_DUMP_MAGIC};

/// Coarsest pyramid level kept, in pixels on the short side.
pub(crate) const MIN_LEVEL_SIDE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub m: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
            m: vec![0.0; n],
        }
    }

    /// Builds a field from displacement components, deriving the magnitude.
    pub fn from_uv(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::format(format!(
                "flow components of length {}/{} do not match {width}x{height}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::format("flow contains non-finite values"));
        }
        let m = u.iter().zip(&v).map(|(a, b)| a.hypot(*b)).collect();
        Ok(Self { width, height, u, v, m })
    }

    pub(crate) fn from_components(u: Plane, v: Plane) -> Self {
        let m = u.data.iter().zip(&v.data).map(|(a, b)| a.hypot(*b)).collect();
        Self {
            width: u.width,
            height: u.height,
            u: u.data,
            v: v.data,
            m,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn max_abs(&self) -> f32 {
        self.u.iter().chain(&self.v).fold(0.0f32, |acc, x| acc.max(x.abs()))
    }

    /// Mean endpoint error against a constant displacement over pixels at
    /// least `margin` away from every border.
    pub fn interior_epe(&self, tu: f32, tv: f32, margin: usize) -> Option<f64> {
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for y in margin..self.height.saturating_sub(margin) {
            for x in margin..self.width.saturating_sub(margin) {
                let p = y * self.width + x;
                sum += ((self.u[p] - tu).hypot(self.v[p] - tv)) as f64;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowAlgorithm {
    #[default]
    Farneback,
    Tvl1,
    FrameDiff,
}

/// How motion channels are scaled over a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowNormalization {
    None,
    /// Divide `u`, `v` and `m` by the clip's RMS flow magnitude. Keeps the
    /// relation between the components and `m = |(u, v)|`.
    #[default]
    SharedScale,
    /// Standardize each channel to zero mean and unit variance.
    PerChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub algorithm: FlowAlgorithm,
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    /// Farnebäck refinement passes per pyramid level.
    pub iterations_per_level: usize,
    pub tvl1_lambda: f64,
    pub tvl1_theta: f64,
    pub tvl1_tau: f64,
    pub tvl1_warps: usize,
    /// Primal-dual iterations per warp.
    pub tvl1_iterations: usize,
    /// Polynomial expansion neighbourhood radius.
    pub farneback_poly_n: usize,
    /// Averaging window side for the displacement solve.
    pub farneback_window: usize,
    pub target_fps: Option<f64>,
    pub normalization: FlowNormalization,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            algorithm: FlowAlgorithm::Farneback,
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            iterations_per_level: 3,
            tvl1_lambda: 0.15,
            tvl1_theta: 0.3,
            tvl1_tau: 0.125,
            tvl1_warps: 5,
            tvl1_iterations: 30,
            farneback_poly_n: 5,
            farneback_window: 13,
            target_fps: None,
            normalization: FlowNormalization::SharedScale,
        }
    }
}

impl FlowConfig {
    pub fn tvl1() -> Self {
        Self {
            algorithm: FlowAlgorithm::Tvl1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::config(msg));
        if self.pyramid_levels < 1 {
            return fail("pyramid_levels must be at least 1".into());
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return fail(format!("pyramid_scale {} outside (0, 1)", self.pyramid_scale));
        }
        if self.iterations_per_level < 1 || self.tvl1_warps < 1 || self.tvl1_iterations < 1 {
            return fail("iteration counts must be at least 1".into());
        }
        if !(self.tvl1_lambda > 0.0 && self.tvl1_lambda.is_finite()) {
            return fail(format!("tvl1_lambda {} must be positive", self.tvl1_lambda));
        }
        if !(self.tvl1_theta > 0.0 && self.tvl1_theta.is_finite()) {
            return fail(format!("tvl1_theta {} must be positive", self.tvl1_theta));
        }
        if !(self.tvl1_tau > 0.0 && self.tvl1_tau <= 0.125) {
            return fail(format!("tvl1_tau {} outside (0, 0.125]", self.tvl1_tau));
        }
        if self.farneback_poly_n < 3 || self.farneback_poly_n.is_multiple_of(2) {
            return fail(format!("farneback_poly_n {} must be odd and at least 3", self.farneback_poly_n));
        }
        if self.farneback_window < 3 {
            return fail(format!("farneback_window {} must be at least 3", self.farneback_window));
        }
        if let Some(fps) = self.target_fps {
            if !(fps > 0.0 && fps.is_finite()) {
                return fail(format!("target_fps {fps} must be positive"));
            }
        }
        Ok(())
    }
}

fn check_pair(prev: &Plane, next: &Plane, min_side: usize) -> Result<()> {
    if (prev.width, prev.height) != (next.width, next.height) {
        return Err(Error::format(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            prev.width, prev.height, next.width, next.height
        )));
    }
    if prev.width.min(prev.height) < min_side {
        return Err(Error::config(format!(
            "{}x{} image is smaller than the {min_side} px the engine needs",
            prev.width, prev.height
        )));
    }
    Ok(())
}

pub fn farneback_flow(prev: &Plane, next: &Plane, cfg: &FlowConfig) -> Result<FlowField> {
    cfg.validate()?;
    check_pair(prev, next, cfg.farneback_poly_n)?;
    Ok(farneback::flow(prev, next, cfg))
}

pub fn tvl1_flow(prev: &Plane, next: &Plane, cfg: &FlowConfig) -> Result<FlowField> {
    cfg.validate()?;
    check_pair(prev, next, 2)?;
    Ok(tvl1::flow(prev, next, cfg, None))
}

/// TV-L1 flow plus the finest-level energy after each accepted warp.
pub fn tvl1_flow_traced(prev: &Plane, next: &Plane, cfg: &FlowConfig) -> Result<(FlowField, Vec<f64>)> {
    cfg.validate()?;
    check_pair(prev, next, 2)?;
    let mut trace = Vec::new();
    let field = tvl1::flow(prev, next, cfg, Some(&mut trace));
    Ok((field, trace))
}

/// TV-L1 objective of a given flow (exact warp, bilinear sampling).
pub fn tvl1_energy(prev: &Plane, next: &Plane, field: &FlowField, lambda: f64) -> Result<f64> {
    check_pair(prev, next, 1)?;
    if (field.width, field.height) != (prev.width, prev.height) {
        return Err(Error::format("flow and image sizes differ"));
    }
    let u = Plane::new(field.width, field.height, field.u.clone())?;
    let v = Plane::new(field.width, field.height, field.v.clone())?;
    Ok(tvl1::energy(prev, next, &u, &v, lambda))
}

/// Signed per-channel difference `next - prev` of two 3-channel frames.
pub fn frame_diff(prev: &Frame, next: &Frame) -> Result<FloatImage> {
    if prev.dims() != next.dims() {
        return Err(Error::format(format!(
            "frame shapes differ: {:?} vs {:?}",
            prev.dims(),
            next.dims()
        )));
    }
    if prev.channels() != 3 {
        return Err(Error::format(format!("frame difference needs 3 channels, got {}", prev.channels())));
    }
    Ok(FloatImage {
        width: prev.width(),
        height: prev.height(),
        channels: 3,
        data: prev.data().iter().zip(next.data()).map(|(a, b)| *b as f32 - *a as f32).collect(),
    })
}

/// Optional resampling to `cfg.target_fps` followed by cropping every frame
/// to `roi`.
pub fn crop_sequence(seq: &FrameSequence, roi: &Box2D, cfg: &FlowConfig) -> Result<FrameSequence> {
    let resampled;
    let seq = match cfg.target_fps {
        Some(fps) if fps != seq.fps() => {
            resampled = resample_fps(seq, fps)?;
            &resampled
        }
        _ => seq,
    };
    let crops = seq.frames().iter().map(|f| crop_clamped(f, roi)).collect::<Result<Vec<_>>>()?;
    FrameSequence::new(crops, seq.fps(), seq.color_mode())
}

/// Raw flow over consecutive frames, computed in parallel and returned in
/// temporal order. A failing pair is reported with its index.
pub fn flow_pairs(crops: &FrameSequence, cfg: &FlowConfig) -> Result<Vec<FlowField>> {
    cfg.validate()?;
    let engine: fn(&Plane, &Plane, &FlowConfig) -> Result<FlowField> = match cfg.algorithm {
        FlowAlgorithm::Farneback => farneback_flow,
        FlowAlgorithm::Tvl1 => tvl1_flow,
        FlowAlgorithm::FrameDiff => {
            return Err(Error::config("frame_diff produces difference images, not flow"));
        }
    };
    let lum: Vec<Plane> = crops.frames().par_iter().map(Frame::luminance).collect();
    lum.par_windows(2)
        .enumerate()
        .map(|(i, pair)| {
            engine(&pair[0], &pair[1], cfg).map_err(|e| Error::FramePair {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Rescales the fields of one clip in place.
pub fn normalize_flows(fields: &mut [FlowField], mode: FlowNormalization) {
    let count: usize = fields.iter().map(FlowField::len).sum();
    if count == 0 {
        return;
    }
    match mode {
        FlowNormalization::None => {}
        FlowNormalization::SharedScale => {
            let sq: f64 = fields
                .iter()
                .flat_map(|f| f.u.iter().zip(&f.v))
                .map(|(a, b)| (*a as f64).powi(2) + (*b as f64).powi(2))
                .sum();
            let rms = (sq / count as f64).sqrt();
            if rms > 0.0 {
                let s = (1.0 / rms) as f32;
                for f in fields.iter_mut() {
                    for x in f.u.iter_mut().chain(f.v.iter_mut()).chain(f.m.iter_mut()) {
                        *x *= s;
                    }
                }
            }
        }
        FlowNormalization::PerChannel => {
            for k in 0..3 {
                standardize(fields, count, k);
            }
        }
    }
}

fn channel_mut(f: &mut FlowField, k: usize) -> &mut [f32] {
    match k {
        0 => &mut f.u,
        1 => &mut f.v,
        _ => &mut f.m,
    }
}

/// Zero mean, unit variance over the clip; a constant channel becomes zero.
fn standardize(fields: &mut [FlowField], count: usize, k: usize) {
    let (mut sum, mut sq) = (0.0f64, 0.0f64);
    for f in fields.iter_mut() {
        for &x in channel_mut(f, k).iter() {
            sum += x as f64;
            sq += (x as f64) * (x as f64);
        }
    }
    let mean = sum / count as f64;
    let sd = (sq / count as f64 - mean * mean).max(0.0).sqrt();
    for f in fields.iter_mut() {
        for x in channel_mut(f, k).iter_mut() {
            *x = if sd > 0.0 { ((*x as f64 - mean) / sd) as f32 } else { 0.0 };
        }
    }
}

/// Crops, computes flow over all consecutive pairs and normalizes over the
/// clip.
pub fn flow_sequence(seq: &FrameSequence, roi: &Box2D, cfg: &FlowConfig) -> Result<Vec<FlowField>> {
    cfg.validate()?;
    let crops = crop_sequence(seq, roi, cfg)?;
    let mut fields = flow_pairs(&crops, cfg)?;
    normalize_flows(&mut fields, cfg.normalization);
    Ok(fields)
}
