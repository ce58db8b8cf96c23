//! Temporally stabilized region of interest from sparse detections.
//!
//! Body boxes are aggregated with a median center and a 75th-percentile
//! size. The chest variant builds a square per detection, nudged from the
//! body center toward the face along the body's longer axis, and
//! aggregates those squares the same way.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Box2D;

/// Boxes with either side below this many pixels are dropped.
pub const MIN_BOX_SIDE: f64 = 2.0;
/// Detections with a reported confidence below this are dropped.
pub const MIN_CONFIDENCE: f64 = 0.25;
/// Body boxes covering at least this fraction of the image are treated as
/// the detector's full-frame fallback and dropped.
pub const FULL_FRAME_FRACTION: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub frame: usize,
    #[serde(default)]
    pub body: Option<Box2D>,
    #[serde(default)]
    pub body_conf: Option<f64>,
    #[serde(default)]
    pub face: Option<Box2D>,
    #[serde(default)]
    pub face_conf: Option<f64>,
}

/// Per-clip detection file: a header plus sparse per-frame boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTrack {
    pub stride: usize,
    pub image_w: usize,
    pub image_h: usize,
    #[serde(rename = "detections")]
    pub entries: Vec<DetectionEntry>,
}

fn check_conf(conf: Option<f64>, what: &str, frame: usize) -> Result<()> {
    match conf {
        Some(c) if !(0.0..=1.0).contains(&c) => Err(Error::Manifest(format!(
            "frame {frame}: {what} confidence {c} outside [0, 1]"
        ))),
        _ => Ok(()),
    }
}

impl DetectionTrack {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let track: DetectionTrack =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        track.validate()?;
        Ok(track)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Structural checks that do not depend on the clip length.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Manifest("detection track is empty".into()));
        }
        if self.stride == 0 {
            return Err(Error::Manifest("detection stride must be positive".into()));
        }
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::Manifest("detection image size must be positive".into()));
        }
        let n = self.entries.len();
        for (i, pair) in self.entries.windows(2).enumerate() {
            let (a, b) = (pair[0].frame, pair[1].frame);
            if b <= a {
                return Err(Error::Manifest(format!(
                    "detection frames not strictly increasing at {a} -> {b}"
                )));
            }
            let last = i + 2 == n;
            if !last && b - a != self.stride {
                return Err(Error::Manifest(format!(
                    "detection frames {a} -> {b} do not follow stride {}",
                    self.stride
                )));
            }
        }
        for e in &self.entries {
            for (b, what) in [(&e.body, "body"), (&e.face, "face")] {
                if let Some(b) = b {
                    if !b.is_within(self.image_w, self.image_h) {
                        return Err(Error::Manifest(format!(
                            "frame {}: {what} box {:?} is not clamped to {}x{}",
                            e.frame, b, self.image_w, self.image_h
                        )));
                    }
                }
            }
            check_conf(e.body_conf, "body", e.frame)?;
            check_conf(e.face_conf, "face", e.frame)?;
        }
        Ok(())
    }

    /// Full validation against a clip of `len` frames.
    pub fn validate_for_clip(&self, len: usize, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        if (self.image_w, self.image_h) != (width, height) {
            return Err(Error::Manifest(format!(
                "detections are for {}x{} images, clip is {width}x{height}",
                self.image_w, self.image_h
            )));
        }
        let last = self.entries.last().map(|e| e.frame);
        if last != Some(len - 1) {
            return Err(Error::Manifest(format!(
                "last detection is at frame {:?}, clip ends at {}",
                last,
                len - 1
            )));
        }
        Ok(())
    }

    fn usable_body(&self, e: &DetectionEntry) -> Option<Box2D> {
        let b = e.body?;
        let image_area = (self.image_w * self.image_h) as f64;
        let ok = b.w >= MIN_BOX_SIDE
            && b.h >= MIN_BOX_SIDE
            && e.body_conf.is_none_or(|c| c >= MIN_CONFIDENCE)
            && b.area() < FULL_FRAME_FRACTION * image_area;
        ok.then_some(b)
    }

    fn usable_face(&self, e: &DetectionEntry) -> Option<Box2D> {
        let f = e.face?;
        let ok = f.w >= MIN_BOX_SIDE
            && f.h >= MIN_BOX_SIDE
            && e.face_conf.is_none_or(|c| c >= MIN_CONFIDENCE);
        ok.then_some(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RoiMode {
    None,
    #[default]
    Body,
    Chest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoiConfig {
    /// Fraction of the body-to-face offset applied to the chest center.
    pub alpha: f64,
    /// Enlargement factor applied after aggregation.
    pub enlarge: f64,
    pub mode: RoiMode,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            enlarge: 1.0,
            mode: RoiMode::Body,
        }
    }
}

impl RoiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.enlarge >= 1.0 && self.enlarge.is_finite()) {
            return Err(Error::config(format!("enlarge must be >= 1, got {}", self.enlarge)));
        }
        Ok(())
    }
}

/// Linear interpolation between closest ranks; `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty set");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    percentile_sorted(&v, q)
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 0.5)
}

/// Body center nudged toward the face center by `alpha`, along the body's
/// longer axis only. A missing face leaves the center unmoved.
pub fn chest_center(body: &Box2D, face: Option<&Box2D>, alpha: f64) -> Result<(f64, f64)> {
    if body.is_degenerate() {
        return Err(Error::DegenerateBox(format!(
            "body box {}x{} has no area",
            body.w, body.h
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (bx, by) = body.center();
    let (fx, fy) = face.map(Box2D::center).unwrap_or((bx, by));
    if body.w >= body.h {
        Ok((bx + alpha * (fx - bx), by))
    } else {
        Ok((bx, by + alpha * (fy - by)))
    }
}

/// Translates a square of side `side` minimally so it lies inside `bound`.
fn fit_square(x: f64, y: f64, side: f64, bound: &Box2D) -> (f64, f64) {
    let fit = |v: f64, lo: f64, extent: f64| {
        let hi = lo + extent - side;
        if hi < lo {
            lo + 0.5 * (extent - side)
        } else {
            v.clamp(lo, hi)
        }
    };
    (fit(x, bound.x, bound.w), fit(y, bound.y, bound.h))
}

/// Per-detection chest square: side `min(w, h)` centered at the chest
/// center, kept inside the body box and the image.
pub fn chest_square(
    body: &Box2D,
    face: Option<&Box2D>,
    alpha: f64,
    image_w: usize,
    image_h: usize,
) -> Result<Box2D> {
    let (cx, cy) = chest_center(body, face, alpha)?;
    let side = body.w.min(body.h);
    let (x, y) = fit_square(cx - 0.5 * side, cy - 0.5 * side, side, body);
    let (x, y) = fit_square(x, y, side, &Box2D::full(image_w, image_h));
    Ok(Box2D::new(x, y, side, side))
}

pub fn aggregate_body_roi(track: &DetectionTrack, cfg: &RoiConfig) -> Result<Box2D> {
    if track.entries.is_empty() {
        return Err(Error::Manifest("detection track is empty".into()));
    }
    cfg.validate()?;
    let (w, h) = (track.image_w, track.image_h);
    let bodies: Vec<Box2D> = track.entries.iter().filter_map(|e| track.usable_body(e)).collect();
    if bodies.is_empty() {
        return Ok(Box2D::full(w, h));
    }
    let cx = median(&bodies.iter().map(|b| b.x + 0.5 * b.w).collect::<Vec<_>>());
    let cy = median(&bodies.iter().map(|b| b.y + 0.5 * b.h).collect::<Vec<_>>());
    let bw = percentile(&bodies.iter().map(|b| b.w).collect::<Vec<_>>(), 0.75);
    let bh = percentile(&bodies.iter().map(|b| b.h).collect::<Vec<_>>(), 0.75);
    let roi = Box2D::from_center(cx, cy, bw, bh).clamped(w, h);
    Ok(roi.enlarged(cfg.enlarge).clamped(w, h))
}

fn centered_square(image_w: usize, image_h: usize) -> Box2D {
    let side = image_w.min(image_h) as f64;
    Box2D::new(
        0.5 * (image_w as f64 - side),
        0.5 * (image_h as f64 - side),
        side,
        side,
    )
}

/// Places a square by center, shrinking it to the image's short side if
/// needed and translating it inside the image.
fn square_in_image(cx: f64, cy: f64, side: f64, image_w: usize, image_h: usize) -> Box2D {
    let side = side.min(image_w.min(image_h) as f64);
    let (x, y) = fit_square(cx - 0.5 * side, cy - 0.5 * side, side, &Box2D::full(image_w, image_h));
    Box2D::new(x, y, side, side)
}

pub fn aggregate_chest_roi(track: &DetectionTrack, cfg: &RoiConfig) -> Result<Box2D> {
    if track.entries.is_empty() {
        return Err(Error::Manifest("detection track is empty".into()));
    }
    cfg.validate()?;
    let (w, h) = (track.image_w, track.image_h);
    let mut squares = Vec::new();
    for e in &track.entries {
        if let Some(body) = track.usable_body(e) {
            let face = track.usable_face(e);
            squares.push(chest_square(&body, face.as_ref(), cfg.alpha, w, h)?);
        }
    }
    if squares.is_empty() {
        return Ok(centered_square(w, h));
    }
    let cx = median(&squares.iter().map(|s| s.x + 0.5 * s.w).collect::<Vec<_>>());
    let cy = median(&squares.iter().map(|s| s.y + 0.5 * s.h).collect::<Vec<_>>());
    let side = percentile(&squares.iter().map(|s| s.w).collect::<Vec<_>>(), 0.75);
    let roi = square_in_image(cx, cy, side, w, h);
    let (cx, cy) = roi.center();
    Ok(square_in_image(cx, cy, roi.w * cfg.enlarge, w, h))
}

/// Dispatches on `cfg.mode`; `None` yields the full frame.
pub fn aggregate_roi(track: &DetectionTrack, cfg: &RoiConfig) -> Result<Box2D> {
    match cfg.mode {
        RoiMode::None => {
            cfg.validate()?;
            Ok(Box2D::full(track.image_w, track.image_h))
        }
        RoiMode::Body => aggregate_body_roi(track, cfg),
        RoiMode::Chest => aggregate_chest_roi(track, cfg),
    }
}
