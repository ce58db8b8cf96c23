//! Frame, geometry and clip identity types, plus frame-directory I/O,
//! clamped cropping and frame-rate resampling.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rounds to the nearest integer with ties going up (2.5 -> 3, -2.5 -> -2).
pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    #[default]
    Rgb,
    Ir,
}

impl ColorMode {
    pub fn channels(self) -> usize {
        match self {
            ColorMode::Rgb => 3,
            ColorMode::Ir => 1,
        }
    }
}

/// An 8-bit image with 1 or 3 interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::format(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::format(format!(
                "buffer of {} bytes does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        assert!(channels == 1 || channels == 3);
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: u8) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Three-channel view; single-channel frames are replicated.
    pub fn to_rgb(&self) -> Frame {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&p| [p, p, p]).collect();
        Frame {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Rec. 601 luminance as a float plane in [0, 255].
    pub fn luminance(&self) -> Plane {
        let data = if self.channels == 1 {
            self.data.iter().map(|&p| p as f32).collect()
        } else {
            self.data
                .chunks_exact(3)
                .map(|px| 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32)
                .collect()
        };
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Multiplies every intensity by `gain`, saturating at 255.
    pub fn scaled(&self, gain: f64) -> Frame {
        let data = self
            .data
            .iter()
            .map(|&p| round_half_up(p as f64 * gain).clamp(0.0, 255.0) as u8)
            .collect();
        Frame {
            data,
            ..self.clone()
        }
    }
}

/// Single-channel floating point image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::format(format!(
                "plane buffer of {} values does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Replicate-edge access.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }
}

/// Multi-channel floating point image, interleaved, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn from_frame(frame: &Frame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            channels: frame.channels(),
            data: frame.data().iter().map(|&p| p as f32).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// Axis-aligned box with real-valued top-left corner and extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Box2D {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for Box2D {
    fn from(v: [f64; 4]) -> Self {
        Box2D::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Box2D> for [f64; 4] {
    fn from(b: Box2D) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl Box2D {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - 0.5 * w, cy - 0.5 * h, w, h)
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0.0, 0.0, width as f64, height as f64)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.w > 0.0 && self.h > 0.0)
    }

    /// Scales the extents by `factor` about the center.
    pub fn enlarged(&self, factor: f64) -> Self {
        let (cx, cy) = self.center();
        Self::from_center(cx, cy, self.w * factor, self.h * factor)
    }

    /// Intersection with `[0, width] x [0, height]`.
    pub fn clamped(&self, width: usize, height: usize) -> Self {
        let (wf, hf) = (width as f64, height as f64);
        let x0 = self.x.clamp(0.0, wf);
        let y0 = self.y.clamp(0.0, hf);
        let x1 = (self.x + self.w).clamp(0.0, wf);
        let y1 = (self.y + self.h).clamp(0.0, hf);
        Self::new(x0, y0, (x1 - x0).max(0.0), (y1 - y0).max(0.0))
    }

    pub fn is_within(&self, width: usize, height: usize) -> bool {
        const TOL: f64 = 1e-9;
        self.w >= 0.0
            && self.h >= 0.0
            && self.x >= -TOL
            && self.y >= -TOL
            && self.x + self.w <= width as f64 + TOL
            && self.y + self.h <= height as f64 + TOL
    }
}

/// Copies the rasterized box out of `frame`; pixels falling outside the
/// source are zero.
pub fn crop_clamped(frame: &Frame, bx: &Box2D) -> Result<Frame> {
    if bx.is_degenerate() {
        return Err(Error::DegenerateBox(format!(
            "cannot crop {}x{} box",
            bx.w, bx.h
        )));
    }
    let out_w = round_half_up(bx.w) as usize;
    let out_h = round_half_up(bx.h) as usize;
    if out_w == 0 || out_h == 0 {
        return Err(Error::DegenerateBox(format!(
            "box {}x{} rasterizes to zero pixels",
            bx.w, bx.h
        )));
    }
    let x0 = round_half_up(bx.x) as i64;
    let y0 = round_half_up(bx.y) as i64;
    let ch = frame.channels();
    let mut out = vec![0u8; out_w * out_h * ch];
    for oy in 0..out_h {
        let sy = y0 + oy as i64;
        if sy < 0 || sy >= frame.height() as i64 {
            continue;
        }
        // Overlap of the output row with the source row.
        let sx_lo = x0.max(0);
        let sx_hi = (x0 + out_w as i64).min(frame.width() as i64);
        if sx_lo >= sx_hi {
            continue;
        }
        let src_row = sy as usize * frame.width();
        let src = &frame.data()[(src_row + sx_lo as usize) * ch..(src_row + sx_hi as usize) * ch];
        let dst_off = (oy * out_w + (sx_lo - x0) as usize) * ch;
        out[dst_off..dst_off + src.len()].copy_from_slice(src);
    }
    Frame::new(out_w, out_h, ch, out)
}

/// An ordered clip of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: f64,
    color_mode: ColorMode,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: f64, color_mode: ColorMode) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::config(format!("fps must be positive, got {fps}")));
        }
        if frames.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a clip needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let dims = frames[0].dims();
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
            return Err(Error::format(format!(
                "frame {i} is {}x{}x{}, expected {}x{}x{}",
                f.width(),
                f.height(),
                f.channels(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        Ok(Self {
            frames,
            fps,
            color_mode,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn color_mode(&self) -> ColorMode {
        self.color_mode
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn map_frames(&self, f: impl Fn(&Frame) -> Frame) -> Result<Self> {
        Self::new(self.frames.iter().map(f).collect(), self.fps, self.color_mode)
    }
}

/// Source frame index chosen for each output frame when resampling
/// `len` frames from `fps` to `target_fps` by nearest timestamp.
pub fn resample_indices(len: usize, fps: f64, target_fps: f64) -> Result<Vec<usize>> {
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(Error::config(format!(
            "target fps must be positive, got {target_fps}"
        )));
    }
    if fps == target_fps {
        return Ok((0..len).collect());
    }
    let out_len = (round_half_up(len as f64 * target_fps / fps) as usize).max(2);
    Ok((0..out_len)
        .map(|k| {
            let src = round_half_up(k as f64 * fps / target_fps) as usize;
            src.min(len - 1)
        })
        .collect())
}

/// Nearest-timestamp frame selection; no interpolation.
pub fn resample_fps(seq: &FrameSequence, target_fps: f64) -> Result<FrameSequence> {
    let idx = resample_indices(seq.len(), seq.fps(), target_fps)?;
    FrameSequence::new(
        idx.into_iter().map(|i| seq.frames[i].clone()).collect(),
        target_fps,
        seq.color_mode,
    )
}

/// Subject-level bookkeeping for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRef {
    pub subject_id: String,
    pub clip_id: String,
    pub fps: f64,
    pub color_mode: ColorMode,
}

impl ClipRef {
    pub fn validate(&self) -> Result<()> {
        if self.subject_id.is_empty() || self.clip_id.is_empty() {
            return Err(Error::Manifest("subject_id and clip_id must be non-empty".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Manifest(format!(
                "clip {} has non-positive fps",
                self.clip_id
            )));
        }
        Ok(())
    }
}

/// Contents of a frame directory's `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub fps: f64,
    pub color_mode: ColorMode,
    pub subject_id: String,
    pub clip_id: String,
}

impl VideoMeta {
    pub fn clip_ref(&self) -> ClipRef {
        ClipRef {
            subject_id: self.subject_id.clone(),
            clip_id: self.clip_id.clone(),
            fps: self.fps,
            color_mode: self.color_mode,
        }
    }
}

pub const META_FILE: &str = "meta.json";

pub fn read_meta(path: &Path) -> Result<VideoMeta> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read metadata {}: {e}", path.display())))?;
    let meta: VideoMeta = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if !(meta.fps > 0.0) {
        return Err(Error::config(format!(
            "{}: fps must be positive",
            path.display()
        )));
    }
    Ok(meta)
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pgm"))
                .unwrap_or(false)
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads a frame directory in filename order. `meta` is usually
/// `dir/meta.json`.
pub fn load_frames(dir: &Path, meta: &Path) -> Result<FrameSequence> {
    let meta = read_meta(meta)?;
    let files = frame_files(dir)?;
    if files.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} holds {} frame(s), need at least 2",
            dir.display(),
            files.len()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    for path in &files {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        let frame = match meta.color_mode {
            ColorMode::Rgb => {
                let rgb = img.to_rgb8();
                Frame::new(rgb.width() as usize, rgb.height() as usize, 3, rgb.into_raw())?
            }
            ColorMode::Ir => {
                let luma = img.to_luma8();
                Frame::new(luma.width() as usize, luma.height() as usize, 1, luma.into_raw())?
            }
        };
        frames.push(frame);
    }
    FrameSequence::new(frames, meta.fps, meta.color_mode)
}

/// Writes `frame_%06d.png` (RGB) or `frame_%06d.pgm` (IR) plus `meta.json`.
pub fn save_frames(seq: &FrameSequence, dir: &Path, meta: &VideoMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in seq.frames().iter().enumerate() {
        let (w, h) = (frame.width() as u32, frame.height() as u32);
        let result = if frame.channels() == 1 {
            let path = dir.join(format!("frame_{i:06}.pgm"));
            let img = image::GrayImage::from_raw(w, h, frame.data().to_vec())
                .expect("frame buffer matches its dimensions");
            img.save(&path).map_err(|source| Error::Image { path, source })
        } else {
            let path = dir.join(format!("frame_{i:06}.png"));
            let img = image::RgbImage::from_raw(w, h, frame.data().to_vec())
                .expect("frame buffer matches its dimensions");
            img.save(&path).map_err(|source| Error::Image { path, source })
        };
        result?;
    }
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::json(&meta_path, e))?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_frame(w: usize, h: usize) -> Frame {
        let data = (0..w * h).map(|i| (i % 251) as u8 + 1).collect();
        Frame::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn round_half_up_ties() {
        assert_eq!(round_half_up(2.5), 3.0);
        assert_eq!(round_half_up(2.49), 2.0);
        assert_eq!(round_half_up(-2.5), -2.0);
    }

    #[test]
    fn interior_crop_is_exact_copy() {
        let f = ramp_frame(100, 100);
        let c = crop_clamped(&f, &Box2D::new(10.0, 10.0, 20.0, 20.0)).unwrap();
        assert_eq!((c.width(), c.height()), (20, 20));
        for y in 0..20 {
            for x in 0..20 {
                assert_eq!(c.get(x, y, 0), f.get(x + 10, y + 10, 0));
            }
        }
    }

    #[test]
    fn crop_zero_pads_outside() {
        let f = ramp_frame(100, 100);
        let c = crop_clamped(&f, &Box2D::new(90.0, 90.0, 20.0, 20.0)).unwrap();
        assert_eq!((c.width(), c.height()), (20, 20));
        for y in 0..20 {
            for x in 0..20 {
                let v = c.get(x, y, 0);
                if x >= 10 || y >= 10 {
                    assert_eq!(v, 0, "({x},{y}) should be padding");
                } else {
                    assert_eq!(v, f.get(x + 90, y + 90, 0));
                }
            }
        }
    }

    #[test]
    fn crop_negative_origin_pads_left_top() {
        let f = ramp_frame(30, 30).to_rgb();
        let c = crop_clamped(&f, &Box2D::new(-5.0, -3.0, 10.0, 10.0)).unwrap();
        assert_eq!(c.get(0, 0, 2), 0);
        assert_eq!(c.get(5, 3, 1), f.get(0, 0, 1));
        assert_eq!(c.get(9, 9, 0), f.get(4, 6, 0));
    }

    #[test]
    fn degenerate_crop_rejected() {
        let f = ramp_frame(10, 10);
        let err = crop_clamped(&f, &Box2D::new(0.0, 0.0, 0.0, 5.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateBox(_)));
    }

    #[test]
    fn crop_rounds_half_up() {
        let f = ramp_frame(50, 50);
        let c = crop_clamped(&f, &Box2D::new(1.5, 2.5, 10.5, 4.4)).unwrap();
        assert_eq!((c.width(), c.height()), (11, 4));
        assert_eq!(c.get(0, 0, 0), f.get(2, 3, 0));
    }

    #[test]
    fn sequence_invariants() {
        let f = ramp_frame(4, 4);
        assert!(matches!(
            FrameSequence::new(vec![f.clone()], 10.0, ColorMode::Ir),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            FrameSequence::new(vec![f.clone(), ramp_frame(5, 4)], 10.0, ColorMode::Ir),
            Err(Error::Format(_))
        ));
        assert!(FrameSequence::new(vec![f.clone(), f], 0.0, ColorMode::Ir).is_err());
    }

    fn indexed_sequence(n: usize, fps: f64) -> FrameSequence {
        let frames = (0..n)
            .map(|i| Frame::new(2, 1, 1, vec![(i % 256) as u8, (i / 256) as u8]).unwrap())
            .collect();
        FrameSequence::new(frames, fps, ColorMode::Ir).unwrap()
    }

    fn source_index(f: &Frame) -> usize {
        f.get(0, 0, 0) as usize + 256 * f.get(1, 0, 0) as usize
    }

    #[test]
    fn resample_identity() {
        let s = indexed_sequence(600, 10.0);
        assert_eq!(resample_fps(&s, 10.0).unwrap(), s);
    }

    #[test]
    fn resample_integer_decimation() {
        let s = indexed_sequence(600, 30.0);
        let r = resample_fps(&s, 10.0).unwrap();
        assert_eq!(r.len(), 200);
        assert_eq!(r.fps(), 10.0);
        for (k, f) in r.frames().iter().enumerate() {
            assert_eq!(source_index(f), 3 * k);
        }
    }

    #[test]
    fn resample_upsampling_matches_nearest_timestamp_oracle() {
        let s = indexed_sequence(100, 10.0);
        let r = resample_fps(&s, 15.0).unwrap();
        assert_eq!(r.len(), 150);
        // Brute force: argmin over the source timestamp grid.
        for (k, f) in r.frames().iter().enumerate() {
            let t = k as f64 / 15.0;
            let nearest = (0..100)
                .min_by(|&a, &b| {
                    let da = (a as f64 / 10.0 - t).abs();
                    let db = (b as f64 / 10.0 - t).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            assert_eq!(source_index(f), nearest, "output frame {k}");
        }
        let dupes = r
            .frames()
            .windows(2)
            .filter(|w| source_index(&w[0]) == source_index(&w[1]))
            .count();
        assert_eq!(dupes, 50);
    }

    #[test]
    fn resample_rejects_bad_rate() {
        let s = indexed_sequence(10, 10.0);
        assert!(matches!(resample_fps(&s, 0.0), Err(Error::Config(_))));
        assert!(matches!(resample_fps(&s, -3.0), Err(Error::Config(_))));
    }

    #[test]
    fn resample_keeps_two_frames_minimum() {
        let s = indexed_sequence(3, 30.0);
        assert_eq!(resample_fps(&s, 1.0).unwrap().len(), 2);
    }

    #[test]
    fn rgb_replication_and_luminance() {
        let f = Frame::new(2, 1, 1, vec![10, 200]).unwrap();
        let rgb = f.to_rgb();
        assert_eq!(rgb.data(), &[10, 10, 10, 200, 200, 200]);
        let l = rgb.luminance();
        assert!((l.data[1] - 200.0).abs() < 1e-3);
    }

    #[test]
    fn box_serde_is_array() {
        let b: Box2D = serde_json::from_str("[1, 2, 3, 4]").unwrap();
        assert_eq!(b, Box2D::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1.0,2.0,3.0,4.0]");
    }
}
