//! Synthetic breathing clips with exact ground truth.
//!
//! A textured torso on a dark background stretches downward from a fixed
//! top edge; its height follows `base - A cos(2 pi f t)`, so the maxima sit at
//! `t = (n + 1/2) / f`. A static head disk gives the face detections. All
//! rendered intensities stay at or below 127 so a gain of 2 cannot clip.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{round_half_up, Box2D, ColorMode, Frame, FrameSequence};
use crate::roi::{DetectionEntry, DetectionTrack};
use crate::signal::PeakList;

const BACKGROUND: f64 = 14.0;
const HEAD_CENTER: (f64, f64) = (0.5, 14.0);
const HEAD_RADIUS: f64 = 9.0;
const TORSO_TOP: f64 = 26.0;
const TORSO_MARGIN_X: f64 = 20.0;
const TORSO_BASE_HEIGHT: f64 = 34.0;
/// Detector boxes are padded by this much around the torso.
const BOX_PAD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub bpm: f64,
    pub fps: f64,
    /// Seconds.
    pub duration: f64,
    /// Oscillation amplitude of the torso height, pixels.
    pub amplitude_px: f64,
    /// Gaussian pixel noise, as a fraction of full scale.
    pub noise_sigma: f64,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub color_mode: ColorMode,
    /// Frames between detections (the last frame is always detected).
    pub detection_stride: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            bpm: 24.0,
            fps: 10.0,
            duration: 60.0,
            amplitude_px: 2.0,
            noise_sigma: 2.0 / 255.0,
            seed: 0,
            width: 80,
            height: 72,
            color_mode: ColorMode::Ir,
            detection_stride: 5,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(12.0..=80.0).contains(&self.bpm) {
            return Err(Error::config(format!("bpm {} outside [12, 80]", self.bpm)));
        }
        if !(self.amplitude_px >= 0.5) || !self.amplitude_px.is_finite() {
            return Err(Error::config(format!(
                "amplitude {} px is below the detectable 0.5 px",
                self.amplitude_px
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) || !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("fps and duration must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be non-negative"));
        }
        if self.detection_stride == 0 {
            return Err(Error::config("detection_stride must be at least 1"));
        }
        let bottom = TORSO_TOP + TORSO_BASE_HEIGHT + self.amplitude_px + BOX_PAD;
        if self.width < 48 || (self.height as f64) < bottom + 1.0 {
            return Err(Error::config(format!(
                "{}x{} is too small for the scene at amplitude {} px",
                self.width, self.height, self.amplitude_px
            )));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (round_half_up(self.duration * self.fps) as usize).max(2)
    }

    fn torso_height(&self, t: f64) -> f64 {
        TORSO_BASE_HEIGHT - self.amplitude_px * (2.0 * PI * self.bpm / 60.0 * t).cos()
    }

    fn torso_x(&self) -> (f64, f64) {
        (TORSO_MARGIN_X, self.width as f64 - TORSO_MARGIN_X)
    }
}

#[derive(Debug, Clone)]
pub struct SynthClip {
    pub frames: FrameSequence,
    /// Times of maximal torso extent.
    pub peaks: PeakList,
    pub detections: DetectionTrack,
}

/// Smooth texture in `[0, 1]` over normalized torso coordinates.
fn torso_texture(x: f64, s: f64) -> f64 {
    let a = (0.9 * x + 0.3).sin() * (19.0 * s).cos();
    let b = (0.37 * x + 11.0 * s + 1.0).sin();
    let c = (1.7 * x).cos() * (7.0 * s + 0.5).sin();
    (0.5 + 0.2 * a + 0.18 * b + 0.12 * c).clamp(0.0, 1.0)
}

fn head_texture(x: f64, y: f64) -> f64 {
    0.5 + 0.25 * (0.8 * x).sin() * (0.6 * y).cos()
}

fn render(p: &SynthParams, t: f64) -> Vec<f64> {
    let (w, h) = (p.width, p.height);
    let (x0, x1) = p.torso_x();
    let extent = p.torso_height(t);
    let bottom = TORSO_TOP + extent;
    let (hx, hy) = (HEAD_CENTER.0 * w as f64, HEAD_CENTER.1);
    let mut img = vec![BACKGROUND; w * h];
    for y in 0..h {
        let yc = y as f64 + 0.5;
        // Fraction of the pixel row covered by the torso.
        let cover = (bottom - y as f64).clamp(0.0, 1.0) * (y as f64 + 1.0 - TORSO_TOP).clamp(0.0, 1.0);
        for x in 0..w {
            let xc = x as f64 + 0.5;
            let px = &mut img[y * w + x];
            if cover > 0.0 && xc >= x0 && xc < x1 {
                let s = ((yc - TORSO_TOP) / extent).clamp(0.0, 1.0);
                let torso = 40.0 + 80.0 * torso_texture(xc - x0, s);
                *px = cover * torso + (1.0 - cover) * BACKGROUND;
            }
            let d = (xc - hx).hypot(yc - hy);
            let head_cover = (HEAD_RADIUS + 0.5 - d).clamp(0.0, 1.0);
            if head_cover > 0.0 {
                let head = 50.0 + 60.0 * head_texture(xc - hx, yc - hy);
                *px = head_cover * head + (1.0 - head_cover) * *px;
            }
        }
    }
    img
}

fn tint(v: u8, c: usize) -> u8 {
    const GAIN: [f64; 3] = [1.0, 0.9, 0.8];
    round_half_up(v as f64 * GAIN[c]) as u8
}

pub fn synth_clip(p: &SynthParams) -> Result<SynthClip> {
    p.validate()?;
    let n = p.frame_count();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise = Normal::new(0.0, p.noise_sigma * 255.0).map_err(|e| Error::config(e.to_string()))?;
    let channels = p.color_mode.channels();
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / p.fps;
        let img = render(p, t);
        let mut data = Vec::with_capacity(img.len() * channels);
        for v in img {
            let noisy = if p.noise_sigma > 0.0 { v + noise.sample(&mut rng) } else { v };
            let q = round_half_up(noisy).clamp(0.0, 255.0) as u8;
            for c in 0..channels {
                data.push(if channels == 3 { tint(q, c) } else { q });
            }
        }
        frames.push(Frame::new(p.width, p.height, channels, data)?);
    }
    let frames = FrameSequence::new(frames, p.fps, p.color_mode)?;

    let f = p.bpm / 60.0;
    let duration = n as f64 / p.fps;
    let peaks: Vec<f64> = (0..)
        .map(|i| (i as f64 + 0.5) / f)
        .take_while(|&t| t <= duration - 1.0 / p.fps)
        .collect();
    let peaks = PeakList::new(peaks)?;

    let (x0, x1) = p.torso_x();
    let head = Box2D::new(
        HEAD_CENTER.0 * p.width as f64 - HEAD_RADIUS,
        HEAD_CENTER.1 - HEAD_RADIUS,
        2.0 * HEAD_RADIUS,
        2.0 * HEAD_RADIUS,
    );
    let mut entries = Vec::new();
    for k in (0..n).step_by(p.detection_stride).chain(std::iter::once(n - 1)) {
        if entries.last().is_some_and(|e: &DetectionEntry| e.frame == k) {
            continue;
        }
        let extent = p.torso_height(k as f64 / p.fps);
        entries.push(DetectionEntry {
            frame: k,
            body: Some(Box2D::new(
                x0 - BOX_PAD,
                TORSO_TOP - BOX_PAD,
                x1 - x0 + 2.0 * BOX_PAD,
                extent + 2.0 * BOX_PAD,
            )),
            body_conf: Some(0.9),
            face: Some(head),
            face_conf: Some(0.8),
        });
    }
    let detections = DetectionTrack {
        stride: p.detection_stride,
        image_w: p.width,
        image_h: p.height,
        entries,
    };
    detections.validate_for_clip(n, p.width, p.height)?;
    Ok(SynthClip {
        frames,
        peaks,
        detections,
    })
}
