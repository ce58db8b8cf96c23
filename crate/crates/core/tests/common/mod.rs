//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resp_core::frame::Plane;
use resp_core::roi::{DetectionTrack, RoiConfig, FULL_FRAME_FRACTION, MIN_BOX_SIDE, MIN_CONFIDENCE};
use resp_core::signal::{Band, SpectralConfig};
use resp_core::Box2D;

/// `x - (I + lambda^2 D'D)^{-1} x` by a dense Cholesky solve.
pub fn dense_detrend(x: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.len();
    let mut d = DMatrix::<f64>::zeros(n - 2, n);
    for r in 0..n - 2 {
        d[(r, r)] = 1.0;
        d[(r, r + 1)] = -2.0;
        d[(r, r + 2)] = 1.0;
    }
    let a = DMatrix::<f64>::identity(n, n) + (d.transpose() * &d) * (lambda * lambda);
    let xv = DVector::from_column_slice(x);
    let smooth = a.cholesky().expect("SPD").solve(&xv);
    (xv - smooth).iter().copied().collect()
}

/// One-sided `|X_k|^2 / N` of the mean-removed signal by direct summation.
pub fn dft_periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                // Reduce the phase index first to keep the angle small.
                let phase = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                re += (v - mean) * phase.cos();
                im -= (v - mean) * phase.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

pub fn dft_psd_normalized(x: &[f64], fs: f64, cfg: &SpectralConfig) -> Vec<f64> {
    let n = x.len();
    let p = dft_periodogram(x);
    let df = fs / n as f64;
    let in_band: Vec<f64> = (0..=n / 2)
        .filter(|&k| {
            let f = k as f64 * df;
            f >= cfg.band.lo - 1e-9 * df && f <= cfg.band.hi + 1e-9 * df
        })
        .map(|k| p[k])
        .collect();
    let total: f64 = in_band.iter().sum();
    in_band.iter().map(|v| v / (total + cfg.epsilon)).collect()
}

pub fn dft_psd_mse(a: &[f64], b: &[f64], fs: f64, cfg: &SpectralConfig) -> f64 {
    let pa = dft_psd_normalized(a, fs, cfg);
    let pb = dft_psd_normalized(b, fs, cfg);
    pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / pa.len() as f64
}

/// Textbook order statistics: middle element or mean of the two middles.
pub fn sorted_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Linear interpolation between closest ranks.
pub fn sorted_percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    v[i] + (pos - i as f64) * (v[j] - v[i])
}

fn intersect_image(x0: f64, y0: f64, x1: f64, y1: f64, w: f64, h: f64) -> Box2D {
    let (ax, ay) = (x0.max(0.0).min(w), y0.max(0.0).min(h));
    let (bx, by) = (x1.max(0.0).min(w), y1.max(0.0).min(h));
    Box2D::new(ax, ay, (bx - ax).max(0.0), (by - ay).max(0.0))
}

/// Body ROI from the usable detections: median center, 75th-percentile
/// extents, intersected with the image, enlarged about its center and
/// intersected again.
pub fn body_roi_oracle(track: &DetectionTrack, cfg: &RoiConfig) -> Box2D {
    let (w, h) = (track.image_w as f64, track.image_h as f64);
    let bodies: Vec<Box2D> = track
        .entries
        .iter()
        .filter_map(|e| {
            let b = e.body?;
            let confident = e.body_conf.is_none_or(|c| c >= MIN_CONFIDENCE);
            let sized = b.w >= MIN_BOX_SIDE && b.h >= MIN_BOX_SIDE;
            (confident && sized && b.w * b.h < FULL_FRAME_FRACTION * w * h).then_some(b)
        })
        .collect();
    if bodies.is_empty() {
        return Box2D::new(0.0, 0.0, w, h);
    }
    let cx = sorted_median(&bodies.iter().map(|b| b.x + b.w / 2.0).collect::<Vec<_>>());
    let cy = sorted_median(&bodies.iter().map(|b| b.y + b.h / 2.0).collect::<Vec<_>>());
    let bw = sorted_percentile(&bodies.iter().map(|b| b.w).collect::<Vec<_>>(), 0.75);
    let bh = sorted_percentile(&bodies.iter().map(|b| b.h).collect::<Vec<_>>(), 0.75);
    let r = intersect_image(cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0, w, h);
    let (ex, ey) = (r.x + r.w / 2.0, r.y + r.h / 2.0);
    let (ew, eh) = (r.w * cfg.enlarge, r.h * cfg.enlarge);
    intersect_image(ex - ew / 2.0, ey - eh / 2.0, ex + ew / 2.0, ey + eh / 2.0, w, h)
}

/// Seeded random track on a 1/8-pixel grid, so every median, percentile
/// and center is exactly representable. Includes missing, low-confidence,
/// tiny and full-frame boxes.
pub fn random_track(seed: u64) -> DetectionTrack {
    use resp_core::roi::DetectionEntry;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (iw, ih) = (rng.random_range(64..=320usize), rng.random_range(64..=320usize));
    let grid = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo * 8.0..=hi * 8.0)).floor() / 8.0;
    let n = rng.random_range(1..=40usize);
    let stride = rng.random_range(1..=5usize);
    let entries = (0..n)
        .map(|i| {
            let kind = rng.random_range(0..10u32);
            let body = match kind {
                0 => None,
                1 => Some(Box2D::new(0.0, 0.0, iw as f64, ih as f64)),
                2 => Some(Box2D::new(grid(&mut rng, 0.0, 10.0), grid(&mut rng, 0.0, 10.0), 1.5, 1.0)),
                _ => {
                    let bw = grid(&mut rng, 4.0, iw as f64 * 0.9);
                    let bh = grid(&mut rng, 4.0, ih as f64 * 0.9);
                    let x = grid(&mut rng, 0.0, iw as f64 - bw);
                    let y = grid(&mut rng, 0.0, ih as f64 - bh);
                    Some(Box2D::new(x, y, bw, bh))
                }
            };
            let body_conf = match rng.random_range(0..4u32) {
                0 => None,
                1 => Some(0.1),
                _ => Some(0.5 + 0.125 * rng.random_range(0..4u32) as f64),
            };
            DetectionEntry {
                frame: i * stride,
                body,
                body_conf,
                face: None,
                face_conf: None,
            }
        })
        .collect();
    DetectionTrack {
        stride,
        image_w: iw,
        image_h: ih,
        entries,
    }
}

/// Smooth sinusoidal texture.
pub fn texture_waves(x: f64, y: f64) -> f64 {
    128.0 + 40.0 * (0.31 * x).sin() * (0.23 * y).cos() + 30.0 * (0.17 * x + 0.41 * y).sin()
}

/// Sum of Gaussian blobs on a lattice with varying amplitude.
pub fn texture_blobs(x: f64, y: f64) -> f64 {
    let mut v = 60.0;
    for i in -2..12 {
        for j in -2..12 {
            let (cx, cy) = (7.0 * i as f64 + 2.0 * (j % 3) as f64, 7.0 * j as f64 + 1.5 * (i % 2) as f64);
            let a = 30.0 + 20.0 * ((i * 7 + j * 3) % 5) as f64;
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            v += a * (-d2 / 8.0).exp();
        }
    }
    v.min(250.0)
}

/// Bilinearly interpolated lattice noise (4 px cells), seeded.
pub fn noise_texture(seed: u64) -> impl Fn(f64, f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const CELLS: usize = 40;
    let lattice: Vec<f64> = (0..CELLS * CELLS).map(|_| rng.random_range(40.0..220.0)).collect();
    move |x: f64, y: f64| {
        let (gx, gy) = ((x + 16.0) / 4.0, (y + 16.0) / 4.0);
        let (i, j) = (gx.floor() as usize, gy.floor() as usize);
        let (fx, fy) = (gx - i as f64, gy - j as f64);
        let at = |a: usize, b: usize| lattice[b.min(CELLS - 1) * CELLS + a.min(CELLS - 1)];
        let top = at(i, j) * (1.0 - fx) + at(i + 1, j) * fx;
        let bottom = at(i, j + 1) * (1.0 - fx) + at(i + 1, j + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// `next` holds the content of `prev` moved by `(tx, ty)`.
pub fn shifted_pair(f: &dyn Fn(f64, f64) -> f64, size: usize, tx: f64, ty: f64) -> (Plane, Plane) {
    let prev = Plane::from_fn(size, size, |x, y| f(x as f64, y as f64) as f32);
    let next = Plane::from_fn(size, size, |x, y| f(x as f64 - tx, y as f64 - ty) as f32);
    (prev, next)
}

pub const SHIFTS: [(f64, f64); 4] = [(1.0, 0.0), (-2.0, 0.0), (0.0, 2.0), (1.0, -1.0)];

pub fn default_band() -> Band {
    Band::default()
}
