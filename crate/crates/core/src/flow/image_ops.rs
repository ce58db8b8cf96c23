//! Separable filtering, bilinear sampling and pyramids on [`Plane`]s.
//! All border accesses replicate the edge pixel.

use crate::frame::Plane;

/// Normalized Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f32> {
    let taps: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter().map(|t| (t / sum) as f32).collect()
}

/// Correlates every row with `kernel` (centered).
pub fn filter_rows(src: &Plane, kernel: &[f32]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (src.width, src.height);
    let mut out = vec![0.0f32; w * h];
    let mut padded = vec![0.0f32; w + 2 * r as usize];
    for y in 0..h {
        let row = &src.data[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            let x = (i as isize - r).clamp(0, w as isize - 1) as usize;
            *p = row[x];
        }
        let dst = &mut out[y * w..(y + 1) * w];
        for (x, d) in dst.iter_mut().enumerate() {
            let window = &padded[x..x + kernel.len()];
            *d = window.iter().zip(kernel).map(|(a, b)| a * b).sum();
        }
    }
    Plane {
        width: w,
        height: h,
        data: out,
    }
}

/// Correlates every column with `kernel` (centered).
pub fn filter_cols(src: &Plane, kernel: &[f32]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (src.width, src.height);
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, &coef) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
            let row = &src.data[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(row) {
                *d += coef * s;
            }
        }
    }
    Plane {
        width: w,
        height: h,
        data: out,
    }
}

pub fn gaussian_blur(src: &Plane, sigma: f64) -> Plane {
    if sigma <= 0.0 {
        return src.clone();
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let k = gaussian_kernel(sigma, radius);
    filter_cols(&filter_rows(src, &k), &k)
}

/// Bilinear sample at real coordinates with replicate borders.
#[inline]
pub fn sample_bilinear(p: &Plane, x: f32, y: f32) -> f32 {
    let xf = x.floor();
    let yf = y.floor();
    let fx = x - xf;
    let fy = y - yf;
    let (x0, y0) = (xf as isize, yf as isize);
    let a = p.get_clamped(x0, y0);
    let b = p.get_clamped(x0 + 1, y0);
    let c = p.get_clamped(x0, y0 + 1);
    let d = p.get_clamped(x0 + 1, y0 + 1);
    let top = a + fx * (b - a);
    let bottom = c + fx * (d - c);
    top + fy * (bottom - top)
}

/// Bilinear resize with pixel-center alignment.
pub fn resize(src: &Plane, width: usize, height: usize) -> Plane {
    if width == src.width && height == src.height {
        return src.clone();
    }
    let sx = src.width as f32 / width as f32;
    let sy = src.height as f32 / height as f32;
    Plane::from_fn(width, height, |x, y| {
        sample_bilinear(src, (x as f32 + 0.5) * sx - 0.5, (y as f32 + 0.5) * sy - 0.5)
    })
}

/// Central-difference gradients.
pub fn gradients(p: &Plane) -> (Plane, Plane) {
    let (w, h) = (p.width as isize, p.height as isize);
    let gx = Plane::from_fn(p.width, p.height, |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.5 * (p.get_clamped((x + 1).min(w - 1), y) - p.get_clamped((x - 1).max(0), y))
    });
    let gy = Plane::from_fn(p.width, p.height, |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.5 * (p.get_clamped(x, (y + 1).min(h - 1)) - p.get_clamped(x, (y - 1).max(0)))
    });
    (gx, gy)
}

/// Image sizes of a pyramid with ratio `scale`, finest first, stopping
/// before a level would drop below `min_size` pixels on its short side.
pub fn pyramid_sizes(width: usize, height: usize, levels: usize, scale: f64, min_size: usize) -> Vec<(usize, usize)> {
    let mut sizes = vec![(width, height)];
    while sizes.len() < levels {
        let (w, h) = *sizes.last().unwrap();
        let nw = (w as f64 * scale).round() as usize;
        let nh = (h as f64 * scale).round() as usize;
        if nw.min(nh) < min_size || (nw, nh) == (w, h) {
            break;
        }
        sizes.push((nw, nh));
    }
    sizes
}

/// Gaussian pyramid over the given sizes (finest first).
pub fn build_pyramid(base: &Plane, sizes: &[(usize, usize)], scale: f64) -> Vec<Plane> {
    let sigma = 0.6 * (1.0 / (scale * scale) - 1.0).max(0.0).sqrt();
    let mut levels = vec![base.clone()];
    for &(w, h) in &sizes[1..] {
        let prev = levels.last().unwrap();
        levels.push(resize(&gaussian_blur(prev, sigma), w, h));
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.5, 4);
        assert_eq!(k.len(), 9);
        assert!((k.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert_eq!(k[0], k[8]);
    }

    #[test]
    fn blur_preserves_constants() {
        let p = Plane::from_fn(10, 7, |_, _| 42.0);
        let b = gaussian_blur(&p, 2.0);
        assert!(b.data.iter().all(|v| (v - 42.0).abs() < 1e-4));
    }

    #[test]
    fn bilinear_on_ramp_is_exact() {
        let p = Plane::from_fn(8, 8, |x, y| x as f32 + 10.0 * y as f32);
        assert!((sample_bilinear(&p, 2.25, 3.5) - (2.25 + 35.0)).abs() < 1e-5);
        // Replicated border.
        assert_eq!(sample_bilinear(&p, -3.0, 0.0), 0.0);
    }

    #[test]
    fn pyramid_size_guard() {
        assert_eq!(pyramid_sizes(64, 48, 3, 0.5, 8), vec![(64, 48), (32, 24), (16, 12)]);
        assert_eq!(pyramid_sizes(20, 20, 5, 0.5, 8), vec![(20, 20), (10, 10)]);
    }
}
