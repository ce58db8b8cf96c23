//! Two-frame motion estimation from local quadratic polynomial expansion.

use crate::frame::Plane;
use crate::linalg;

use super::image_ops::{build_pyramid, filter_cols, filter_rows, gaussian_kernel, pyramid_sizes, resize, sample_bilinear};
use super::{FlowConfig, FlowField, MIN_LEVEL_SIDE};

/// Per-pixel coefficients of `f(x, y) ~ c + b.(x, y) + (x, y) A (x, y)^T`.
struct Expansion {
    bx: Plane,
    by: Plane,
    axx: Plane,
    ayy: Plane,
    /// Off-diagonal of `A` (half the `xy` coefficient).
    axy: Plane,
}

/// Gaussian-weighted least squares fit of the basis `[1, x, y, x^2, y^2, xy]`
/// over a `(2n+1)^2` neighbourhood, via separable moment filters.
fn expand(img: &Plane, n: usize) -> Expansion {
    let sigma = 0.2 * n as f64 + 0.1;
    let g = gaussian_kernel(sigma, n);
    let offsets: Vec<f32> = (-(n as i64)..=n as i64).map(|i| i as f32).collect();
    let gx: Vec<f32> = g.iter().zip(&offsets).map(|(w, o)| w * o).collect();
    let gxx: Vec<f32> = g.iter().zip(&offsets).map(|(w, o)| w * o * o).collect();

    // Gram matrix of the weighted basis.
    let mut gram = [0.0f64; 36];
    for (j, wy) in g.iter().enumerate() {
        for (i, wx) in g.iter().enumerate() {
            let (x, y) = (offsets[i] as f64, offsets[j] as f64);
            let basis = [1.0, x, y, x * x, y * y, x * y];
            let w = (*wx as f64) * (*wy as f64);
            for r in 0..6 {
                for c in 0..6 {
                    gram[r * 6 + c] += w * basis[r] * basis[c];
                }
            }
        }
    }
    let inv = linalg::invert(6, &gram).expect("polynomial basis Gram matrix is non-singular");

    let r0 = filter_rows(img, &g);
    let r1 = filter_rows(img, &gx);
    let r2 = filter_rows(img, &gxx);
    let moments = [
        filter_cols(&r0, &g),
        filter_cols(&r1, &g),
        filter_cols(&r0, &gx),
        filter_cols(&r2, &g),
        filter_cols(&r0, &gxx),
        filter_cols(&r1, &gx),
    ];

    let (w, h) = (img.width, img.height);
    let coef = |row: usize| {
        let weights: Vec<f32> = (0..6).map(|k| inv[row * 6 + k] as f32).collect();
        let mut out = Plane::zeros(w, h);
        for (p, o) in out.data.iter_mut().enumerate() {
            *o = (0..6).map(|k| weights[k] * moments[k].data[p]).sum();
        }
        out
    };
    let mut axy = coef(5);
    axy.data.iter_mut().for_each(|v| *v *= 0.5);
    Expansion {
        bx: coef(1),
        by: coef(2),
        axx: coef(3),
        ayy: coef(4),
        axy,
    }
}

/// Refines `(u, v)` in place by one Farnebäck update at a single scale.
fn update(e1: &Expansion, e2: &Expansion, u: &mut Plane, v: &mut Plane, window: usize) {
    let (w, h) = (u.width, u.height);
    // Entries of A^T A (symmetric, 3 unique) and A^T db.
    let mut g11 = Plane::zeros(w, h);
    let mut g12 = Plane::zeros(w, h);
    let mut g22 = Plane::zeros(w, h);
    let mut h1 = Plane::zeros(w, h);
    let mut h2 = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let (du, dv) = (u.data[p], v.data[p]);
            let (sx, sy) = (x as f32 + du, y as f32 + dv);
            let a11 = 0.5 * (e1.axx.data[p] + sample_bilinear(&e2.axx, sx, sy));
            let a12 = 0.5 * (e1.axy.data[p] + sample_bilinear(&e2.axy, sx, sy));
            let a22 = 0.5 * (e1.ayy.data[p] + sample_bilinear(&e2.ayy, sx, sy));
            let db1 = -0.5 * (sample_bilinear(&e2.bx, sx, sy) - e1.bx.data[p]) + a11 * du + a12 * dv;
            let db2 = -0.5 * (sample_bilinear(&e2.by, sx, sy) - e1.by.data[p]) + a12 * du + a22 * dv;
            g11.data[p] = a11 * a11 + a12 * a12;
            g12.data[p] = a12 * (a11 + a22);
            g22.data[p] = a12 * a12 + a22 * a22;
            h1.data[p] = a11 * db1 + a12 * db2;
            h2.data[p] = a12 * db1 + a22 * db2;
        }
    }
    let radius = window / 2;
    let k = gaussian_kernel(0.3 * radius as f64, radius);
    let smooth = |p: &Plane| filter_cols(&filter_rows(p, &k), &k);
    let (g11, g12, g22, h1, h2) = (smooth(&g11), smooth(&g12), smooth(&g22), smooth(&h1), smooth(&h2));
    for p in 0..w * h {
        let det = g11.data[p] * g22.data[p] - g12.data[p] * g12.data[p] + 1e-3;
        u.data[p] = (g22.data[p] * h1.data[p] - g12.data[p] * h2.data[p]) / det;
        v.data[p] = (g11.data[p] * h2.data[p] - g12.data[p] * h1.data[p]) / det;
    }
}

pub(super) fn flow(prev: &Plane, next: &Plane, cfg: &FlowConfig) -> FlowField {
    let sizes = pyramid_sizes(prev.width, prev.height, cfg.pyramid_levels, cfg.pyramid_scale, MIN_LEVEL_SIDE);
    let p1 = build_pyramid(prev, &sizes, cfg.pyramid_scale);
    let p2 = build_pyramid(next, &sizes, cfg.pyramid_scale);
    let mut u = Plane::zeros(0, 0);
    let mut v = Plane::zeros(0, 0);
    for level in (0..sizes.len()).rev() {
        let (w, h) = sizes[level];
        if u.width == 0 {
            u = Plane::zeros(w, h);
            v = Plane::zeros(w, h);
        } else {
            let (fx, fy) = (w as f32 / u.width as f32, h as f32 / u.height as f32);
            u = resize(&u, w, h);
            v = resize(&v, w, h);
            u.data.iter_mut().for_each(|d| *d *= fx);
            v.data.iter_mut().for_each(|d| *d *= fy);
        }
        let e1 = expand(&p1[level], cfg.farneback_poly_n);
        let e2 = expand(&p2[level], cfg.farneback_poly_n);
        for _ in 0..cfg.iterations_per_level {
            update(&e1, &e2, &mut u, &mut v, cfg.farneback_window);
        }
    }
    FlowField::from_components(u, v)
}
