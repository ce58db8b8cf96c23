//! Total-variation regularized L1 optical flow, solved by the primal-dual
//! scheme with linearized warping on a coarse-to-fine pyramid.

use crate::frame::Plane;

use super::image_ops::{build_pyramid, gradients, pyramid_sizes, resize, sample_bilinear};
use super::{FlowConfig, FlowField, MIN_LEVEL_SIDE};

const GRAD_EPS: f32 = 1e-10;

/// Forward differences with Neumann boundary (zero at the last column/row).
fn forward_gradient(u: &Plane, gx: &mut [f32], gy: &mut [f32]) {
    let (w, h) = (u.width, u.height);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            gx[p] = if x + 1 < w { u.data[p + 1] - u.data[p] } else { 0.0 };
            gy[p] = if y + 1 < h { u.data[p + w] - u.data[p] } else { 0.0 };
        }
    }
}

/// Negative adjoint of [`forward_gradient`].
fn divergence(w: usize, h: usize, px: &[f32], py: &[f32], out: &mut [f32]) {
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let dx = if w == 1 {
                0.0
            } else if x == 0 {
                px[p]
            } else if x + 1 == w {
                -px[p - 1]
            } else {
                px[p] - px[p - 1]
            };
            let dy = if h == 1 {
                0.0
            } else if y == 0 {
                py[p]
            } else if y + 1 == h {
                -py[p - w]
            } else {
                py[p] - py[p - w]
            };
            out[p] = dx + dy;
        }
    }
}

/// Total variation of both components plus the weighted L1 data term,
/// evaluated with the exact (non-linearized) warp of `next`.
pub(super) fn energy(prev: &Plane, next: &Plane, u: &Plane, v: &Plane, lambda: f64) -> f64 {
    let (w, h) = (u.width, u.height);
    let n = w * h;
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
    let mut tv = 0.0f64;
    for comp in [u, v] {
        forward_gradient(comp, &mut gx, &mut gy);
        tv += gx.iter().zip(&gy).map(|(a, b)| ((a * a + b * b) as f64).sqrt()).sum::<f64>();
    }
    let mut data = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let (sx, sy) = (x as f32 + u.data[p], y as f32 + v.data[p]);
            data += (sample_bilinear(next, sx, sy) - prev.data[p]).abs() as f64;
        }
    }
    tv + lambda * data
}

#[inline]
fn inside(x: f32, y: f32, w: usize, h: usize) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (w - 1) as f32 && y <= (h - 1) as f32
}

struct Solver<'a> {
    cfg: &'a FlowConfig,
    w: usize,
    h: usize,
}

impl Solver<'_> {
    /// One warping step: linearize around the current flow and run the
    /// fixed number of primal-dual iterations.
    #[allow(clippy::too_many_arguments)]
    fn warp_step(
        &self,
        prev: &Plane,
        next: &Plane,
        next_gx: &Plane,
        next_gy: &Plane,
        u: &mut Plane,
        v: &mut Plane,
        p: &mut [Vec<f32>; 4],
    ) {
        let (w, h) = (self.w, self.h);
        let n = w * h;
        let lambda = self.cfg.tvl1_lambda as f32;
        let theta = self.cfg.tvl1_theta as f32;
        let tau_theta = (self.cfg.tvl1_tau / self.cfg.tvl1_theta) as f32;
        let l_t = lambda * theta;

        let mut i1x = vec![0.0f32; n];
        let mut i1y = vec![0.0f32; n];
        let mut grad2 = vec![0.0f32; n];
        let mut rho_c = vec![0.0f32; n];
        for y in 0..h {
            for x in 0..w {
                let q = y * w + x;
                let (sx, sy) = (x as f32 + u.data[q], y as f32 + v.data[q]);
                let i1w = sample_bilinear(next, sx, sy);
                // No data force where the warp leaves the image.
                if inside(sx, sy, w, h) {
                    i1x[q] = sample_bilinear(next_gx, sx, sy);
                    i1y[q] = sample_bilinear(next_gy, sx, sy);
                } else {
                    i1x[q] = 0.0;
                    i1y[q] = 0.0;
                }
                grad2[q] = i1x[q] * i1x[q] + i1y[q] * i1y[q];
                rho_c[q] = i1w - i1x[q] * u.data[q] - i1y[q] * v.data[q] - prev.data[q];
            }
        }

        let mut v1 = vec![0.0f32; n];
        let mut v2 = vec![0.0f32; n];
        let mut div1 = vec![0.0f32; n];
        let mut div2 = vec![0.0f32; n];
        let (mut ux, mut uy) = (vec![0.0f32; n], vec![0.0f32; n]);
        let [p11, p12, p21, p22] = p;
        for _ in 0..self.cfg.tvl1_iterations {
            for q in 0..n {
                let rho = rho_c[q] + i1x[q] * u.data[q] + i1y[q] * v.data[q];
                let (d1, d2) = if rho < -l_t * grad2[q] {
                    (l_t * i1x[q], l_t * i1y[q])
                } else if rho > l_t * grad2[q] {
                    (-l_t * i1x[q], -l_t * i1y[q])
                } else if grad2[q] > GRAD_EPS {
                    let f = -rho / grad2[q];
                    (f * i1x[q], f * i1y[q])
                } else {
                    (0.0, 0.0)
                };
                v1[q] = u.data[q] + d1;
                v2[q] = v.data[q] + d2;
            }
            divergence(w, h, p11, p12, &mut div1);
            divergence(w, h, p21, p22, &mut div2);
            for q in 0..n {
                u.data[q] = v1[q] + theta * div1[q];
                v.data[q] = v2[q] + theta * div2[q];
            }
            for (comp, px, py) in [(&*u, &mut *p11, &mut *p12), (&*v, &mut *p21, &mut *p22)] {
                forward_gradient(comp, &mut ux, &mut uy);
                for q in 0..n {
                    let norm = (ux[q] * ux[q] + uy[q] * uy[q]).sqrt();
                    let denom = 1.0 + tau_theta * norm;
                    px[q] = (px[q] + tau_theta * ux[q]) / denom;
                    py[q] = (py[q] + tau_theta * uy[q]) / denom;
                }
            }
        }
    }
}

/// Runs the full solver; `trace` receives the finest-level energy after
/// every accepted warp.
pub(super) fn flow(prev: &Plane, next: &Plane, cfg: &FlowConfig, mut trace: Option<&mut Vec<f64>>) -> FlowField {
    let sizes = pyramid_sizes(prev.width, prev.height, cfg.pyramid_levels, cfg.pyramid_scale, MIN_LEVEL_SIDE);
    let p0 = build_pyramid(prev, &sizes, cfg.pyramid_scale);
    let p1 = build_pyramid(next, &sizes, cfg.pyramid_scale);
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
        let (gx, gy) = gradients(&p1[level]);
        let solver = Solver { cfg, w, h };
        let mut p: [Vec<f32>; 4] = std::array::from_fn(|_| vec![0.0; w * h]);
        let finest = level == 0;
        let mut previous = f64::INFINITY;
        for _ in 0..cfg.tvl1_warps {
            let saved = (u.clone(), v.clone(), p.clone());
            solver.warp_step(&p0[level], &p1[level], &gx, &gy, &mut u, &mut v, &mut p);
            let e = energy(&p0[level], &p1[level], &u, &v, cfg.tvl1_lambda);
            // A warp that raises the energy reached by the previous one is
            // undone and ends the level.
            if e > previous {
                (u, v, p) = saved;
                break;
            }
            previous = e;
            if finest {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(e);
                }
            }
        }
    }
    FlowField::from_components(u, v)
}
