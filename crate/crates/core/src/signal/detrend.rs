use crate::error::{Error, Result};

use super::Waveform;

/// Half-bandwidth of `I + lambda^2 D^T D` for the second-difference `D`.
const BANDWIDTH: usize = 2;

/// Cholesky factor of the pentadiagonal system `I + lambda^2 D^T D`.
///
/// Row `i` of `factor` holds `L[i][i-2], L[i][i-1], L[i][i]`.
#[derive(Debug, Clone)]
pub struct SmoothnessPrior {
    lambda: f64,
    factor: Vec<[f64; BANDWIDTH + 1]>,
}

impl SmoothnessPrior {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InsufficientData(format!(
                "detrending needs at least 3 samples, got {n}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {lambda}")));
        }
        let l2 = lambda * lambda;
        // Lower band of A: band[i][k] = A[i][i - BANDWIDTH + k].
        let mut band = vec![[0.0; BANDWIDTH + 1]; n];
        for row in &mut band {
            row[BANDWIDTH] = 1.0;
        }
        let stencil = [1.0, -2.0, 1.0];
        for r in 0..n - 2 {
            for (p, sp) in stencil.iter().enumerate() {
                for (q, sq) in stencil.iter().enumerate().take(p + 1) {
                    // Entry (r+p, r+q) with q <= p.
                    band[r + p][BANDWIDTH - (p - q)] += l2 * sp * sq;
                }
            }
        }
        let mut factor = vec![[0.0; BANDWIDTH + 1]; n];
        for i in 0..n {
            for k in i.saturating_sub(BANDWIDTH)..=i {
                let mut s = band[i][BANDWIDTH + k - i];
                for j in i.saturating_sub(BANDWIDTH)..k {
                    // j >= k - BANDWIDTH holds since j >= i - BANDWIDTH.
                    s -= factor[i][BANDWIDTH + j - i] * factor[k][BANDWIDTH + j - k];
                }
                if k == i {
                    if s <= 0.0 {
                        return Err(Error::config("smoothness system is not positive definite"));
                    }
                    factor[i][BANDWIDTH] = s.sqrt();
                } else {
                    factor[i][BANDWIDTH + k - i] = s / factor[k][BANDWIDTH];
                }
            }
        }
        Ok(Self { lambda, factor })
    }

    pub fn len(&self) -> usize {
        self.factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Solves `(I + lambda^2 D^T D) y = b` in place.
    #[allow(clippy::needless_range_loop)] // band offsets read clearer as indices
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.factor.len();
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(BANDWIDTH)..i {
                s -= self.factor[i][BANDWIDTH + j - i] * b[j];
            }
            b[i] = s / self.factor[i][BANDWIDTH];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + BANDWIDTH + 1).min(n) {
                s -= self.factor[j][BANDWIDTH + i - j] * b[j];
            }
            b[i] = s / self.factor[i][BANDWIDTH];
        }
    }

    /// `x - (I + lambda^2 D^T D)^{-1} x`, evaluated as
    /// `(I + lambda^2 D^T D)^{-1} lambda^2 D^T D x` so affine inputs
    /// vanish up to roundoff in `D x` alone.
    pub fn detrend(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        assert_eq!(n, self.factor.len());
        let l2 = self.lambda * self.lambda;
        let dx: Vec<f64> = x.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
        let mut rhs = vec![0.0; n];
        for (r, d) in dx.iter().enumerate() {
            rhs[r] += l2 * d;
            rhs[r + 1] -= 2.0 * l2 * d;
            rhs[r + 2] += l2 * d;
        }
        self.solve_in_place(&mut rhs);
        rhs
    }
}

/// Removes slow drift with a second-order smoothness prior of weight
/// `lambda`; returns the residual `x - x_smooth`.
pub fn detrend(x: &Waveform, lambda: f64) -> Result<Waveform> {
    let prior = SmoothnessPrior::new(x.len(), lambda)?;
    x.with_samples(prior.detrend(x.samples()))
}
