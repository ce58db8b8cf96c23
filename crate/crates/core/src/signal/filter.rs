use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;

use super::{Band, Waveform};

/// Transfer function coefficients with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IirCoeffs {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl IirCoeffs {
    pub fn order(&self) -> usize {
        self.a.len().max(self.b.len()) - 1
    }

    /// Magnitude response at `freq` Hz for sample rate `fs`.
    pub fn gain(&self, freq: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq / fs;
        let eval = |c: &[f64]| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, v) in c.iter().enumerate() {
                re += v * (w * k as f64).cos();
                im -= v * (w * k as f64).sin();
            }
            (re, im)
        };
        let (br, bi) = eval(&self.b);
        let (ar, ai) = eval(&self.a);
        ((br * br + bi * bi) / (ar * ar + ai * ai)).sqrt()
    }
}

/// First-order Butterworth band-pass via the bilinear transform with
/// pre-warped edges. The band transform doubles the order, so the result
/// is a biquad with `b = [g, 0, -g]`.
pub fn butter_bandpass(band: &Band, fs: f64) -> Result<IirCoeffs> {
    band.validate()?;
    let nyquist = 0.5 * fs;
    if band.hi >= nyquist {
        return Err(Error::config(format!(
            "band upper edge {} Hz must be below Nyquist {} Hz",
            band.hi, nyquist
        )));
    }
    let k = 2.0 * fs;
    let w_lo = k * (PI * band.lo / fs).tan();
    let w_hi = k * (PI * band.hi / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;
    // H(s) = bw s / (s^2 + bw s + w0^2), s = k (z - 1) / (z + 1).
    let a0 = k * k + bw * k + w0_sq;
    let g = bw * k / a0;
    Ok(IirCoeffs {
        b: vec![g, 0.0, -g],
        a: vec![1.0, 2.0 * (w0_sq - k * k) / a0, (k * k - bw * k + w0_sq) / a0],
    })
}

/// Direct-form II transposed filter with optional initial state.
pub fn lfilter(coeffs: &IirCoeffs, x: &[f64], zi: Option<&[f64]>) -> Vec<f64> {
    let n = coeffs.order() + 1;
    let mut b = coeffs.b.clone();
    let mut a = coeffs.a.clone();
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    let a0 = a[0];
    for v in b.iter_mut().chain(a.iter_mut()) {
        *v /= a0;
    }
    let mut z = vec![0.0; n];
    if let Some(zi) = zi {
        z[..n - 1].copy_from_slice(zi);
    }
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = b[0] * xi + z[0];
        for k in 1..n {
            z[k - 1] = b[k] * xi - a[k] * yi + z[k];
        }
        y.push(yi);
    }
    y
}

/// Initial state giving the steady-state response to a unit step.
pub fn lfilter_zi(coeffs: &IirCoeffs) -> Vec<f64> {
    let n = coeffs.order() + 1;
    let mut b = coeffs.b.clone();
    let mut a = coeffs.a.clone();
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    let a0 = a[0];
    for v in b.iter_mut().chain(a.iter_mut()) {
        *v /= a0;
    }
    let m = n - 1;
    if m == 0 {
        return Vec::new();
    }
    // (I - C^T) zi = b[1:] - a[1:] b[0], C the companion matrix of a.
    let mut lhs = vec![0.0; m * m];
    for i in 0..m {
        lhs[i * m + i] = 1.0;
        lhs[i * m] += a[i + 1];
        if i + 1 < m {
            lhs[i * m + i + 1] -= 1.0;
        }
    }
    let rhs: Vec<f64> = (0..m).map(|i| b[i + 1] - a[i + 1] * b[0]).collect();
    solve_dense(m, &lhs, &rhs).expect("stable filter has a steady state")
}

/// Forward-backward filtering with odd-reflection padding of `padlen`
/// samples per side and steady-state initial conditions.
pub fn filtfilt(coeffs: &IirCoeffs, x: &[f64], padlen: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= padlen {
        return Err(Error::InsufficientData(format!(
            "filtfilt needs more than {padlen} samples, got {n}"
        )));
    }
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    let (first, last) = (x[0], x[n - 1]);
    ext.extend((1..=padlen).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=padlen).map(|i| 2.0 * last - x[n - 1 - i]));

    let zi = lfilter_zi(coeffs);
    let scaled = |s: f64| zi.iter().map(|z| z * s).collect::<Vec<_>>();
    let forward = lfilter(coeffs, &ext, Some(&scaled(ext[0])));
    let mut rev: Vec<f64> = forward.into_iter().rev().collect();
    let start = rev[0];
    rev = lfilter(coeffs, &rev, Some(&scaled(start)));
    rev.reverse();
    Ok(rev[padlen..padlen + n].to_vec())
}

/// Zero-phase first-order Butterworth band-pass.
pub fn butter_bandpass_filtfilt(x: &Waveform, band: &Band) -> Result<Waveform> {
    let coeffs = butter_bandpass(band, x.fs())?;
    let padlen = 3 * (coeffs.a.len().max(coeffs.b.len()) - 1);
    let y = filtfilt(&coeffs, x.samples(), padlen)?;
    x.with_samples(y)
}
