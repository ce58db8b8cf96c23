use crate::error::{Error, Result};
use crate::roi::percentile_sorted;

use super::{Band, PeakList, Waveform};

/// Minimum prominence as a fraction of the signal's interquartile range.
pub const PROMINENCE_FRACTION: f64 = 0.3;

/// Strict local maxima; flat tops report their (lower) middle sample.
pub fn find_local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    if x.len() < 3 {
        return peaks;
    }
    let last = x.len() - 1;
    let mut i = 1;
    while i < last {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < last && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

/// Height of each peak above the higher of its two bases, where a base
/// is the minimum between the peak and the nearest higher sample (or the
/// signal edge) on that side.
pub fn peak_prominences(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    peaks
        .iter()
        .map(|&p| {
            let h = x[p];
            let mut left_min = h;
            for &v in x[..p].iter().rev() {
                if v > h {
                    break;
                }
                left_min = left_min.min(v);
            }
            let mut right_min = h;
            for &v in &x[p + 1..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            h - left_min.max(right_min)
        })
        .collect()
}

/// Keeps the tallest peaks such that no two are closer than `distance`
/// samples.
fn select_by_distance(x: &[f64], peaks: &[usize], distance: usize) -> Vec<usize> {
    if distance <= 1 {
        return peaks.to_vec();
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for &i in &order {
        if !keep[i] {
            continue;
        }
        let mut j = i;
        while j > 0 && peaks[i] - peaks[j - 1] < distance {
            j -= 1;
            keep[j] = false;
        }
        let mut j = i + 1;
        while j < peaks.len() && peaks[j] - peaks[i] < distance {
            keep[j] = false;
            j += 1;
        }
    }
    peaks
        .iter()
        .zip(keep)
        .filter_map(|(&p, k)| k.then_some(p))
        .collect()
}

/// Respiration peaks: local maxima at least `fs / band.hi` samples apart
/// with prominence of at least [`PROMINENCE_FRACTION`] times the
/// interquartile range.
pub fn detect_peaks(x: &Waveform, band: &Band) -> Result<PeakList> {
    band.validate()?;
    let s = x.samples();
    let distance = (x.fs() / band.hi).ceil().max(1.0) as usize;
    let candidates = select_by_distance(s, &find_local_maxima(s), distance);
    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = percentile_sorted(&sorted, 0.75) - percentile_sorted(&sorted, 0.25);
    let threshold = PROMINENCE_FRACTION * iqr;
    let prominences = peak_prominences(s, &candidates);
    let peaks: Vec<f64> = candidates
        .iter()
        .zip(prominences)
        .filter(|(_, p)| *p > 0.0 && *p >= threshold)
        .map(|(&i, _)| i as f64 / x.fs())
        .collect();
    if peaks.is_empty() {
        return Err(Error::NoRate("no peaks in waveform".into()));
    }
    PeakList::new(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_maxima_with_plateaus() {
        let x = [0.0, 1.0, 0.0, 2.0, 2.0, 2.0, 1.0, 3.0, 3.0, 4.0];
        assert_eq!(find_local_maxima(&x), vec![1, 4]);
        assert!(find_local_maxima(&[1.0; 10]).is_empty());
    }

    #[test]
    fn prominence_reference_values() {
        let x = [0.0, 3.0, 1.0, 2.0, 0.5, 4.0, 0.0];
        let peaks = find_local_maxima(&x);
        assert_eq!(peaks, vec![1, 3, 5]);
        assert_eq!(peak_prominences(&x, &peaks), vec![2.5, 1.0, 4.0]);
    }

    #[test]
    fn distance_keeps_tallest() {
        let x = [0.0, 1.0, 0.0, 3.0, 0.0, 2.0, 0.0];
        assert_eq!(select_by_distance(&x, &[1, 3, 5], 3), vec![3]);
        assert_eq!(select_by_distance(&x, &[1, 3, 5], 2), vec![1, 3, 5]);
    }

    #[test]
    fn constant_signal_has_no_rate() {
        let w = Waveform::new(vec![2.0; 100], 10.0).unwrap();
        assert!(matches!(detect_peaks(&w, &Band::default()), Err(Error::NoRate(_))));
    }

    #[test]
    fn sinusoid_peaks() {
        let fs = 10.0;
        let x: Vec<f64> = (0..600)
            .map(|n| (2.0 * std::f64::consts::PI * 0.5 * n as f64 / fs).sin())
            .collect();
        let p = detect_peaks(&Waveform::new(x, fs).unwrap(), &Band::default()).unwrap();
        assert_eq!(p.len(), 30);
        for w in p.timestamps().windows(2) {
            assert!((w[1] - w[0] - 2.0).abs() < 0.11);
        }
    }
}
