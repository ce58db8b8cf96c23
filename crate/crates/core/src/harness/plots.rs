//! Plot data for rate histograms, per-fold error boxes and split
//! membership, with minimal SVG renderings.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::roi::percentile;

use super::eval::EvalReport;
use super::protocol::Split;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Bins of width `bin` starting at a multiple of `bin`; the last bin is
/// closed on the right.
pub fn histogram(values: &[f64], bin: f64) -> Histogram {
    assert!(bin > 0.0, "bin width must be positive");
    if values.is_empty() {
        return Histogram {
            edges: vec![],
            counts: vec![],
        };
    }
    let lo = (values.iter().cloned().fold(f64::INFINITY, f64::min) / bin).floor() * bin;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bins = (((hi - lo) / bin).floor() as usize + 1).max(1);
    let mut counts = vec![0; bins];
    for v in values {
        counts[(((v - lo) / bin).floor() as usize).min(bins - 1)] += 1;
    }
    Histogram {
        edges: (0..=bins).map(|i| lo + i as f64 * bin).collect(),
        counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            min: percentile(values, 0.0),
            q1: percentile(values, 0.25),
            median: percentile(values, 0.5),
            q3: percentile(values, 0.75),
            max: percentile(values, 1.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldBox {
    pub fold_index: usize,
    /// Over the absolute errors of the fold's subject means.
    pub abs_error: Option<BoxStats>,
}

pub fn fold_error_boxes(report: &EvalReport) -> Vec<FoldBox> {
    report
        .folds
        .iter()
        .map(|f| {
            let errors: Vec<f64> = f.subjects.iter().map(|s| (s.pred_bpm - s.truth_bpm).abs()).collect();
            FoldBox {
                fold_index: f.fold.fold_index,
                abs_error: BoxStats::of(&errors),
            }
        })
        .collect()
}

/// How often each subject index lands in each role across the splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDistribution {
    pub splits: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_distribution(n: usize, splits: &[Split]) -> SplitDistribution {
    let mut d = SplitDistribution {
        splits: splits.len(),
        train: vec![0; n],
        val: vec![0; n],
        test: vec![0; n],
    };
    for s in splits {
        s.train.iter().for_each(|&i| d.train[i] += 1);
        s.val.iter().for_each(|&i| d.val[i] += 1);
        s.test.iter().for_each(|&i| d.test[i] += 1);
    }
    d
}

const W: f64 = 480.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = write!(
        s,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(s: &mut String, x: f64, y: f64, text: &str) {
    let _ = write!(
        s,
        r#"<text x="{x:.1}" y="{y:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
        escape(text)
    );
}

fn bars(title: &str, labels: &[String], values: &[f64]) -> String {
    let mut s = svg_open(title);
    let top = values.iter().cloned().fold(0.0, f64::max).max(1e-12);
    let slot = (W - 2.0 * PAD) / values.len().max(1) as f64;
    for (i, (&v, l)) in values.iter().zip(labels).enumerate() {
        let h = v / top * (H - 2.0 * PAD - 10.0);
        let x = PAD + i as f64 * slot;
        let _ = write!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#4a7ab5"/>"##,
            x + 0.1 * slot,
            H - PAD - h,
            0.8 * slot
        );
        label(&mut s, x + 0.5 * slot, H - PAD + 14.0, l);
    }
    s.push_str("</svg>\n");
    s
}

pub fn histogram_svg(h: &Histogram, title: &str) -> String {
    let labels: Vec<String> = h.edges.iter().take(h.counts.len()).map(|e| format!("{e:.0}")).collect();
    let values: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    bars(title, &labels, &values)
}

pub fn split_distribution_svg(d: &SplitDistribution, title: &str) -> String {
    let labels: Vec<String> = (0..d.test.len()).map(|i| i.to_string()).collect();
    let values: Vec<f64> = d.test.iter().map(|&c| c as f64).collect();
    bars(title, &labels, &values)
}

pub fn fold_boxes_svg(boxes: &[FoldBox], title: &str) -> String {
    let mut s = svg_open(title);
    let top = boxes
        .iter()
        .filter_map(|b| b.abs_error.map(|e| e.max))
        .fold(0.0, f64::max)
        .max(1e-12);
    let y = |v: f64| H - PAD - v / top * (H - 2.0 * PAD - 10.0);
    let slot = (W - 2.0 * PAD) / boxes.len().max(1) as f64;
    for (i, b) in boxes.iter().enumerate() {
        let cx = PAD + (i as f64 + 0.5) * slot;
        label(&mut s, cx, H - PAD + 14.0, &format!("fold {}", b.fold_index));
        let Some(e) = b.abs_error else { continue };
        let half = 0.25 * slot;
        let _ = write!(
            s,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            y(e.min),
            y(e.max)
        );
        let _ = write!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#cfdcee" stroke="black"/>"##,
            cx - half,
            y(e.q3),
            2.0 * half,
            (y(e.q1) - y(e.q3)).max(0.5)
        );
        let _ = write!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(e.median),
            cx + half,
            y(e.median)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let h = histogram(&[18.0, 19.5, 21.0, 24.0], 2.0);
        assert_eq!(h.edges, vec![18.0, 20.0, 22.0, 24.0, 26.0]);
        assert_eq!(h.counts, vec![2, 1, 0, 1]);
        assert!(histogram_svg(&h, "rates").starts_with("<svg"));
    }

    #[test]
    fn box_quartiles() {
        let b = BoxStats::of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert!(BoxStats::of(&[]).is_none());
    }

    #[test]
    fn split_membership_counts() {
        let splits = super::super::protocol::enumerate_splits(8, 3, 1).unwrap();
        let d = split_distribution(8, &splits);
        assert_eq!(d.splits, 168);
        // Each subject is outside the development group in C(7,3) = 35
        // groups, times 3 validation choices.
        assert!(d.test.iter().all(|&c| c == 105));
        assert_eq!(d.val.iter().sum::<usize>(), 168);
    }
}
