use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mae: f64,
    pub rmse: f64,
    /// Absent for fewer than two points or a constant input.
    pub pearson: Option<f64>,
}

pub fn eval_stats(pred: &[f64], truth: &[f64]) -> Result<EvalStats> {
    if pred.len() != truth.len() {
        return Err(Error::format(format!(
            "prediction has {} values, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("no rate pairs to evaluate".into()));
    }
    let n = pred.len() as f64;
    let mae = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    Ok(EvalStats {
        mae,
        rmse: mse.sqrt(),
        pearson: pearson(pred, truth),
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        let t = [20.0, 25.0, 31.0];
        let s = eval_stats(&t, &t).unwrap();
        assert_eq!((s.mae, s.rmse), (0.0, 0.0));
        assert!((s.pearson.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset() {
        let t = [20.0, 25.0, 31.0];
        let p: Vec<f64> = t.iter().map(|v| v + 2.0).collect();
        let s = eval_stats(&p, &t).unwrap();
        assert!((s.mae - 2.0).abs() < 1e-12);
        assert!((s.rmse - 2.0).abs() < 1e-12);
        assert!((s.pearson.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anti_correlated_and_constant() {
        let t = [1.0, 2.0, 4.0];
        let p = [-1.0, -2.0, -4.0];
        assert!((eval_stats(&p, &t).unwrap().pearson.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(eval_stats(&[3.0, 3.0], &[1.0, 2.0]).unwrap().pearson, None);
        assert_eq!(eval_stats(&[3.0], &[1.0]).unwrap().pearson, None);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(eval_stats(&[1.0], &[1.0, 2.0]), Err(Error::Format(_))));
    }
}
