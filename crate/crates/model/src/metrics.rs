use crate::error::{ModelError, Result};

/// Matthews correlation coefficient, multiclass covariance form. Returns the
/// value and whether the denominator was degenerate (value forced to 0).
pub fn mcc(preds: &[usize], labels: &[usize]) -> Result<(f64, bool)> {
    if preds.len() != labels.len() {
        return Err(ModelError::Config(format!(
            "mcc: {} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(ModelError::Config("mcc: empty input".into()));
    }
    let k = preds.iter().chain(labels).max().unwrap() + 1;
    let mut confusion = vec![0f64; k * k];
    for (&p, &l) in preds.iter().zip(labels) {
        confusion[l * k + p] += 1.0;
    }
    let s: f64 = preds.len() as f64;
    let c: f64 = (0..k).map(|i| confusion[i * k + i]).sum();
    let t: Vec<f64> = (0..k).map(|i| (0..k).map(|j| confusion[i * k + j]).sum()).collect();
    let p: Vec<f64> = (0..k).map(|j| (0..k).map(|i| confusion[i * k + j]).sum()).collect();
    let tp_dot: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
    let t2: f64 = t.iter().map(|v| v * v).sum();
    let p2: f64 = p.iter().map(|v| v * v).sum();
    let denom = ((s * s - p2) * (s * s - t2)).sqrt();
    if denom == 0.0 {
        return Ok((0.0, true));
    }
    Ok(((c * s - tp_dot) / denom, false))
}

/// Confusion matrix (rows: true label, cols: prediction).
pub fn confusion_matrix(preds: &[usize], labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; k]; k];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    m
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    let correct = preds.iter().zip(labels).filter(|(a, b)| a == b).count();
    correct as f64 / preds.len() as f64
}
