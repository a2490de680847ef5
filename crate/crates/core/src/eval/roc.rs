//! ROC curves by threshold sweep (one point per distinct score) and
//! trapezoidal AUC.

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` pairs from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score threshold at each point; the leading `(0, 0)` point has `+inf`,
    /// written as `null` in JSON.
    #[serde(with = "nonfinite_as_null")]
    pub thresholds: Vec<f64>,
    pub positive_class: usize,
}

impl RocCurve {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold,fpr,tpr")?;
        for (&t, &(fpr, tpr)) in self.thresholds.iter().zip(&self.points) {
            writeln!(w, "{t},{fpr},{tpr}")?;
        }
        Ok(())
    }
}

mod nonfinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

/// ROC curve for `scores` against `positives` (true = positive instance).
pub fn roc_curve(scores: &[f64], positives: &[bool], positive_class: usize) -> Result<RocCurve> {
    if scores.len() != positives.len() {
        return Err(EvalError::DimensionMismatch {
            expected: positives.len(),
            found: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    let p = positives.iter().filter(|&&b| b).count();
    let n = positives.len() - p;
    if p == 0 || n == 0 {
        return Err(EvalError::OneClassOnly(positive_class));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
        thresholds.push(s);
    }
    Ok(RocCurve {
        points,
        thresholds,
        positive_class,
    })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrRoc {
    pub curves: Vec<RocCurve>,
    pub aucs: Vec<f64>,
    pub macro_auc: f64,
}

/// One curve per class using that class's score column against the rest;
/// the macro AUC is the unweighted mean.
pub fn ovr_roc(class_scores: &Matrix, labels: &[usize]) -> Result<OvrRoc> {
    if class_scores.rows() != labels.len() {
        return Err(EvalError::DimensionMismatch {
            expected: labels.len(),
            found: class_scores.rows(),
        });
    }
    let k = class_scores.cols();
    let mut curves = Vec::with_capacity(k);
    for c in 0..k {
        let positives: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        curves.push(roc_curve(&class_scores.column(c), &positives, c)?);
    }
    let aucs: Vec<f64> = curves.iter().map(auc).collect();
    let macro_auc = aucs.iter().sum::<f64>() / k as f64;
    Ok(OvrRoc {
        curves,
        aucs,
        macro_auc,
    })
}
