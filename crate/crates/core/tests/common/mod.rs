//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use respira::eval::Split;
use respira::matrix::Matrix;

pub fn gini_direct(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let k = labels.iter().max().unwrap() + 1;
    let mut c = vec![0.0; k];
    labels.iter().for_each(|&l| c[l] += 1.0);
    let n = labels.len() as f64;
    1.0 - c.iter().map(|v| (v / n) * (v / n)).sum::<f64>()
}

pub fn split_gini(x: &Matrix, y: &[usize], f: usize, t: f64) -> f64 {
    let (l, r): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| x.get(i, f) <= t);
    let ly: Vec<usize> = l.iter().map(|&i| y[i]).collect();
    let ry: Vec<usize> = r.iter().map(|&i| y[i]).collect();
    let n = y.len() as f64;
    ly.len() as f64 / n * gini_direct(&ly) + ry.len() as f64 / n * gini_direct(&ry)
}

/// Lowest weighted impurity over every feature and every midpoint between
/// consecutive distinct values.
pub fn brute_force_split(x: &Matrix, y: &[usize]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in 0..x.cols() {
        let mut vals = x.column(f);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let g = split_gini(x, y, f, 0.5 * (w[0] + w[1]));
            best = Some(best.map_or(g, |b: f64| b.min(g)));
        }
    }
    best
}

/// Checks `best_split` against the exhaustive oracle.
pub fn split_agrees(x: &Matrix, y: &[usize]) -> Result<(), String> {
    let features: Vec<usize> = (0..x.cols()).collect();
    let got = respira::models::best_split(x, y, &features);
    match brute_force_split(x, y) {
        Some(g) if g < gini_direct(y) - 1e-12 => {
            let s = got.ok_or("no split returned although one improves impurity")?;
            if (s.weighted_gini - g).abs() > 1e-12 {
                return Err(format!("impurity {} vs exhaustive {}", s.weighted_gini, g));
            }
            let actual = split_gini(x, y, s.feature, s.threshold);
            if (actual - g).abs() > 1e-12 {
                return Err(format!("returned split achieves {actual}, not {g}"));
            }
            Ok(())
        }
        _ if got.is_some() => Err("split returned although none improves impurity".into()),
        _ => Ok(()),
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half.
pub fn concordance(scores: &[f64], positives: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &pi) in positives.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in positives.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Every instance is tested exactly once and each train side is the
/// complement of its test side.
pub fn partition_ok(splits: &[Split], n: usize) -> Result<(), String> {
    let mut seen = vec![0usize; n];
    for (f, s) in splits.iter().enumerate() {
        for &i in &s.test {
            if i >= n {
                return Err(format!("fold {f}: index {i} out of range"));
            }
            seen[i] += 1;
        }
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        if all != (0..n).collect::<Vec<_>>() {
            return Err(format!("fold {f}: train and test are not complementary"));
        }
    }
    match seen.iter().position(|&c| c != 1) {
        Some(i) => Err(format!("instance {i} tested {} times", seen[i])),
        None => Ok(()),
    }
}

/// Central-difference check of the analytic logreg gradient; returns the
/// worst relative error.
pub fn gradient_error(w: &Matrix, x: &Matrix, y: &[usize], l2: f64) -> f64 {
    use respira::models::logreg_loss_and_grad;
    let (_, grad) = logreg_loss_and_grad(w, x, y, l2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for c in 0..w.rows() {
        for j in 0..w.cols() {
            let mut plus = w.clone();
            plus.set(c, j, w.get(c, j) + h);
            let mut minus = w.clone();
            minus.set(c, j, w.get(c, j) - h);
            let fd = (logreg_loss_and_grad(&plus, x, y, l2).0 - logreg_loss_and_grad(&minus, x, y, l2).0) / (2.0 * h);
            let g = grad.get(c, j);
            worst = worst.max((g - fd).abs() / g.abs().max(1.0));
        }
    }
    worst
}

/// Worst violation of the box constraint and the equality constraint of the
/// SVM dual.
pub fn dual_violation(alphas: &[f64], y: &[f64], c: f64) -> (f64, f64) {
    let boxv = alphas
        .iter()
        .map(|&a| (-a).max(a - c).max(0.0))
        .fold(0.0, f64::max);
    let balance: f64 = alphas.iter().zip(y).map(|(a, y)| a * y).sum();
    (boxv, balance.abs())
}
