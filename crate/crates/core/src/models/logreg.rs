//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Minimizes mean cross-entropy plus `(λ/2)·‖W‖²` over the non-bias weights.
//! Inputs are expected to be standardized by the caller.

use serde::{Deserialize, Serialize};

use super::{argmax_lowest, check_training_data, ModelError, Prediction, Result};
use crate::matrix::Matrix;
use wide::f64x4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub loss_tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            l2_lambda: 1e-4,
            max_iters: 1000,
            loss_tol: 1e-6,
        }
    }
}

impl LogRegParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparameter(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad("l2_lambda must be >= 0");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if !(self.loss_tol > 0.0) {
            return bad("loss_tol must be > 0");
        }
        Ok(())
    }
}

/// `weights` is `n_classes × (d + 1)`; the last column is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Matrix,
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: f64,
    pub params: LogRegParams,
}

impl LogisticModel {
    pub fn n_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.weights.cols() - 1
    }
}

/// Numerically stable softmax (the maximum is subtracted first).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a·x`, in blocks of four.
#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    let mut cy = y.chunks_exact_mut(4);
    let mut cx = x.chunks_exact(4);
    for (yb, xb) in (&mut cy).zip(&mut cx) {
        for l in 0..4 {
            yb[l] += a * xb[l];
        }
    }
    for (yi, &xi) in cy.into_remainder().iter_mut().zip(cx.remainder()) {
        *yi += a * xi;
    }
}

const BLOCK: usize = 4;

fn lanes(v: &[f64]) -> f64x4 {
    f64x4::from(<[f64; BLOCK]>::try_from(v).expect("block"))
}

/// `z[c·n + i] = bias_c + Σ_j w_cj · xt[j·n + i]` for all `K` classes at once,
/// holding a block of instances in registers while sweeping the features.
fn blocked_logits<const K: usize>(xt: &[f64], n: usize, d: usize, weights: &Matrix, z: &mut [f64]) {
    let wt: Vec<[f64x4; K]> = (0..=d).map(|j| std::array::from_fn(|c| f64x4::splat(weights.get(c, j)))).collect();
    let bias = wt[d];
    let full = n - n % BLOCK;
    for i in (0..full).step_by(BLOCK) {
        let mut acc = bias;
        for (col, w) in xt.chunks_exact(n).zip(&wt[..d]) {
            let x = lanes(&col[i..i + BLOCK]);
            for c in 0..K {
                acc[c] += w[c] * x;
            }
        }
        for c in 0..K {
            z[c * n + i..c * n + i + BLOCK].copy_from_slice(&acc[c].to_array());
        }
    }
    for i in full..n {
        for c in 0..K {
            let w = |j: usize| weights.get(c, j);
            z[c * n + i] = w(d) + (0..d).map(|j| w(j) * xt[j * n + i]).sum::<f64>();
        }
    }
}

/// `grad[c][j] = Σ_i z[c·n + i] · xt[j·n + i]`, reading each feature column
/// once for all `K` classes.
fn fused_dots<const K: usize>(xt: &[f64], n: usize, d: usize, z: &[f64], grad: &mut Matrix) {
    let zc: [&[f64]; K] = std::array::from_fn(|c| &z[c * n..(c + 1) * n]);
    let full = n - n % BLOCK;
    for (j, xj) in xt.chunks_exact(n).take(d).enumerate() {
        let mut acc = [f64x4::ZERO; K];
        for (i, x) in xj[..full].chunks_exact(BLOCK).enumerate() {
            let x = lanes(x);
            for c in 0..K {
                acc[c] += lanes(&zc[c][i * BLOCK..(i + 1) * BLOCK]) * x;
            }
        }
        for c in 0..K {
            let tail: f64 = (full..n).map(|i| zc[c][i] * xj[i]).sum();
            let a = acc[c].to_array();
            grad.set(c, j, (a[0] + a[1]) + (a[2] + a[3]) + tail);
        }
    }
}

#[inline]
fn logits(weights: &Matrix, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (c, z) in out.iter_mut().enumerate() {
        let w = weights.row(c);
        *z = w[d] + dot(&w[..d], x);
    }
}

/// Regularized mean cross-entropy and its gradient with respect to
/// `weights` (same shape).
pub fn logreg_loss_and_grad(weights: &Matrix, x: &Matrix, y: &[usize], l2_lambda: f64) -> (f64, Matrix) {
    let mut ws = Workspace::new(x, weights.rows());
    ws.loss_and_grad(weights, y, l2_lambda)
}

/// Feature-major copy of the training matrix plus per-class scratch rows,
/// so every inner loop runs over contiguous instances.
struct Workspace {
    n: usize,
    d: usize,
    /// `xt[j * n + i]` is feature `j` of instance `i`.
    xt: Vec<f64>,
    /// `z[c * n + i]`: logits, then probabilities minus targets.
    z: Vec<f64>,
    m: Vec<f64>,
    s: Vec<f64>,
}

impl Workspace {
    fn new(x: &Matrix, k: usize) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut xt = vec![0.0; n * d];
        for i in 0..n {
            for (j, &v) in x.row(i).iter().enumerate() {
                xt[j * n + i] = v;
            }
        }
        Workspace {
            n,
            d,
            xt,
            z: vec![0.0; k * n],
            m: vec![0.0; n],
            s: vec![0.0; n],
        }
    }

    fn loss_and_grad(&mut self, weights: &Matrix, y: &[usize], l2_lambda: f64) -> (f64, Matrix) {
        let (n, d) = (self.n, self.d);
        let k = weights.rows();
        match k {
            2 => blocked_logits::<2>(&self.xt, n, d, weights, &mut self.z),
            3 => blocked_logits::<3>(&self.xt, n, d, weights, &mut self.z),
            _ => {
                for c in 0..k {
                    self.z[c * n..(c + 1) * n].fill(weights.get(c, d));
                }
                for j in 0..d {
                    let xj = &self.xt[j * n..(j + 1) * n];
                    for c in 0..k {
                        axpy(weights.get(c, j), xj, &mut self.z[c * n..(c + 1) * n]);
                    }
                }
            }
        }

        // Row maxima, then exponentiated shifted logits and their row sums.
        let (m, sums) = (&mut self.m, &mut self.s);
        m.copy_from_slice(&self.z[..n]);
        for c in 1..k {
            for (mi, &zi) in m.iter_mut().zip(&self.z[c * n..(c + 1) * n]) {
                *mi = mi.max(zi);
            }
        }
        // -log p_y = log Σ exp(z - m) - (z_y - m)
        let mut loss = 0.0;
        for (i, &label) in y.iter().enumerate() {
            loss -= self.z[label * n + i] - m[i];
        }
        sums.fill(0.0);
        for c in 0..k {
            for ((zi, &mi), si) in self.z[c * n..(c + 1) * n].iter_mut().zip(m.iter()).zip(sums.iter_mut()) {
                let t = *zi - mi;
                // the row maximum needs no exp call
                *zi = if t == 0.0 { 1.0 } else { t.exp() };
                *si += *zi;
            }
        }
        // Σ ln s_i taken as ln of running products; every s_i lies in [1, k]
        let mut prod = 1.0;
        for &si in sums.iter() {
            prod *= si;
            if prod > 1e200 {
                loss += prod.ln();
                prod = 1.0;
            }
        }
        loss += prod.ln();
        for c in 0..k {
            for (zi, &si) in self.z[c * n..(c + 1) * n].iter_mut().zip(sums.iter()) {
                *zi /= si;
            }
        }
        for (i, &label) in y.iter().enumerate() {
            self.z[label * n + i] -= 1.0;
        }

        let inv_n = 1.0 / n as f64;
        let mut grad = Matrix::zeros(k, d + 1);
        match k {
            2 => fused_dots::<2>(&self.xt, n, d, &self.z, &mut grad),
            3 => fused_dots::<3>(&self.xt, n, d, &self.z, &mut grad),
            _ => {
                for j in 0..d {
                    let xj = &self.xt[j * n..(j + 1) * n];
                    for c in 0..k {
                        grad.set(c, j, dot(&self.z[c * n..(c + 1) * n], xj));
                    }
                }
            }
        }
        let mut penalty = 0.0;
        for c in 0..k {
            let w = weights.row(c);
            let bias = self.z[c * n..(c + 1) * n].iter().sum::<f64>();
            let g = grad.row_mut(c);
            for j in 0..d {
                g[j] = g[j] * inv_n + l2_lambda * w[j];
                penalty += w[j] * w[j];
            }
            g[d] = bias * inv_n;
        }
        (loss * inv_n + 0.5 * l2_lambda * penalty, grad)
    }
}

pub fn train_logreg(x: &Matrix, y: &[usize], n_classes: usize, params: &LogRegParams) -> Result<LogisticModel> {
    params.validate()?;
    check_training_data(x, y, n_classes)?;
    if x.rows() == 0 {
        return Err(ModelError::TooFewRows { needed: 1, found: 0 });
    }
    let d = x.cols();
    let mut weights = Matrix::zeros(n_classes, d + 1);
    let mut ws = Workspace::new(x, n_classes);
    let mut prev: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut loss = f64::NAN;
    for it in 0..params.max_iters {
        let (l, grad) = ws.loss_and_grad(&weights, y, params.l2_lambda);
        if !l.is_finite() {
            return Err(ModelError::NonFiniteLoss(it));
        }
        loss = l;
        iterations = it;
        if prev.is_some_and(|p| (p - l).abs() < params.loss_tol) {
            converged = true;
            break;
        }
        prev = Some(l);
        for c in 0..n_classes {
            let g = grad.row(c);
            for (w, gj) in weights.row_mut(c).iter_mut().zip(g) {
                *w -= params.learning_rate * gj;
            }
        }
        iterations = it + 1;
    }
    if weights.as_slice().iter().any(|w| !w.is_finite()) {
        return Err(ModelError::NonFiniteLoss(iterations));
    }
    Ok(LogisticModel {
        weights,
        converged,
        iterations,
        final_loss: loss,
        params: params.clone(),
    })
}

pub fn predict_logreg(model: &LogisticModel, x: &[f64]) -> Result<Prediction> {
    if x.len() != model.feature_count() {
        return Err(ModelError::DimensionMismatch {
            expected: model.feature_count(),
            found: x.len(),
        });
    }
    let mut z = vec![0.0; model.n_classes()];
    logits(&model.weights, x, &mut z);
    let scores = softmax(&z);
    Ok(Prediction {
        label: argmax_lowest(&scores),
        scores,
    })
}
