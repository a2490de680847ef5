//! RBF-kernel SVM trained with simplified SMO, extended to multiclass by
//! one-vs-rest.
//!
//! The solver sweeps the training set, and for each example violating the KKT
//! conditions (within `smo_tol`) it picks a partner uniformly at random and
//! optimizes the pair analytically. It stops after `max_passes` consecutive
//! sweeps without an update, or after `MAX_SWEEPS` sweeps in total; in the
//! latter case the model is still returned and `converged` is false.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, check_training_data, ModelError, Prediction, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::rng::{derive_seed, rng_from_seed};

/// Hard cap on full sweeps over the data per binary problem.
pub const MAX_SWEEPS: usize = 10_000;

/// Alpha updates smaller than this count as no progress.
const MIN_ALPHA_STEP: f64 = 1e-5;

/// Above this many rows the Gram matrix is not cached.
const GRAM_CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Named(GammaRule),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaRule {
    /// `1 / (d · mean per-feature population variance)`.
    Scale,
}

impl Gamma {
    pub const SCALE: Gamma = Gamma::Named(GammaRule::Scale);

    pub fn resolve(self, x: &Matrix) -> f64 {
        match self {
            Gamma::Value(g) => g,
            Gamma::Named(GammaRule::Scale) => {
                let (n, d) = (x.rows(), x.cols());
                if d == 0 {
                    return 1.0;
                }
                let mut mean_var = 0.0;
                for j in 0..d {
                    let col = x.column(j);
                    let m = col.iter().sum::<f64>() / n as f64;
                    mean_var += col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                }
                mean_var /= d as f64;
                if mean_var < 1e-12 {
                    1.0 / d as f64
                } else {
                    1.0 / (d as f64 * mean_var)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub smo_tol: f64,
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: Gamma::SCALE,
            smo_tol: 1e-3,
            max_passes: 10,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparameter(m.into()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be > 0");
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad("gamma must be > 0");
            }
        }
        if !(self.smo_tol > 0.0) {
            return bad("smo_tol must be > 0");
        }
        if self.max_passes == 0 {
            return bad("max_passes must be >= 1");
        }
        Ok(())
    }
}

pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(ModelError::DimensionMismatch {
            expected: x.len(),
            found: z.len(),
        });
    }
    Ok((-gamma * sq_dist(x, z)).exp())
}

/// Binary RBF SVM. `coef[i] = α_i·y_i` for the stored support vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Matrix,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// Full dual vector over the training rows (for auditing).
    pub alphas: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

pub fn svm_decision(svm: &BinarySvm, x: &[f64]) -> Result<f64> {
    if x.len() != svm.support_vectors.cols() {
        return Err(ModelError::DimensionMismatch {
            expected: svm.support_vectors.cols(),
            found: x.len(),
        });
    }
    let s: f64 = svm
        .support_vectors
        .iter_rows()
        .zip(&svm.coef)
        .map(|(sv, &a)| a * (-svm.gamma * sq_dist(sv, x)).exp())
        .sum();
    Ok(s + svm.bias)
}

enum Kernel<'a> {
    Cached { gram: Vec<f64>, n: usize },
    OnTheFly { x: &'a Matrix, gamma: f64 },
}

impl Kernel<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        match self {
            Kernel::Cached { gram, n } => gram[i * n + j],
            Kernel::OnTheFly { x, gamma } => (-gamma * sq_dist(x.row(i), x.row(j))).exp(),
        }
    }
}

/// Trains on labels in {-1, +1}. `gamma` must already be resolved.
pub fn smo_train_binary(x: &Matrix, y: &[f64], gamma: f64, params: &SvmParams) -> Result<BinarySvm> {
    params.validate()?;
    let n = x.rows();
    if y.len() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(ModelError::Format("binary SVM labels must be -1 or +1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(ModelError::SingleClassTraining);
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ModelError::InvalidHyperparameter("gamma must be > 0".into()));
    }

    let kernel = if n <= GRAM_CACHE_LIMIT {
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = 1.0;
            for j in 0..i {
                let k = (-gamma * sq_dist(x.row(i), x.row(j))).exp();
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        Kernel::Cached { gram, n }
    } else {
        Kernel::OnTheFly { x, gamma }
    };

    let c = params.c;
    let tol = params.smo_tol;
    let mut rng = rng_from_seed(params.seed);
    let mut alpha = vec![0.0; n];
    let mut b = 0.0;
    // f_no_bias[i] = Σ_j α_j y_j K(x_j, x_i)
    let mut f_no_bias = vec![0.0; n];
    let mut passes = 0;
    let mut sweeps = 0;

    while passes < params.max_passes && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            let e_i = f_no_bias[i] + b - y[i];
            let r_i = y[i] * e_i;
            if !((r_i < -tol && alpha[i] < c) || (r_i > tol && alpha[i] > 0.0)) {
                continue;
            }
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let e_j = f_no_bias[j] + b - y[j];
            let (ai_old, aj_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if y[i] != y[j] {
                ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
            } else {
                ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
            };
            if lo >= hi {
                continue;
            }
            let (k_ii, k_jj, k_ij) = (kernel.at(i, i), kernel.at(j, j), kernel.at(i, j));
            let eta = 2.0 * k_ij - k_ii - k_jj;
            if eta >= 0.0 {
                continue;
            }
            let aj = (aj_old - y[j] * (e_i - e_j) / eta).clamp(lo, hi);
            if (aj - aj_old).abs() < MIN_ALPHA_STEP {
                continue;
            }
            let ai = (ai_old + y[i] * y[j] * (aj_old - aj)).clamp(0.0, c);
            let (di, dj) = (ai - ai_old, aj - aj_old);
            alpha[i] = ai;
            alpha[j] = aj;

            let b1 = b - e_i - y[i] * di * k_ii - y[j] * dj * k_ij;
            let b2 = b - e_j - y[i] * di * k_ij - y[j] * dj * k_jj;
            b = if ai > 0.0 && ai < c {
                b1
            } else if aj > 0.0 && aj < c {
                b2
            } else {
                0.5 * (b1 + b2)
            };

            let (ci, cj) = (y[i] * di, y[j] * dj);
            for (t, f) in f_no_bias.iter_mut().enumerate() {
                *f += ci * kernel.at(i, t) + cj * kernel.at(j, t);
            }
            changed += 1;
        }
        passes = if changed == 0 { passes + 1 } else { 0 };
    }

    let sv: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    Ok(BinarySvm {
        support_vectors: x.select_rows(&sv),
        coef: sv.iter().map(|&i| alpha[i] * y[i]).collect(),
        bias: b,
        gamma,
        alphas: alpha,
        sweeps,
        converged: passes >= params.max_passes,
    })
}

/// One binary SVM per class (that class against the rest), in class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvmModel {
    pub machines: Vec<BinarySvm>,
    pub feature_count: usize,
    pub gamma: f64,
    pub params: SvmParams,
}

impl MulticlassSvmModel {
    pub fn n_classes(&self) -> usize {
        self.machines.len()
    }
}

/// Binary problem `k` is solved with seed `derive_seed(params.seed, k)`.
pub fn train_ovr_svm(x: &Matrix, y: &[usize], n_classes: usize, params: &SvmParams) -> Result<MulticlassSvmModel> {
    params.validate()?;
    check_training_data(x, y, n_classes)?;
    if x.rows() < 2 {
        return Err(ModelError::TooFewRows {
            needed: 2,
            found: x.rows(),
        });
    }
    let present: Vec<bool> = (0..n_classes).map(|k| y.contains(&k)).collect();
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(ModelError::SingleClassTraining);
    }
    if let Some(k) = present.iter().position(|&p| !p) {
        return Err(ModelError::MissingClass(k));
    }
    let gamma = params.gamma.resolve(x);
    let machines = (0..n_classes)
        .map(|k| {
            let yk: Vec<f64> = y.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            let p = SvmParams {
                seed: derive_seed(params.seed, k as u64),
                ..params.clone()
            };
            smo_train_binary(x, &yk, gamma, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassSvmModel {
        machines,
        feature_count: x.cols(),
        gamma,
        params: params.clone(),
    })
}

/// Scores are the per-class decision values.
pub fn predict_ovr_svm(model: &MulticlassSvmModel, x: &[f64]) -> Result<Prediction> {
    if x.len() != model.feature_count {
        return Err(ModelError::DimensionMismatch {
            expected: model.feature_count,
            found: x.len(),
        });
    }
    let scores = model
        .machines
        .iter()
        .map(|m| svm_decision(m, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prediction {
        label: argmax_lowest(&scores),
        scores,
    })
}
