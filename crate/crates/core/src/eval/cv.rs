use serde::{Deserialize, Serialize};

use super::roc::{ovr_roc, OvrRoc};
use super::{EvalError, Result, Split};
use crate::features::FeatureMatrix;
use crate::matrix::Matrix;
use crate::models::Learner;
use crate::preprocess::{zscore_apply, zscore_fit, ScalerParams};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Fit a z-score scaler on each training fold and apply it to both sides.
    pub scaling: bool,
    pub seed: u64,
    /// Free-form splitter description echoed into the report.
    pub splitter: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: Option<f64>,
    pub skipped: Option<String>,
    /// Scaler fitted on this fold's training rows.
    #[serde(skip)]
    pub scaler: Option<ScalerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub hyperparams: serde_json::Value,
    pub includes_br: bool,
    pub splitter: String,
    pub scaling: bool,
    pub seed: u64,
    pub n_instances: usize,
    pub folds: Vec<FoldOutcome>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// Correct predictions over all evaluated test instances.
    pub pooled_accuracy: f64,
    /// `confusion[true][predicted]` over all evaluated test instances.
    pub confusion: Vec<Vec<usize>>,
    pub roc: Option<OvrRoc>,
    pub warnings: Vec<String>,
}

impl CvReport {
    pub fn per_fold_accuracy(&self) -> Vec<f64> {
        self.folds.iter().filter_map(|f| f.accuracy).collect()
    }

    pub fn skipped_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.skipped.is_some()).count()
    }
}

/// Runs `learner` over `splits` of a feature matrix. Labels are the
/// breathing-type codes.
pub fn cross_validate(
    learner: &dyn Learner,
    hyperparams: serde_json::Value,
    matrix: &FeatureMatrix,
    splits: &[Split],
    options: &CvOptions,
) -> Result<CvReport> {
    let x = matrix.to_matrix();
    let y = matrix.labels();
    let mut report = cross_validate_xy(
        learner,
        hyperparams,
        &x,
        &y,
        crate::dataset::BreathingType::COUNT,
        splits,
        options,
    )?;
    report.includes_br = matrix.includes_br;
    Ok(report)
}

/// Fold `i` trains with seed `derive_seed(options.seed, i)`. Folds whose
/// training side lacks a class are skipped with a warning.
pub fn cross_validate_xy(
    learner: &dyn Learner,
    hyperparams: serde_json::Value,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    splits: &[Split],
    options: &CvOptions,
) -> Result<CvReport> {
    let n = x.rows();
    if y.len() != n {
        return Err(EvalError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if let Some(&bad) = splits
        .iter()
        .flat_map(|s| s.train.iter().chain(&s.test))
        .find(|&&i| i >= n)
    {
        return Err(EvalError::IndexOutOfRange(bad));
    }

    let mut folds = Vec::with_capacity(splits.len());
    let mut warnings = Vec::new();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut pooled_labels = Vec::new();
    let mut pooled_scores: Vec<Vec<f64>> = Vec::new();

    for (fold, split) in splits.iter().enumerate() {
        let mut outcome = FoldOutcome {
            fold,
            n_train: split.train.len(),
            n_test: split.test.len(),
            accuracy: None,
            skipped: None,
            scaler: None,
        };
        let y_train: Vec<usize> = split.train.iter().map(|&i| y[i]).collect();
        let missing: Vec<usize> = (0..n_classes).filter(|c| !y_train.contains(c)).collect();
        if !missing.is_empty() || split.test.is_empty() {
            let why = if split.test.is_empty() {
                "empty test set".to_string()
            } else {
                format!("training side lacks classes {missing:?}")
            };
            warnings.push(format!("fold {fold} skipped: {why}"));
            outcome.skipped = Some(why);
            folds.push(outcome);
            continue;
        }

        let mut x_train = x.select_rows(&split.train);
        let mut x_test = x.select_rows(&split.test);
        if options.scaling {
            let scaler = zscore_fit(&x_train)?;
            x_train = zscore_apply(&scaler, &x_train)?;
            x_test = zscore_apply(&scaler, &x_test)?;
            outcome.scaler = Some(scaler);
        }
        let model = learner.fit(&x_train, &y_train, n_classes, derive_seed(options.seed, fold as u64))?;

        let mut correct = 0;
        for (row, &i) in split.test.iter().enumerate() {
            let p = model.predict(x_test.row(row))?;
            confusion[y[i]][p.label] += 1;
            if p.label == y[i] {
                correct += 1;
            }
            pooled_labels.push(y[i]);
            pooled_scores.push(p.scores);
        }
        outcome.accuracy = Some(correct as f64 / split.test.len() as f64);
        folds.push(outcome);
    }

    let acc: Vec<f64> = folds.iter().filter_map(|f| f.accuracy).collect();
    if acc.is_empty() {
        return Err(EvalError::AllFoldsSkipped);
    }
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    let std = (acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / acc.len() as f64).sqrt();
    let total: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();

    let roc = match Matrix::from_rows(&pooled_scores) {
        Some(scores) if scores.cols() == n_classes => match ovr_roc(&scores, &pooled_labels) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(format!("ROC not computed: {e}"));
                None
            }
        },
        _ => {
            warnings.push("ROC not computed: score width differs from class count".into());
            None
        }
    };

    Ok(CvReport {
        model: learner.name(),
        hyperparams,
        includes_br: false,
        splitter: options.splitter.clone(),
        scaling: options.scaling,
        seed: options.seed,
        n_instances: n,
        folds,
        accuracy_mean: mean,
        accuracy_std: std,
        pooled_accuracy: correct as f64 / total as f64,
        confusion,
        roc,
        warnings,
    })
}
