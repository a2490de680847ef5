//! Classifiers with a uniform train / predict / score interface.
//!
//! Labels are dense integers `0..n_classes`. Every predictor returns the
//! winning label plus one score per class (vote fractions for the forest,
//! probabilities for logistic regression, decision values for the SVM); ties
//! always go to the lowest class index.

pub mod forest;
pub mod logreg;
pub mod svm;
pub mod tree;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::preprocess::ScalerParams;

pub use forest::{predict_forest, train_forest, ForestParams, RandomForestModel};
pub use logreg::{
    logreg_loss_and_grad, predict_logreg, softmax, train_logreg, LogRegParams, LogisticModel,
};
pub use svm::{
    predict_ovr_svm, rbf_kernel, smo_train_binary, svm_decision, train_ovr_svm, BinarySvm, Gamma,
    MulticlassSvmModel, SvmParams,
};
pub use tree::{best_split, gini, train_tree, DecisionTree, Node, SplitCandidate, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("empty node: class counts sum to zero")]
    EmptyNode,
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("class {0} has no training examples")]
    MissingClass(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {label} outside 0..{n_classes}")]
    InvalidLabel { label: usize, n_classes: usize },
    #[error("need at least {needed} training rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("non-finite loss at iteration {0}; lower the learning rate")]
    NonFiniteLoss(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("model file: {0}")]
    Io(String),
    #[error("model format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub scores: Vec<f64>,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_training_data(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if y.len() != x.rows() {
        return Err(ModelError::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(ModelError::InvalidLabel { label, n_classes });
    }
    if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
        let (i, j) = (pos / x.cols(), pos % x.cols());
        return Err(ModelError::Format(format!(
            "non-finite training value at row {i}, column {j}"
        )));
    }
    Ok(())
}

pub(crate) fn distinct_classes(y: &[usize], n_classes: usize) -> usize {
    let mut seen = vec![false; n_classes];
    y.iter().for_each(|&l| seen[l] = true);
    seen.into_iter().filter(|&s| s).count()
}

/// Something that maps a feature row to a label and per-class scores.
pub trait Predictor {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<Prediction>;
}

/// Something that trains a [`Predictor`]. `seed` keys every random choice
/// made during training.
pub trait Learner {
    fn name(&self) -> String;
    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Box<dyn Predictor>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Forest,
    Logreg,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Forest, ModelKind::Logreg, ModelKind::Svm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Forest => "forest",
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s.trim())
    }

    pub fn default_spec(self) -> ModelSpec {
        match self {
            ModelKind::Forest => ModelSpec::Forest(ForestParams::default()),
            ModelKind::Logreg => ModelSpec::Logreg(LogRegParams::default()),
            ModelKind::Svm => ModelSpec::Svm(SvmParams::default()),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model family plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Forest(ForestParams),
    Logreg(LogRegParams),
    Svm(SvmParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Forest(_) => ModelKind::Forest,
            ModelSpec::Logreg(_) => ModelKind::Logreg,
            ModelSpec::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Forest(p) => p.validate(),
            ModelSpec::Logreg(p) => p.validate(),
            ModelSpec::Svm(p) => p.validate(),
        }
    }

    pub fn train(&self, x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> Result<TrainedModel> {
        Ok(match self {
            ModelSpec::Forest(p) => {
                let p = ForestParams { seed, ..p.clone() };
                TrainedModel::Forest(train_forest(x, y, n_classes, &p)?)
            }
            ModelSpec::Logreg(p) => TrainedModel::Logreg(train_logreg(x, y, n_classes, p)?),
            ModelSpec::Svm(p) => {
                let p = SvmParams { seed, ..p.clone() };
                TrainedModel::Svm(train_ovr_svm(x, y, n_classes, &p)?)
            }
        })
    }
}

impl Learner for ModelSpec {
    fn name(&self) -> String {
        self.kind().name().to_string()
    }

    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.train(x, y, n_classes, seed)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Forest(RandomForestModel),
    Logreg(LogisticModel),
    Svm(MulticlassSvmModel),
}

impl Predictor for TrainedModel {
    fn n_features(&self) -> usize {
        match self {
            TrainedModel::Forest(m) => m.feature_count,
            TrainedModel::Logreg(m) => m.feature_count(),
            TrainedModel::Svm(m) => m.feature_count,
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            TrainedModel::Forest(m) => m.n_classes,
            TrainedModel::Logreg(m) => m.n_classes(),
            TrainedModel::Svm(m) => m.n_classes(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            TrainedModel::Forest(m) => predict_forest(m, x),
            TrainedModel::Logreg(m) => predict_logreg(m, x),
            TrainedModel::Svm(m) => predict_ovr_svm(m, x),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Everything needed to reload a model for prediction: the fitted model, the
/// scaler applied to its inputs (if any) and the feature names it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub scaler: Option<ScalerParams>,
    pub model: TrainedModel,
}

impl ModelBundle {
    pub fn new(model: TrainedModel, scaler: Option<ScalerParams>, feature_names: Vec<String>) -> Self {
        ModelBundle {
            format_version: MODEL_FORMAT_VERSION,
            feature_names,
            scaler,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: ModelBundle =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if bundle.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported format_version {}",
                bundle.format_version
            )));
        }
        if let Some(s) = &bundle.scaler {
            if s.dim() != bundle.model.n_features() || s.std.len() != s.dim() {
                return Err(ModelError::Format("scaler dimension mismatch".into()));
            }
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| ModelError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(e.to_string()))?;
        Self::from_json(&text)
    }

    /// Scales `x` with the bundled scaler (if any) and predicts.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let expected = self.model.n_features();
        if x.len() != expected {
            return Err(ModelError::DimensionMismatch {
                expected,
                found: x.len(),
            });
        }
        match &self.scaler {
            Some(s) => {
                let mut row = x.to_vec();
                crate::preprocess::zscore_apply_row(s, &mut row);
                self.model.predict(&row)
            }
            None => self.model.predict(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_lowest(&[0.5, 0.5, 0.0]), 0);
        assert_eq!(argmax_lowest(&[0.1, 0.3, 0.3]), 1);
        assert_eq!(argmax_lowest(&[0.0, 0.0, 1.0]), 2);
    }

    #[test]
    fn model_kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::parse(k.name()), Some(k));
        }
        assert_eq!(ModelKind::parse("knn"), None);
    }

    #[test]
    fn spec_json_is_tagged_by_kind() {
        let s = serde_json::to_string(&ModelKind::Svm.default_spec()).unwrap();
        assert!(s.starts_with(r#"{"kind":"svm""#), "{s}");
        let back: ModelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ModelKind::Svm.default_spec());
    }

    #[test]
    fn bundle_rejects_unknown_version() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let m = ModelKind::Logreg
            .default_spec()
            .train(&x, &[0, 0, 1, 1], 2, 0)
            .unwrap();
        let mut b = ModelBundle::new(m, None, vec!["x".into()]);
        b.format_version = 99;
        assert!(matches!(
            ModelBundle::from_json(&b.to_json()),
            Err(ModelError::Format(_))
        ));
    }
}
