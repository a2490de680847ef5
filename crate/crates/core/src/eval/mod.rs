//! Cross-validation splitters, the fold runner and ROC/AUC analysis.

mod cv;
mod roc;
mod split;

use thiserror::Error;

use crate::models::ModelError;
use crate::preprocess::PreprocessError;

pub use cv::{cross_validate, cross_validate_xy, CvOptions, CvReport, FoldOutcome};
pub use roc::{auc, ovr_roc, roc_curve, OvrRoc, RocCurve};
pub use split::{group_splits, kfold_splits, loocv_splits, KFold, Split};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("need at least 2 instances, found {0}")]
    TooFewInstances(usize),
    #[error("k = {k} is outside 2..={n}")]
    BadK { k: usize, n: usize },
    #[error("class {0} has no positive or no negative instances")]
    OneClassOnly(usize),
    #[error("score {0} is NaN")]
    NonFiniteScore(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("every fold was skipped")]
    AllFoldsSkipped,
    #[error("split references instance {0}, beyond the data")]
    IndexOutOfRange(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
