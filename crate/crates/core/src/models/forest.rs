//! Bagged ensemble of CART trees with per-node feature subsampling.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, DecisionTree, Ranks, TreeParams};
use super::{argmax_lowest, check_training_data, distinct_classes, ModelError, Prediction, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` is unlimited depth.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// `None` is `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            features_per_split: self.features_per_split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparameter(m.into()));
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1");
        }
        if self.min_samples_split == 0 {
            return bad("min_samples_split must be >= 1");
        }
        if self.features_per_split == Some(0) {
            return bad("features_per_split must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub feature_count: usize,
    pub master_seed: u64,
    pub params: ForestParams,
}

/// Tree `i` draws its bootstrap sample and feature subsets from a generator
/// seeded with `derive_seed(params.seed, i)`, so the forest does not depend
/// on the order in which trees are built.
pub fn train_forest(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> Result<RandomForestModel> {
    params.validate()?;
    check_training_data(x, y, n_classes)?;
    let n = x.rows();
    if n < 2 {
        return Err(ModelError::TooFewRows { needed: 2, found: n });
    }
    if distinct_classes(y, n_classes) < 2 {
        return Err(ModelError::SingleClassTraining);
    }
    let tree_params = params.tree_params();
    let ranks = Ranks::new(x, n_classes);
    let trees = (0..params.n_trees)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(params.seed, i as u64));
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow_tree(x, &ranks, y, n_classes, sample, &tree_params, &mut rng)
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        n_classes,
        feature_count: x.cols(),
        master_seed: params.seed,
        params: params.clone(),
    })
}

/// Scores are the fraction of trees voting for each class.
pub fn predict_forest(model: &RandomForestModel, x: &[f64]) -> Result<Prediction> {
    if x.len() != model.feature_count {
        return Err(ModelError::DimensionMismatch {
            expected: model.feature_count,
            found: x.len(),
        });
    }
    let mut votes = vec![0usize; model.n_classes];
    for tree in &model.trees {
        votes[tree.predict(x)] += 1;
    }
    let total = model.trees.len() as f64;
    let scores: Vec<f64> = votes.iter().map(|&v| v as f64 / total).collect();
    Ok(Prediction {
        label: argmax_lowest(&scores),
        scores,
    })
}
