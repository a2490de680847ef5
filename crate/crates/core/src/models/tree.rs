//! CART classification tree with Gini impurity.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, check_training_data, ModelError, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Splits must lower the weighted impurity by more than this.
pub(crate) const MIN_IMPURITY_DECREASE: f64 = 1e-12;

pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(ModelError::EmptyNode);
    }
    Ok(gini_of(class_counts, total))
}

#[inline]
fn gini_of(counts: &[usize], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

#[inline]
fn weighted_gini(left: &[usize], n_left: usize, right: &[usize], n_right: usize) -> f64 {
    let n = (n_left + n_right) as f64;
    (n_left as f64 / n) * gini_of(left, n_left) + (n_right as f64 / n) * gini_of(right, n_right)
}

/// Midpoint of two consecutive distinct values, kept in `[a, b)`.
#[inline]
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) * 0.5;
    if m < b {
        m
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub weighted_gini: f64,
}

/// Exhaustive search over midpoints between consecutive distinct values of
/// each feature in `feature_subset`. Rows with `x <= threshold` go left.
/// Returns `None` when no split lowers the node impurity. Ties resolve to the
/// lower feature index, then the lower threshold.
pub fn best_split(x: &Matrix, y: &[usize], feature_subset: &[usize]) -> Option<SplitCandidate> {
    if x.rows() < 2 || y.len() != x.rows() || feature_subset.is_empty() {
        return None;
    }
    let n_classes = y.iter().max().map_or(0, |&m| m + 1);
    let ranks = Ranks::new(x, n_classes);
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut features = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut scratch = SplitScratch::new(n_classes);
    let parent = class_counts(y, &rows, n_classes);
    let parent_gini = gini_of(&parent, rows.len());
    search(&ranks, y, &rows, &features, &parent, parent_gini, &mut scratch)
}

fn class_counts(y: &[usize], rows: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    rows.iter().for_each(|&r| counts[y[r]] += 1);
    counts
}

/// Dense per-feature ranks of the training values plus the distinct values
/// in ascending order. Values comparing equal (including `-0.0` and `0.0`)
/// share a rank, so ordering rows by rank is ordering them by value. Built
/// once per training matrix; node searches then sort packed integers.
pub(crate) struct Ranks {
    n: usize,
    /// `rank[j * n + i]` is the rank of row `i` in feature `j`.
    rank: Vec<u32>,
    values: Vec<Vec<f64>>,
    /// Low bits of a packed sort key that hold the label.
    label_bits: u32,
}

impl Ranks {
    pub(crate) fn new(x: &Matrix, n_classes: usize) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut rank = vec![0u32; n * d];
        let mut values = Vec::with_capacity(d);
        let mut order: Vec<usize> = (0..n).collect();
        for j in 0..d {
            order.sort_unstable_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)));
            let mut distinct: Vec<f64> = Vec::new();
            for &i in &order {
                let v = x.get(i, j);
                if distinct.last() != Some(&v) {
                    distinct.push(v);
                }
                rank[j * n + i] = (distinct.len() - 1) as u32;
            }
            values.push(distinct);
        }
        Ranks {
            n,
            rank,
            values,
            label_bits: usize::BITS - n_classes.saturating_sub(1).leading_zeros(),
        }
    }
}

struct SplitScratch {
    keys: Vec<u64>,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl SplitScratch {
    fn new(n_classes: usize) -> Self {
        SplitScratch {
            keys: Vec::new(),
            left: vec![0; n_classes],
            right: vec![0; n_classes],
        }
    }
}

/// Best split over `features` (ascending) for the node holding `rows`.
fn search(
    ranks: &Ranks,
    y: &[usize],
    rows: &[usize],
    features: &[usize],
    parent: &[usize],
    parent_gini: f64,
    scratch: &mut SplitScratch,
) -> Option<SplitCandidate> {
    let n = rows.len();
    let shift = ranks.label_bits;
    let mask = (1u64 << shift) - 1;
    let mut best: Option<SplitCandidate> = None;
    for &f in features {
        let col = &ranks.rank[f * ranks.n..(f + 1) * ranks.n];
        let keys = &mut scratch.keys;
        keys.clear();
        keys.extend(rows.iter().map(|&r| (u64::from(col[r]) << shift) | y[r] as u64));
        keys.sort_unstable();
        if keys[0] >> shift == keys[n - 1] >> shift {
            continue;
        }
        scratch.left.iter_mut().for_each(|c| *c = 0);
        scratch.right.copy_from_slice(parent);
        for i in 0..n - 1 {
            let (rank, label) = (keys[i] >> shift, (keys[i] & mask) as usize);
            scratch.left[label] += 1;
            scratch.right[label] -= 1;
            let next = keys[i + 1] >> shift;
            if rank == next {
                continue;
            }
            let g = weighted_gini(&scratch.left, i + 1, &scratch.right, n - i - 1);
            if best.is_none_or(|b| g < b.weighted_gini) {
                let v = &ranks.values[f];
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: midpoint(v[rank as usize], v[next as usize]),
                    weighted_gini: g,
                });
            }
        }
    }
    best.filter(|b| b.weighted_gini < parent_gini - MIN_IMPURITY_DECREASE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until purity or `min_samples_split`.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// `None` means `floor(sqrt(d))`, at least 1.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
        }
    }
}

impl TreeParams {
    pub fn resolved_features_per_split(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: Vec<usize>,
    },
}

/// Flat binary tree; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class_counts } => return class_counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Majority class of the leaf reached by `x` (lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> usize {
        let counts = self.leaf_counts(x);
        let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        argmax_lowest(&as_f)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Grower<'a> {
    x: &'a Matrix,
    ranks: &'a Ranks,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    mtry: usize,
    rng: &'a mut Rng,
    nodes: Vec<Node>,
    scratch: SplitScratch,
    feature_order: Vec<usize>,
}

impl Grower<'_> {
    /// Draws features in random order; the first `mtry` are searched together
    /// and further ones are added one at a time only while no split is found.
    fn find_split(&mut self, rows: &[usize], parent: &[usize], parent_gini: f64) -> Option<SplitCandidate> {
        let d = self.feature_order.len();
        for k in 0..d {
            let j = self.rng.random_range(k..d);
            self.feature_order.swap(k, j);
            if k + 1 < self.mtry {
                continue;
            }
            let candidates: Vec<usize> = if k + 1 == self.mtry {
                let mut first = self.feature_order[..self.mtry].to_vec();
                first.sort_unstable();
                first
            } else {
                vec![self.feature_order[k]]
            };
            if let Some(s) = search(
                self.ranks,
                self.y,
                rows,
                &candidates,
                parent,
                parent_gini,
                &mut self.scratch,
            ) {
                return Some(s);
            }
        }
        None
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let counts = class_counts(self.y, rows, self.n_classes);
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        let split = if pure || n < self.params.min_samples_split || depth_capped {
            None
        } else {
            let g = gini_of(&counts, n);
            self.find_split(rows, &counts, g)
        };

        let Some(split) = split else {
            self.nodes.push(Node::Leaf {
                class_counts: counts,
            });
            return self.nodes.len() - 1;
        };

        let mut boundary = 0;
        for i in 0..n {
            if self.x.get(rows[i], split.feature) <= split.threshold {
                rows.swap(i, boundary);
                boundary += 1;
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class_counts: Vec::new(),
        });
        let (left_rows, right_rows) = rows.split_at_mut(boundary);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on the given rows (duplicates allowed, as in a bootstrap).
pub(crate) fn grow_tree(
    x: &Matrix,
    ranks: &Ranks,
    y: &[usize],
    n_classes: usize,
    mut rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut Rng,
) -> DecisionTree {
    let d = x.cols();
    let mut grower = Grower {
        x,
        ranks,
        y,
        n_classes,
        params: *params,
        mtry: params.resolved_features_per_split(d),
        rng,
        nodes: Vec::new(),
        scratch: SplitScratch::new(n_classes),
        feature_order: (0..d).collect(),
    };
    grower.grow(&mut rows, 0);
    DecisionTree {
        nodes: grower.nodes,
        n_features: d,
        n_classes,
    }
}

/// Trains a single tree on every row of `x`.
pub fn train_tree(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    check_training_data(x, y, n_classes)?;
    if x.rows() == 0 {
        return Err(ModelError::TooFewRows {
            needed: 1,
            found: 0,
        });
    }
    let ranks = Ranks::new(x, n_classes);
    Ok(grow_tree(x, &ranks, y, n_classes, (0..x.rows()).collect(), params, rng))
}
