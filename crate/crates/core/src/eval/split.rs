use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::rng::rng_from_seed;

/// Disjoint train/test index sets into a feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn splits_from_assignment(fold_of: &[usize], k: usize) -> Vec<Split> {
    (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..fold_of.len()).partition(|&i| fold_of[i] == f);
            Split { train, test }
        })
        .collect()
}

/// Split `i` tests instance `i` alone.
pub fn loocv_splits(n: usize) -> Result<Vec<Split>> {
    if n < 2 {
        return Err(EvalError::TooFewInstances(n));
    }
    Ok((0..n)
        .map(|i| Split {
            train: (0..n).filter(|&j| j != i).collect(),
            test: vec![i],
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KFold {
    pub splits: Vec<Split>,
    /// False when stratification was requested but some class has fewer
    /// than `k` members, in which case plain shuffling was used.
    pub stratified: bool,
}

/// Seeded shuffle followed by round-robin fold assignment. When stratified,
/// each class (in label order) is shuffled separately and the round-robin
/// counter carries over between classes, so fold sizes still differ by at
/// most one.
pub fn kfold_splits(labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<KFold> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(EvalError::BadK { k, n });
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let feasible = by_class.values().all(|members| members.len() >= k);
    let stratified = stratified && feasible;

    let mut rng = rng_from_seed(seed);
    let order: Vec<usize> = if stratified {
        by_class
            .into_values()
            .flat_map(|mut members| {
                members.shuffle(&mut rng);
                members
            })
            .collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(KFold {
        splits: splits_from_assignment(&fold_of, k),
        stratified,
    })
}

/// Leave-one-group-out: one split per distinct group, groups in sorted order.
pub fn group_splits<S: AsRef<str>>(groups: &[S]) -> Result<Vec<Split>> {
    let mut ids: Vec<&str> = groups.iter().map(AsRef::as_ref).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(EvalError::TooFewInstances(ids.len()));
    }
    let fold_of: Vec<usize> = groups
        .iter()
        .map(|g| ids.binary_search(&g.as_ref()).expect("group listed"))
        .collect();
    Ok(splits_from_assignment(&fold_of, ids.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold_sizes(splits: &[Split]) -> Vec<usize> {
        splits.iter().map(|s| s.test.len()).collect()
    }

    #[test]
    fn loocv_shape() {
        let s = loocv_splits(5).unwrap();
        assert_eq!(s.len(), 5);
        for (i, sp) in s.iter().enumerate() {
            assert_eq!(sp.test, vec![i]);
            assert_eq!(sp.train.len(), 4);
            assert!(!sp.train.contains(&i));
        }
        assert_eq!(loocv_splits(1), Err(EvalError::TooFewInstances(1)));
    }

    #[test]
    fn kfold_sizes() {
        let labels = vec![0; 10];
        let f = kfold_splits(&labels, 5, 1, false).unwrap();
        assert_eq!(fold_sizes(&f.splits), vec![2; 5]);
        let labels = vec![0; 11];
        let f = kfold_splits(&labels, 5, 1, false).unwrap();
        assert_eq!(fold_sizes(&f.splits), vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn stratified_one_per_class_per_fold() {
        let labels = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
        let f = kfold_splits(&labels, 4, 17, true).unwrap();
        assert!(f.stratified);
        for s in &f.splits {
            let mut classes: Vec<usize> = s.test.iter().map(|&i| labels[i]).collect();
            classes.sort_unstable();
            assert_eq!(classes, vec![0, 1, 2]);
        }
    }

    #[test]
    fn stratification_degrades_when_class_too_small() {
        let labels = [0, 0, 0, 0, 0, 1];
        let f = kfold_splits(&labels, 3, 0, true).unwrap();
        assert!(!f.stratified);
        assert_eq!(f.splits.len(), 3);
    }

    #[test]
    fn bad_k_rejected() {
        assert_eq!(
            kfold_splits(&[0, 1, 0], 1, 0, false),
            Err(EvalError::BadK { k: 1, n: 3 })
        );
        assert_eq!(
            kfold_splits(&[0, 1, 0], 4, 0, false),
            Err(EvalError::BadK { k: 4, n: 3 })
        );
    }

    #[test]
    fn kfold_deterministic_given_seed() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        assert_eq!(
            kfold_splits(&labels, 5, 8, true).unwrap(),
            kfold_splits(&labels, 5, 8, true).unwrap()
        );
        assert_ne!(
            kfold_splits(&labels, 5, 8, true).unwrap(),
            kfold_splits(&labels, 5, 9, true).unwrap()
        );
    }

    #[test]
    fn groups_leave_one_out() {
        let g = ["b", "a", "b", "c", "a"];
        let s = group_splits(&g).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].test, vec![1, 4]);
        assert_eq!(s[1].test, vec![0, 2]);
        assert_eq!(s[2].test, vec![3]);
        assert!(group_splits(&["x", "x"]).is_err());
    }
}
