//! Subject-wise fold assignment and exhaustive split enumeration.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl FoldSizes {
    pub fn new(train: usize, val: usize, test: usize) -> Self {
        Self { train, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_index: usize,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl FoldSpec {
    /// Pairwise disjoint with the given union.
    pub fn check_partition(&self, subjects: &[String]) -> Result<()> {
        let all: BTreeSet<&String> = subjects.iter().collect();
        let mut seen = BTreeSet::new();
        for s in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(s) {
                return Err(Error::config(format!("fold {}: subject {s} assigned twice", self.fold_index)));
            }
        }
        if seen != all {
            return Err(Error::config(format!("fold {} does not cover the subject list", self.fold_index)));
        }
        Ok(())
    }
}

/// Seeded shuffle of the (sorted) subjects, then rotation: fold `i` tests
/// the `test` subjects starting at position `i * test` (wrapping), validates
/// on the next `val`, and trains on the rest. When `k * test >= n` every
/// subject is tested at least once; for `k * test == n` exactly once.
pub fn make_folds(subjects: &[String], k: usize, sizes: FoldSizes, seed: u64) -> Result<Vec<FoldSpec>> {
    let n = subjects.len();
    let mut order: Vec<String> = subjects.to_vec();
    order.sort();
    order.dedup();
    if order.len() != n {
        return Err(Error::config("subject ids must be unique"));
    }
    if sizes.total() != n {
        return Err(Error::config(format!(
            "fold sizes {}/{}/{} sum to {}, not the {n} subjects",
            sizes.train,
            sizes.val,
            sizes.test,
            sizes.total()
        )));
    }
    if k == 0 || sizes.test == 0 {
        return Err(Error::config("need at least one fold and one test subject"));
    }
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds = (0..k)
        .map(|i| {
            let at = |j: usize| order[(i * sizes.test + j) % n].clone();
            let mut test: Vec<String> = (0..sizes.test).map(at).collect();
            let mut val: Vec<String> = (sizes.test..sizes.test + sizes.val).map(at).collect();
            let mut train: Vec<String> = (sizes.test + sizes.val..n).map(at).collect();
            test.sort();
            val.sort();
            train.sort();
            FoldSpec {
                fold_index: i,
                train,
                val,
                test,
            }
        })
        .collect();
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Lexicographic `k`-combinations of `0..n`.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every way to pick `n_train` of `n` subjects for development, hold
/// `n_val` of those out for validation, and test on the remainder. Returns
/// `C(n, n_train) * C(n_train, n_val)` splits in lexicographic order.
pub fn enumerate_splits(n: usize, n_train: usize, n_val: usize) -> Result<Vec<Split>> {
    if n_train >= n {
        return Err(Error::config(format!(
            "{n_train} development subjects out of {n} leave no test subject"
        )));
    }
    if n_val >= n_train {
        return Err(Error::config(format!(
            "holding {n_val} of {n_train} development subjects for validation leaves none for training"
        )));
    }
    let mut splits = Vec::new();
    for dev in combinations(n, n_train) {
        let test: Vec<usize> = (0..n).filter(|i| !dev.contains(i)).collect();
        for pick in combinations(n_train, n_val) {
            let val: Vec<usize> = pick.iter().map(|&i| dev[i]).collect();
            let train: Vec<usize> = dev.iter().copied().filter(|i| !val.contains(i)).collect();
            splits.push(Split {
                train,
                val,
                test: test.clone(),
            });
        }
    }
    Ok(splits)
}
