//! Random forest classifier.
//!
//! Each tree is grown on a with-replacement bootstrap of the training rows
//! and splits on the best Gini threshold among a random subset of features
//! at every node. Trees vote with the majority class of the leaf a sample
//! reaches; the forest's score for a class is its share of the votes.
//!
//! Tree `t` uses the seed `s = seed::derive(cfg.seed, t)`; its bootstrap is
//! drawn from `derive(s, 0)` and its feature subsets from `derive(s, 1)`.
//! Trees are therefore reproducible one by one and can be trained in any
//! order.

mod importance;
mod io;
mod split;
mod tree;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::dataset::LabeledDataset;
use crate::par::Exec;
use crate::seed;

pub use importance::{
    permutation_importance, permutation_importance_with, FeatureImportance, ImportanceReport,
};
pub use io::{MODEL_FORMAT, MODEL_VERSION};
pub use split::{best_split, gini, midpoint, Split};
pub use tree::{grow_tree, DecisionTree, Node};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training needs at least two classes present, found {0}")]
    SingleClass(usize),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("no row is out-of-bag for any tree")]
    NoOobRows,
    #[error("model was trained on {expected} rows, dataset has {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("model expects {expected} features, got {found}")]
    FeatureCountMismatch { expected: usize, found: usize },
    #[error("unsupported model version {0} (expected {MODEL_VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("model JSON is malformed")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(M))`.
    pub m_try: Option<usize>,
    pub min_leaf: usize,
    /// `None` grows until purity.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 20,
            m_try: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn resolved_m_try(&self, n_features: usize) -> usize {
        self.m_try
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
    }

    fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::BadConfig("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ForestError::BadConfig("min_leaf must be >= 1".into()));
        }
        let m = self.resolved_m_try(n_features);
        if m == 0 || m > n_features {
            return Err(ForestError::BadConfig(format!(
                "m_try = {m} outside 1..={n_features}"
            )));
        }
        Ok(())
    }
}

/// A trained forest. Immutable; prediction is read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    /// `oob_masks[t][i]` is true when row `i` was NOT drawn for tree `t`.
    oob_masks: Vec<Vec<bool>>,
    class_names: Vec<String>,
    n_features: usize,
    config: TrainConfig,
    /// Free-form annotations persisted with the model (window length,
    /// flow direction, ...).
    pub meta: BTreeMap<String, String>,
}

/// Bootstrap seed and growth seed of tree `t`.
pub(crate) fn tree_seeds(forest_seed: u64, t: usize) -> (u64, u64) {
    let s = seed::derive(forest_seed, t as u64);
    (seed::derive(s, 0), seed::derive(s, 1))
}

pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<RandomForest, ForestError> {
    train_with(ds, cfg, Exec::default())
}

pub fn train_with(
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<RandomForest, ForestError> {
    let present = ds.classes_present();
    if present < 2 {
        return Err(ForestError::SingleClass(present));
    }
    cfg.validate(ds.n_features())?;
    let mut config = cfg.clone();
    config.m_try = Some(cfg.resolved_m_try(ds.n_features()));
    let n = ds.len();

    let grown = exec.map_indexed(cfg.n_trees, |t| {
        let (boot_seed, grow_seed) = tree_seeds(cfg.seed, t);
        let mut rng = seed::rng(boot_seed);
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut oob = vec![true; n];
        for &i in &bootstrap {
            oob[i] = false;
        }
        (grow_tree(ds, &bootstrap, &config, grow_seed), oob)
    });
    let (trees, oob_masks) = grown.into_iter().unzip();
    Ok(RandomForest {
        trees,
        oob_masks,
        class_names: ds.class_names().to_vec(),
        n_features: ds.n_features(),
        config,
        meta: BTreeMap::new(),
    })
}

impl RandomForest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn oob_masks(&self) -> &[Vec<bool>] {
        &self.oob_masks
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Number of rows the forest was trained on.
    pub fn n_train_rows(&self) -> usize {
        self.oob_masks.first().map_or(0, Vec::len)
    }

    /// Per-tree votes for each class.
    pub fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0; self.class_names.len()];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }

    /// Share of tree votes per class, indexed like `class_names`.
    pub fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let n = self.trees.len() as f64;
        self.votes(x).into_iter().map(|v| v as f64 / n).collect()
    }

    /// Index of the class with the most votes; ties go to the lower index.
    pub fn classify_index(&self, x: &[f64]) -> usize {
        argmax_low(&self.votes(x))
    }

    pub fn classify(&self, x: &[f64]) -> &str {
        &self.class_names[self.classify_index(x)]
    }

    fn check_dataset(&self, ds: &LabeledDataset) -> Result<(), ForestError> {
        if ds.len() != self.n_train_rows() {
            return Err(ForestError::RowCountMismatch {
                expected: self.n_train_rows(),
                found: ds.len(),
            });
        }
        if ds.n_features() != self.n_features {
            return Err(ForestError::FeatureCountMismatch {
                expected: self.n_features,
                found: ds.n_features(),
            });
        }
        Ok(())
    }

    /// Out-of-bag predictions: for each training row, the majority vote of
    /// the trees that did not see it, or `None` when every tree saw it.
    pub fn oob_predictions(&self, ds: &LabeledDataset) -> Result<Vec<Option<usize>>, ForestError> {
        self.check_dataset(ds)?;
        Ok((0..ds.len())
            .map(|i| {
                let mut votes = vec![0usize; self.class_names.len()];
                let mut any = false;
                for (tree, mask) in self.trees.iter().zip(&self.oob_masks) {
                    if mask[i] {
                        votes[tree.predict(ds.row(i))] += 1;
                        any = true;
                    }
                }
                any.then(|| argmax_low(&votes))
            })
            .collect())
    }

    /// Misclassification rate of the out-of-bag votes over the rows that
    /// are out-of-bag for at least one tree.
    pub fn oob_error(&self, ds: &LabeledDataset) -> Result<f64, ForestError> {
        let preds = self.oob_predictions(ds)?;
        let mut seen = 0usize;
        let mut wrong = 0usize;
        for (i, p) in preds.iter().enumerate() {
            if let Some(p) = p {
                seen += 1;
                wrong += usize::from(*p != ds.label(i));
            }
        }
        if seen == 0 {
            return Err(ForestError::NoOobRows);
        }
        Ok(wrong as f64 / seen as f64)
    }
}

pub(crate) fn argmax_low(votes: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed_: u64) -> LabeledDataset {
        let mut rng = seed::rng(seed_);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { 0.0 } else { 5.0 };
            rows.push(vec![
                centre + rng.random::<f64>(),
                rng.random::<f64>(),
                centre - rng.random::<f64>(),
            ]);
            labels.push(c);
        }
        LabeledDataset::from_rows(&rows, labels, vec!["A".into(), "B".into()]).unwrap()
    }

    #[test]
    fn trains_requested_number_of_trees() {
        let ds = blobs(60, 1);
        let f = train(&ds, &TrainConfig::default()).unwrap();
        assert_eq!(f.trees().len(), 20);
        assert_eq!(f.oob_masks().len(), 20);
        assert!(f.oob_masks().iter().all(|m| m.len() == 60));
        assert_eq!(f.config().m_try, Some(2));
    }

    #[test]
    fn single_tree_forest_is_its_tree() {
        let ds = blobs(40, 2);
        let cfg = TrainConfig {
            n_trees: 1,
            ..TrainConfig::default()
        };
        let f = train(&ds, &cfg).unwrap();
        for i in 0..ds.len() {
            let x = ds.row(i);
            let scores = f.predict_scores(x);
            assert!(scores.contains(&1.0));
            assert_eq!(f.classify_index(x), f.trees()[0].predict(x));
        }
    }

    #[test]
    fn rejects_single_class_and_bad_config() {
        let ds = LabeledDataset::from_rows(
            &[vec![1.0], vec![2.0]],
            vec![0, 0],
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        assert!(matches!(
            train(&ds, &TrainConfig::default()),
            Err(ForestError::SingleClass(1))
        ));
        let ds = blobs(10, 3);
        for bad in [
            TrainConfig {
                n_trees: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                m_try: Some(4),
                ..TrainConfig::default()
            },
            TrainConfig {
                m_try: Some(0),
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(train(&ds, &bad), Err(ForestError::BadConfig(_))));
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let ds = blobs(80, 4);
        let cfg = TrainConfig {
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train_with(&ds, &cfg, Exec::Sequential).unwrap();
        let b = train_with(&ds, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scores_sum_to_one_and_classify_is_argmax() {
        let ds = blobs(80, 5);
        let f = train(&ds, &TrainConfig::default()).unwrap();
        for i in 0..ds.len() {
            let s = f.predict_scores(ds.row(i));
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let best = f.classify_index(ds.row(i));
            assert!(s.iter().all(|&v| v <= s[best]));
        }
    }

    #[test]
    fn oob_error_on_separable_data_is_small() {
        let ds = blobs(200, 6);
        let f = train(&ds, &TrainConfig::default()).unwrap();
        let e = f.oob_error(&ds).unwrap();
        assert!((0.0..=0.2).contains(&e), "oob error {e}");
    }

    #[test]
    fn oob_needs_matching_dataset() {
        let ds = blobs(50, 7);
        let f = train(&ds, &TrainConfig::default()).unwrap();
        assert!(matches!(
            f.oob_error(&blobs(40, 7)),
            Err(ForestError::RowCountMismatch { .. })
        ));
    }

    #[test]
    fn tie_rule_on_votes() {
        assert_eq!(argmax_low(&[10, 10]), 0);
        assert_eq!(argmax_low(&[3, 10, 10]), 1);
    }
}
