//! k-fold cross-validation of the random forest and the reports built from
//! it.
//!
//! A run derives all of its randomness from one seed: the fold split uses
//! `derive(seed, 0)`, the forest of fold `f` uses `derive_path(seed, [1, f])`
//! and importance permutations use `derive(seed, 2)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, DatasetError, LabeledDataset, RowLimit};
use crate::features::{self, FeatureError, WindowConfig};
use crate::forest::{self, ForestError, ImportanceReport, TrainConfig};
use crate::metrics::{self, BinaryCounts, ConfusionMatrix, EvalReport, MetricsError};
use crate::par::Exec;
use crate::seed;
use crate::trace::DirectionalTrace;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("class `{0}` is not in the dataset")]
    UnknownClass(String),
}

/// Featurize every trace and assemble them into one dataset.
pub fn build_dataset(
    traces: &[DirectionalTrace],
    window: WindowConfig,
    limit: RowLimit,
) -> Result<LabeledDataset, EvalError> {
    let parts = traces
        .iter()
        .map(|t| features::featurize(t, window))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(dataset::assemble(&parts, limit)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k_folds: usize,
    /// Forest settings; `seed` is replaced per fold.
    pub train: TrainConfig,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k_folds: 10,
            train: TrainConfig::default(),
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// Held-out predictions of every row, gathered across folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub class_names: Vec<String>,
    pub actual: Vec<usize>,
    pub predicted: Vec<usize>,
    /// Per-row vote fractions, indexed like `class_names`.
    pub scores: Vec<Vec<f64>>,
    pub k_folds: usize,
}

pub fn cross_validate(ds: &LabeledDataset, cfg: &CvConfig) -> Result<CvOutcome, EvalError> {
    let folds = dataset::kfold(ds.len(), cfg.k_folds, seed::derive(cfg.seed, 0))?;
    let per_fold = cfg.exec.try_map_indexed(cfg.k_folds, |f| {
        let train_rows = ds.subset(&folds.train_indices(f));
        let tcfg = TrainConfig {
            seed: seed::derive_path(cfg.seed, &[1, f as u64]),
            ..cfg.train.clone()
        };
        let model = forest::train_with(&train_rows, &tcfg, cfg.exec)?;
        // Per-fold models are dropped after scoring their held-out rows.
        Ok::<_, EvalError>(
            folds
                .test_indices(f)
                .into_iter()
                .map(|i| {
                    let scores = model.predict_scores(ds.row(i));
                    (i, model.classify_index(ds.row(i)), scores)
                })
                .collect::<Vec<_>>(),
        )
    })?;

    let n = ds.len();
    let mut predicted = vec![0; n];
    let mut scores = vec![Vec::new(); n];
    for (i, p, s) in per_fold.into_iter().flatten() {
        predicted[i] = p;
        scores[i] = s;
    }
    Ok(CvOutcome {
        class_names: ds.class_names().to_vec(),
        actual: ds.labels().to_vec(),
        predicted,
        scores,
        k_folds: cfg.k_folds,
    })
}

/// One-vs-rest metrics for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub rows: u64,
    #[serde(flatten)]
    pub counts: BinaryCounts,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub f1: f64,
    /// Area under the one-vs-rest ROC of this class's vote fraction.
    pub auc: f64,
}

impl CvOutcome {
    pub fn confusion(&self, positive: usize) -> Result<ConfusionMatrix, EvalError> {
        Ok(metrics::confusion(
            &self.predicted,
            &self.actual,
            &self.class_names,
            positive,
        )?)
    }

    fn class_index(&self, name: &str) -> Result<usize, EvalError> {
        self.class_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| EvalError::UnknownClass(name.to_string()))
    }

    /// Binary report (with ROC and AUC) for `positive` against all other
    /// classes.
    pub fn binary_report(&self, positive: &str) -> Result<EvalReport, EvalError> {
        self.binary_report_set(&[positive], positive)
    }

    /// Binary report for a set of positive classes, reported under `name`.
    /// A row counts as predicted positive when its predicted class is in
    /// the set; its ROC score is the summed vote fraction of the set.
    pub fn binary_report_set(&self, positive: &[&str], name: &str) -> Result<EvalReport, EvalError> {
        let mut in_set = vec![false; self.class_names.len()];
        for p in positive {
            in_set[self.class_index(p)?] = true;
        }
        let mut counts = BinaryCounts::default();
        for (&a, &p) in self.actual.iter().zip(&self.predicted) {
            match (in_set[a], in_set[p]) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fn_ += 1,
                (false, true) => counts.fp += 1,
                (false, false) => counts.tn += 1,
            }
        }
        let is_pos: Vec<bool> = self.actual.iter().map(|&a| in_set[a]).collect();
        let s: Vec<f64> = self
            .scores
            .iter()
            .map(|s| {
                let v: f64 = s.iter().zip(&in_set).filter(|(_, &k)| k).map(|(v, _)| v).sum();
                v.min(1.0)
            })
            .collect();
        let curve = metrics::roc(&s, &is_pos)?;
        Ok(EvalReport::from_counts(name, counts).with_roc(curve))
    }

    pub fn per_class(&self) -> Result<Vec<ClassMetrics>, EvalError> {
        let cm = self.confusion(0)?;
        (0..self.class_names.len())
            .map(|c| {
                let counts = cm.one_vs_rest(c);
                let r = metrics::rates(&counts);
                let is_pos: Vec<bool> = self.actual.iter().map(|&a| a == c).collect();
                let s: Vec<f64> = self.scores.iter().map(|s| s[c]).collect();
                let auc = metrics::auc(&metrics::roc(&s, &is_pos)?);
                Ok(ClassMetrics {
                    class: self.class_names[c].clone(),
                    rows: counts.tp + counts.fn_,
                    counts,
                    tpr: r.tpr,
                    fpr: r.fpr,
                    precision: r.precision,
                    f1: r.f1,
                    auc,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowImportance {
    pub window: usize,
    pub importance: ImportanceReport,
}

/// Train one forest on all rows for each window length and report the
/// permutation importance of every feature.
pub fn importance_sweep(
    traces: &[DirectionalTrace],
    windows: &[usize],
    limit: RowLimit,
    train: &TrainConfig,
    seed: u64,
    exec: Exec,
) -> Result<Vec<WindowImportance>, EvalError> {
    exec.try_map_indexed(windows.len(), |i| {
        let w = windows[i];
        let ds = build_dataset(traces, WindowConfig::new(w)?, limit)?;
        let tcfg = TrainConfig {
            seed: seed::derive_path(seed, &[1, w as u64]),
            ..train.clone()
        };
        let model = forest::train_with(&ds, &tcfg, exec)?;
        let importance =
            forest::permutation_importance_with(&model, &ds, seed::derive(seed, 2), exec)?;
        Ok(WindowImportance {
            window: w,
            importance,
        })
    })
}
