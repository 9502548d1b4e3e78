//! Permutation feature importance.
//!
//! For every tree and feature, the feature's column is shuffled among the
//! tree's out-of-bag rows and the increase of the tree's misclassification
//! rate on those rows is recorded. A feature's score is the mean increase
//! over trees divided by its standard deviation over trees.
//!
//! With 0/1 class labels the misclassification rate of hard predictions is
//! exactly their mean squared error, so the score is the MSE-based measure
//! in the two-class case.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ForestError, RandomForest};
use crate::dataset::LabeledDataset;
use crate::features::{FEATURE_NAMES, N_FEATURES};
use crate::par::Exec;
use crate::seed;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean over trees of the OOB error increase after permutation.
    pub mean_delta: f64,
    /// Sample standard deviation of that increase over trees.
    pub std_delta: f64,
    /// `mean_delta / std_delta`, or 0 when `std_delta` is 0.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
    /// Trees with at least one out-of-bag row, i.e. those averaged over.
    pub trees_used: usize,
}

impl ImportanceReport {
    /// Feature indices sorted by descending score (stable on ties).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| self.features[b].score.total_cmp(&self.features[a].score));
        idx
    }
}

fn feature_name(j: usize, n_features: usize) -> String {
    if n_features == N_FEATURES {
        FEATURE_NAMES[j].to_string()
    } else {
        format!("f{j}")
    }
}

pub fn permutation_importance(
    model: &RandomForest,
    ds: &LabeledDataset,
    seed: u64,
) -> Result<ImportanceReport, ForestError> {
    permutation_importance_with(model, ds, seed, Exec::default())
}

pub fn permutation_importance_with(
    model: &RandomForest,
    ds: &LabeledDataset,
    seed: u64,
    exec: Exec,
) -> Result<ImportanceReport, ForestError> {
    model.check_dataset(ds)?;
    let n_features = ds.n_features();

    // deltas[t] = None when tree t has no OOB rows.
    let deltas: Vec<Option<Vec<f64>>> = exec.map_indexed(model.trees.len(), |t| {
        let tree = &model.trees[t];
        let oob: Vec<usize> = (0..ds.len()).filter(|&i| model.oob_masks[t][i]).collect();
        if oob.is_empty() {
            return None;
        }
        let n = oob.len() as f64;
        let base_wrong = oob
            .iter()
            .filter(|&&i| tree.predict(ds.row(i)) != ds.label(i))
            .count();
        let base = base_wrong as f64 / n;
        let mut x = vec![0.0; n_features];
        let per_feature = (0..n_features)
            .map(|j| {
                let mut column: Vec<f64> = oob.iter().map(|&i| ds.row(i)[j]).collect();
                column.shuffle(&mut seed::rng(seed::derive_path(seed, &[t as u64, j as u64])));
                let wrong = oob
                    .iter()
                    .zip(&column)
                    .filter(|&(&i, &v)| {
                        x.copy_from_slice(ds.row(i));
                        x[j] = v;
                        tree.predict(&x) != ds.label(i)
                    })
                    .count();
                wrong as f64 / n - base
            })
            .collect();
        Some(per_feature)
    });

    let used: Vec<&Vec<f64>> = deltas.iter().flatten().collect();
    if used.is_empty() {
        return Err(ForestError::NoOobRows);
    }
    let features = (0..n_features)
        .map(|j| {
            let d: Vec<f64> = used.iter().map(|v| v[j]).collect();
            let mean_delta = stats::mean(&d);
            let std_delta = stats::sample_std(&d);
            let score = if std_delta > 0.0 {
                mean_delta / std_delta
            } else {
                0.0
            };
            FeatureImportance {
                feature: feature_name(j, n_features),
                mean_delta,
                std_delta,
                score,
            }
        })
        .collect();
    Ok(ImportanceReport {
        features,
        trees_used: used.len(),
    })
}
