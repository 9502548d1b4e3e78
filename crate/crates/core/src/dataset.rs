//! Labeled datasets, class balancing, binary relabeling and k-fold
//! partitions.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::features::{FeatureMatrix, FeatureVector, FEATURE_CSV_HEADER, N_FEATURES};
use crate::seed;
use crate::trace::TraceLabel;

pub const POSITIVE_CLASS: &str = "Crypto";
pub const NEGATIVE_CLASS: &str = "Standard";

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("dataset has no rows")]
    Empty,
    #[error("{rows} label(s) for {samples} sample row(s)")]
    LengthMismatch { rows: usize, samples: usize },
    #[error("sample buffer of {len} values is not a multiple of {n_features} features")]
    Ragged { len: usize, n_features: usize },
    #[error("label {label} at row {row} has no class name")]
    UnknownLabel { row: usize, label: usize },
    #[error("class names must be distinct")]
    DuplicateClass,
    #[error("class `{class}` has {have} rows, need {need}")]
    TooFewRows {
        class: String,
        need: usize,
        have: usize,
    },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("positive set must be a non-empty proper subset of the classes")]
    BadPositiveSet,
    #[error("k = {k} folds is out of range for {rows} rows (need 2 <= k <= rows)")]
    BadFoldCount { k: usize, rows: usize },
    #[error("feature CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Classifier-ready observations: a row-major sample buffer, one class
/// index per row, and the ordered class names those indices refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    n_features: usize,
    samples: Vec<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        n_features: usize,
        samples: Vec<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        if samples.len().checked_rem(n_features) != Some(0) {
            return Err(DatasetError::Ragged {
                len: samples.len(),
                n_features,
            });
        }
        let rows = samples.len() / n_features;
        if rows != labels.len() {
            return Err(DatasetError::LengthMismatch {
                rows: labels.len(),
                samples: rows,
            });
        }
        if let Some((row, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= class_names.len())
        {
            return Err(DatasetError::UnknownLabel { row, label });
        }
        let mut names = class_names.clone();
        names.sort();
        names.dedup();
        if names.len() != class_names.len() {
            return Err(DatasetError::DuplicateClass);
        }
        Ok(LabeledDataset {
            n_features,
            samples,
            labels,
            class_names,
        })
    }

    /// Build from rows of equal width.
    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut samples = Vec::with_capacity(rows.len() * n_features);
        for r in rows {
            if r.len() != n_features {
                return Err(DatasetError::Ragged {
                    len: r.len(),
                    n_features,
                });
            }
            samples.extend_from_slice(r);
        }
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        Self::new(n_features, samples, labels, class_names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.samples[row * self.n_features..(row + 1) * self.n_features]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Number of rows per class, indexed like `class_names`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Classes that actually occur in the rows.
    pub fn classes_present(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Rows at `indices` (in that order), keeping the class name table.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut samples = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            samples.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            n_features: self.n_features,
            samples,
            labels,
            class_names: self.class_names.clone(),
        }
    }

    /// Write as feature CSV (`dt,...,sd_sz,label`). Only meaningful for
    /// six-feature datasets.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{FEATURE_CSV_HEADER}")?;
        for i in 0..self.len() {
            let r = self.row(i);
            for v in r {
                write!(w, "{v},")?;
            }
            writeln!(w, "{}", self.class_names[self.labels[i]])?;
        }
        Ok(())
    }
}

/// How many rows each class contributes to an assembled dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowLimit {
    #[default]
    All,
    /// Keep exactly the first `n` rows of every class.
    PerClass(usize),
}

/// Merge feature matrices into a dataset. Matrices with the same class name
/// are concatenated in input order; classes are sorted by name and rows are
/// grouped by class.
pub fn assemble(parts: &[FeatureMatrix], limit: RowLimit) -> Result<LabeledDataset, DatasetError> {
    let mut by_class: BTreeMap<String, Vec<&FeatureVector>> = BTreeMap::new();
    for part in parts {
        by_class
            .entry(part.source_label.class_name())
            .or_default()
            .extend(part.rows.iter());
    }
    if let RowLimit::PerClass(need) = limit {
        if let Some((class, rows)) = by_class.iter().find(|(_, r)| r.len() < need) {
            return Err(DatasetError::TooFewRows {
                class: class.clone(),
                need,
                have: rows.len(),
            });
        }
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut class_names = Vec::new();
    for (idx, (name, rows)) in by_class.into_iter().enumerate() {
        let take = match limit {
            RowLimit::All => rows.len(),
            RowLimit::PerClass(n) => n,
        };
        for r in &rows[..take] {
            samples.extend_from_slice(&r.to_array());
            labels.push(idx);
        }
        class_names.push(name);
    }
    if labels.is_empty() {
        return Err(DatasetError::Empty);
    }
    LabeledDataset::new(N_FEATURES, samples, labels, class_names)
}

/// Collapse classes into `Crypto` (the classes in `positive`) versus
/// `Standard` (everything else). Rows and sample values are untouched.
pub fn binary_relabel(ds: &LabeledDataset, positive: &[&str]) -> Result<LabeledDataset, DatasetError> {
    let mut is_positive = vec![false; ds.n_classes()];
    for &name in positive {
        let idx = ds
            .class_index(name)
            .ok_or_else(|| DatasetError::UnknownClass(name.to_string()))?;
        is_positive[idx] = true;
    }
    let n_pos = is_positive.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == ds.n_classes() {
        return Err(DatasetError::BadPositiveSet);
    }
    // "Crypto" sorts before "Standard", so the positive class is index 0.
    let labels = ds
        .labels
        .iter()
        .map(|&l| if is_positive[l] { 0 } else { 1 })
        .collect();
    Ok(LabeledDataset {
        n_features: ds.n_features,
        samples: ds.samples.clone(),
        labels,
        class_names: vec![POSITIVE_CLASS.to_string(), NEGATIVE_CLASS.to_string()],
    })
}

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPartition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Rows held out in fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == f)
            .collect()
    }

    /// Rows used for training when fold `f` is held out, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != f)
            .collect()
    }
}

/// Unstratified k-fold split of `n_rows` rows: a seeded uniform permutation
/// cut into `k` contiguous chunks whose sizes differ by at most one.
pub fn kfold(n_rows: usize, k: usize, seed: u64) -> Result<FoldPartition, DatasetError> {
    if k < 2 || k > n_rows {
        return Err(DatasetError::BadFoldCount { k, rows: n_rows });
    }
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut seed::rng(seed));
    let mut assignment = vec![0; n_rows];
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &row in &perm[pos..pos + size] {
            assignment[row] = fold;
        }
        pos += size;
    }
    Ok(FoldPartition { k, assignment })
}

/// Parse a feature CSV into one matrix per run of consecutive rows sharing a
/// label.
pub fn parse_feature_csv(text: &str) -> Result<Vec<FeatureMatrix>, DatasetError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == FEATURE_CSV_HEADER => {}
        _ => {
            return Err(DatasetError::Csv {
                line: 1,
                reason: format!("expected header `{FEATURE_CSV_HEADER}`"),
            })
        }
    }
    let mut out: Vec<FeatureMatrix> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end();
        if row.is_empty() {
            continue;
        }
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != N_FEATURES + 1 {
            return Err(DatasetError::Csv {
                line,
                reason: format!("expected {} columns, found {}", N_FEATURES + 1, cols.len()),
            });
        }
        let mut values = [0.0; N_FEATURES];
        for (j, v) in values.iter_mut().enumerate() {
            *v = cols[j]
                .trim()
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| DatasetError::Csv {
                    line,
                    reason: format!("invalid {}", crate::features::FEATURE_NAMES[j]),
                })?;
        }
        let name = cols[N_FEATURES].trim();
        let label = TraceLabel::new(name).map_err(|e| DatasetError::Csv {
            line,
            reason: e.to_string(),
        })?;
        let row = FeatureVector::from_array(values);
        match out.last_mut() {
            Some(m) if m.source_label.application == name => m.rows.push(row),
            _ => out.push(FeatureMatrix {
                rows: vec![row],
                source_label: label,
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(name: &str, n: usize, offset: f64) -> FeatureMatrix {
        FeatureMatrix {
            rows: (0..n)
                .map(|i| FeatureVector::from_array([offset + i as f64, 1.0, 2.0, 3.0, 4.0, 5.0]))
                .collect(),
            source_label: TraceLabel::new(name).unwrap(),
        }
    }

    #[test]
    fn assemble_all_concatenates() {
        let parts = [
            matrix("Office", 4575, 0.0),
            matrix("Bitcoin", 4575, 0.0),
            matrix("Monero", 4575, 0.0),
        ];
        let ds = assemble(&parts, RowLimit::All).unwrap();
        assert_eq!(ds.len(), 13725);
        assert_eq!(ds.class_names(), ["Bitcoin", "Monero", "Office"]);
        assert_eq!(ds.class_counts(), vec![4575; 3]);
    }

    #[test]
    fn assemble_balances_by_prefix() {
        let parts = [matrix("A", 5000, 100.0), matrix("B", 4575, 0.0)];
        let ds = assemble(&parts, RowLimit::PerClass(4575)).unwrap();
        assert_eq!(ds.len(), 9150);
        assert_eq!(ds.class_counts(), vec![4575, 4575]);
        // First rows kept.
        assert_eq!(ds.row(0)[0], 100.0);
        assert_eq!(ds.row(4574)[0], 100.0 + 4574.0);
    }

    #[test]
    fn assemble_rejects_short_class() {
        let parts = [matrix("A", 1000, 0.0), matrix("Short", 100, 0.0)];
        assert_eq!(
            assemble(&parts, RowLimit::PerClass(831)).unwrap_err(),
            DatasetError::TooFewRows {
                class: "Short".into(),
                need: 831,
                have: 100
            }
        );
    }

    #[test]
    fn assemble_merges_same_class() {
        let parts = [matrix("A", 3, 0.0), matrix("B", 2, 0.0), matrix("A", 2, 50.0)];
        let ds = assemble(&parts, RowLimit::All).unwrap();
        assert_eq!(ds.class_counts(), vec![5, 2]);
        assert_eq!(ds.row(3)[0], 50.0);
        let ds = assemble(&parts, RowLimit::PerClass(2)).unwrap();
        assert_eq!(ds.len(), 4);
    }

    #[test]
    fn relabel_counts_and_errors() {
        let parts = [
            matrix("Bitcoin", 3, 0.0),
            matrix("Monero", 4, 0.0),
            matrix("Office", 5, 0.0),
        ];
        let ds = assemble(&parts, RowLimit::All).unwrap();
        let bin = binary_relabel(&ds, &["Bitcoin", "Monero"]).unwrap();
        assert_eq!(bin.class_names(), [POSITIVE_CLASS, NEGATIVE_CLASS]);
        assert_eq!(bin.class_counts(), vec![7, 5]);
        assert_eq!(bin.samples(), ds.samples());

        let odd = binary_relabel(&ds, &["Office"]).unwrap();
        assert_eq!(odd.class_counts(), vec![5, 7]);

        assert_eq!(binary_relabel(&ds, &[]), Err(DatasetError::BadPositiveSet));
        assert_eq!(
            binary_relabel(&ds, &["Bitcoin", "Monero", "Office"]),
            Err(DatasetError::BadPositiveSet)
        );
        assert_eq!(
            binary_relabel(&ds, &["Dogecoin"]),
            Err(DatasetError::UnknownClass("Dogecoin".into()))
        );
    }

    #[test]
    fn kfold_examples() {
        let p = kfold(9150, 10, 1).unwrap();
        assert_eq!(p.fold_sizes(), vec![915; 10]);
        let p = kfold(10, 10, 1).unwrap();
        assert_eq!(p.fold_sizes(), vec![1; 10]);
        assert_eq!(kfold(500, 10, 42).unwrap(), kfold(500, 10, 42).unwrap());
        assert_ne!(kfold(500, 10, 42).unwrap(), kfold(500, 10, 43).unwrap());
        assert!(kfold(5, 1, 0).is_err());
        assert!(kfold(5, 6, 0).is_err());
    }

    #[test]
    fn train_test_indices_complement() {
        let p = kfold(23, 4, 9).unwrap();
        for f in 0..4 {
            let mut all = p.train_indices(f);
            all.extend(p.test_indices(f));
            all.sort();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
        }
    }

    #[test]
    fn new_validates() {
        assert!(LabeledDataset::new(2, vec![1.0, 2.0, 3.0], vec![0], vec!["a".into()]).is_err());
        assert!(LabeledDataset::new(1, vec![1.0], vec![3], vec!["a".into()]).is_err());
        assert!(LabeledDataset::new(1, vec![1.0], vec![0, 0], vec!["a".into()]).is_err());
        assert_eq!(
            LabeledDataset::new(1, vec![1.0], vec![0], vec!["a".into(), "a".into()]),
            Err(DatasetError::DuplicateClass)
        );
    }

    #[test]
    fn feature_csv_round_trip() {
        let parts = [matrix("A", 3, 0.125), matrix("B", 2, 1e-7)];
        let ds = assemble(&parts, RowLimit::All).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = parse_feature_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        let ds2 = assemble(&back, RowLimit::All).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn feature_csv_errors() {
        let err = parse_feature_csv("dt,sz,mm_dt,sd_dt,mm_sz,sd_sz,label\n1,2,3,4,5,x,A\n")
            .unwrap_err();
        assert_eq!(err.to_string(), "feature CSV line 2: invalid sd_sz");
        assert!(parse_feature_csv("nope\n").is_err());
    }
}
