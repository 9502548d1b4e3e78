//! Versioned JSON model format.
//!
//! Thresholds are written as strings holding 17 significant digits, which
//! round-trip every `f64` exactly; out-of-bag masks are bitstrings with `1`
//! marking an out-of-bag row. Serialization is deterministic, so a given
//! model always produces the same bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DecisionTree, ForestError, Node, RandomForest, TrainConfig};

pub const MODEL_FORMAT: &str = "minerscope-forest";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    n_features: usize,
    class_names: Vec<String>,
    config: TrainConfig,
    #[serde(default)]
    meta: BTreeMap<String, String>,
    trees: Vec<TreeDoc>,
    oob_masks: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NodeDoc {
    Split {
        feature: usize,
        threshold: String,
        left: usize,
        right: usize,
    },
    Leaf(Vec<u32>),
}

/// Only the version is read first so that future formats are rejected with
/// a version error rather than a schema error.
#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

fn corrupt(msg: impl Into<String>) -> ForestError {
    ForestError::Corrupt(msg.into())
}

impl RandomForest {
    pub fn to_json(&self) -> String {
        let trees = self
            .trees
            .iter()
            .map(|t| TreeDoc {
                nodes: t
                    .nodes()
                    .iter()
                    .map(|n| match n {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => NodeDoc::Split {
                            feature: *feature,
                            threshold: format!("{threshold:.16e}"),
                            left: *left,
                            right: *right,
                        },
                        Node::Leaf { counts } => NodeDoc::Leaf(counts.clone()),
                    })
                    .collect(),
            })
            .collect();
        let oob_masks = self
            .oob_masks
            .iter()
            .map(|m| m.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect();
        let doc = ModelDoc {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            n_features: self.n_features,
            class_names: self.class_names.clone(),
            config: self.config.clone(),
            meta: self.meta.clone(),
            trees,
            oob_masks,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
        s.push('\n');
        s
    }

    /// Parse and validate a model document.
    pub fn from_json(text: &str) -> Result<RandomForest, ForestError> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != MODEL_VERSION {
            return Err(ForestError::UnsupportedVersion(probe.version));
        }
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(corrupt(format!("unknown format `{}`", doc.format)));
        }
        let n_classes = doc.class_names.len();
        if n_classes < 2 {
            return Err(corrupt("fewer than two classes"));
        }
        if doc.n_features == 0 {
            return Err(corrupt("zero features"));
        }
        if doc.trees.is_empty() || doc.trees.len() != doc.config.n_trees {
            return Err(corrupt(format!(
                "{} trees stored, config says {}",
                doc.trees.len(),
                doc.config.n_trees
            )));
        }
        if doc.oob_masks.len() != doc.trees.len() {
            return Err(corrupt("one out-of-bag mask per tree required"));
        }

        let mut trees = Vec::with_capacity(doc.trees.len());
        for (t, tree) in doc.trees.into_iter().enumerate() {
            let len = tree.nodes.len();
            if len == 0 {
                return Err(corrupt(format!("tree {t} is empty")));
            }
            let mut nodes = Vec::with_capacity(len);
            for (i, node) in tree.nodes.into_iter().enumerate() {
                nodes.push(match node {
                    NodeDoc::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let threshold: f64 = threshold
                            .parse()
                            .ok()
                            .filter(|v: &f64| v.is_finite())
                            .ok_or_else(|| corrupt(format!("tree {t} node {i}: bad threshold")))?;
                        if feature >= doc.n_features {
                            return Err(corrupt(format!("tree {t} node {i}: feature out of range")));
                        }
                        if left <= i || right <= i || left >= len || right >= len {
                            return Err(corrupt(format!("tree {t} node {i}: bad child index")));
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        }
                    }
                    NodeDoc::Leaf(counts) => {
                        if counts.len() != n_classes || counts.iter().all(|&c| c == 0) {
                            return Err(corrupt(format!("tree {t} node {i}: bad leaf counts")));
                        }
                        Node::Leaf { counts }
                    }
                });
            }
            trees.push(DecisionTree::from_nodes(nodes));
        }

        let mut oob_masks = Vec::with_capacity(doc.oob_masks.len());
        for bits in &doc.oob_masks {
            let mask = bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(corrupt("out-of-bag mask must be a bitstring")),
                })
                .collect::<Result<Vec<bool>, _>>()?;
            oob_masks.push(mask);
        }
        if oob_masks.iter().any(|m| m.len() != oob_masks[0].len()) {
            return Err(corrupt("out-of-bag masks differ in length"));
        }

        Ok(RandomForest {
            trees,
            oob_masks,
            class_names: doc.class_names,
            n_features: doc.n_features,
            config: doc.config,
            meta: doc.meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledDataset;
    use crate::forest::train;

    fn model() -> RandomForest {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64 * 0.1, (i % 7) as f64 / 3.0])
            .collect();
        let labels = (0..40).map(|i| usize::from(i % 7 > 2)).collect();
        let ds = LabeledDataset::from_rows(&rows, labels, vec!["A".into(), "B".into()]).unwrap();
        let mut f = train(
            &ds,
            &TrainConfig {
                n_trees: 5,
                seed: 3,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        f.meta.insert("window".into(), "5".into());
        f
    }

    #[test]
    fn round_trip_is_exact() {
        let f = model();
        let text = f.to_json();
        let back = RandomForest::from_json(&text).unwrap();
        assert_eq!(f, back);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_other_versions() {
        let text = model().to_json().replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            RandomForest::from_json(&text),
            Err(ForestError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn rejects_truncated_and_tampered() {
        let text = model().to_json();
        assert!(matches!(
            RandomForest::from_json(&text[..text.len() / 2]),
            Err(ForestError::Json(_))
        ));
        let bad_child = text.replacen("\"left\": 1", "\"left\": 0", 1);
        if bad_child != text {
            assert!(matches!(
                RandomForest::from_json(&bad_child),
                Err(ForestError::Corrupt(_))
            ));
        }
    }

    #[test]
    fn thresholds_use_seventeen_digits() {
        let text = model().to_json();
        let line = text.lines().find(|l| l.contains("\"threshold\"")).unwrap();
        let value = line.split('"').nth(3).unwrap();
        let mantissa = value.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{value}");
    }
}
