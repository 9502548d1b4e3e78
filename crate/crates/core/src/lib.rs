//! Detection and identification of cryptocurrency clients (full nodes and
//! pool miners) from encrypted traffic metadata.
//!
//! The pipeline is:
//!
//! 1. [`trace`]: ingest pcap or canonical CSV captures into per-direction
//!    packet sequences, truncate them to equal lengths and summarize them.
//! 2. [`features`]: turn each directional trace into per-packet rows of six
//!    features (interarrival, size, and trailing moving mean/std of both).
//! 3. [`dataset`]: assemble labeled, class-balanced datasets, relabel them
//!    for the binary crypto-vs-standard task and cut k-fold partitions.
//! 4. [`forest`]: a random forest of Gini CART trees with bootstrap bagging,
//!    out-of-bag error and permutation importance.
//! 5. [`metrics`]: confusion matrices, rates, ROC/AUC, F1 and detection
//!    latency.
//!
//! [`synth`] generates labeled traces calibrated to published per-trace
//! medians, and [`eval`] wires the stages into cross-validation runs.
//!
//! Tree training and fold evaluation run on rayon when the `parallel`
//! feature is enabled (the default); results are identical either way.

pub mod dataset;
pub mod eval;
pub mod features;
pub mod forest;
pub mod metrics;
pub mod par;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod trace;

pub use dataset::{FoldPartition, LabeledDataset};
pub use features::{FeatureMatrix, FeatureVector, WindowConfig};
pub use forest::{RandomForest, TrainConfig};
pub use metrics::{ConfusionMatrix, EvalReport, RocCurve};
pub use par::Exec;
pub use trace::{Direction, DirectionalTrace, PacketRecord, TraceLabel};
