//! Report JSON written by `cv` and `detect`.

use std::collections::BTreeMap;

use minerscope::eval::{ClassMetrics, WindowImportance};
use minerscope::EvalReport;
use serde::{Deserialize, Serialize};

pub const REPORT_FORMAT: &str = "minerscope-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub config: RunConfig,
    pub flows: Vec<FlowReport>,
}

impl Report {
    pub fn new(command: &str, config: RunConfig) -> Report {
        Report {
            format: REPORT_FORMAT.to_string(),
            version: REPORT_VERSION,
            command: command.to_string(),
            config,
            flows: Vec::new(),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Settings a run was made with. Fields that do not apply are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_try: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positive: Vec<String>,
    /// Input name to path, as given on the command line.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    /// `in` or `out`; absent for reports built from counts alone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    pub rows: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<ClassMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub importance: Vec<WindowImportance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alert: Option<Alert>,
}

impl FlowReport {
    pub fn new(direction: Option<&str>, rows: u64) -> FlowReport {
        FlowReport {
            direction: direction.map(str::to_string),
            rows,
            classes: Vec::new(),
            per_class: Vec::new(),
            binary: None,
            importance: Vec::new(),
            alert: None,
        }
    }
}

/// Share of a target trace's rows classified as positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub rows: u64,
    pub positive_rows: u64,
    pub fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub triggered: bool,
}
