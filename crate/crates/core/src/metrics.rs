//! Confusion matrices, rate metrics, ROC/AUC, F1 and detection latency.
//!
//! Multiclass rates are one-vs-rest: for class `c`, rows of class `c` are
//! the positives and every other row is a negative.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{predicted} predictions for {actual} labels")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("label {0} is outside the class table")]
    UnknownLabel(usize),
    #[error("ROC needs both positive and negative rows")]
    OneClass,
    #[error("score {0} outside [0, 1]")]
    ScoreRange(f64),
}

/// Full `k x k` confusion counts (`counts[actual][predicted]`) with a
/// designated positive class for the binary view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub positive: usize,
}

/// One-vs-rest counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Count predictions against actual labels (both as class indices into
/// `class_names`).
pub fn confusion(
    predicted: &[usize],
    actual: &[usize],
    class_names: &[String],
    positive: usize,
) -> Result<ConfusionMatrix, MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    let k = class_names.len();
    if positive >= k {
        return Err(MetricsError::UnknownLabel(positive));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &a) in predicted.iter().zip(actual) {
        if p >= k {
            return Err(MetricsError::UnknownLabel(p));
        }
        if a >= k {
            return Err(MetricsError::UnknownLabel(a));
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
        positive,
    })
}

impl ConfusionMatrix {
    /// A two-class matrix from published counts. Class 0 is `positive`.
    pub fn from_binary_counts(c: BinaryCounts, positive: &str, negative: &str) -> Self {
        ConfusionMatrix {
            class_names: vec![positive.to_string(), negative.to_string()],
            counts: vec![vec![c.tp, c.fn_], vec![c.fp, c.tn]],
            positive: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// One-vs-rest collapse for class `c`.
    pub fn one_vs_rest(&self, c: usize) -> BinaryCounts {
        let k = self.class_names.len();
        let tp = self.counts[c][c];
        let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| self.counts[c][p]).sum();
        let fp: u64 = (0..k).filter(|&a| a != c).map(|a| self.counts[a][c]).sum();
        BinaryCounts {
            tp,
            tn: self.total() - tp - fn_ - fp,
            fp,
            fn_,
        }
    }

    /// Binary view for the designated positive class.
    pub fn binary(&self) -> BinaryCounts {
        self.one_vs_rest(self.positive)
    }

    /// Element-wise sum; both matrices must share the class table.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.class_names, other.class_names, "class tables differ");
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }
}

/// Rates derived from binary counts. A rate whose denominator is zero is
/// reported as 0 and named in `degenerate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

pub fn rates(c: &BinaryCounts) -> Rates {
    let mut degenerate = Vec::new();
    let mut ratio = |name: &str, num: u64, den: u64| {
        if den == 0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let tpr = ratio("tpr", c.tp, c.tp + c.fn_);
    let fpr = ratio("fpr", c.fp, c.fp + c.tn);
    let precision = ratio("precision", c.tp, c.tp + c.fp);
    let recall = tpr;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate.push("f1".to_string());
        0.0
    };
    Rates {
        tpr,
        fpr,
        precision,
        recall,
        f1,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Threshold producing each point; a row is positive iff its score is
    /// `>=` the threshold.
    pub thresholds: Vec<f64>,
}

/// ROC curve of positive-class scores. Thresholds sweep the distinct score
/// values from high to low after one sentinel above the maximum, which
/// gives the (0, 0) point. Consecutive duplicate points are dropped.
pub fn roc(scores: &[f64], is_positive: &[bool]) -> Result<RocCurve, MetricsError> {
    if scores.len() != is_positive.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: scores.len(),
            actual: is_positive.len(),
        });
    }
    if let Some(&s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MetricsError::ScoreRange(s));
    }
    let pos = is_positive.iter().filter(|&&p| p).count();
    let neg = is_positive.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::OneClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![scores[order[0]] + 1.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if is_positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let p = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        if points.last() != Some(&p) {
            points.push(p);
            thresholds.push(t);
        }
    }
    // The lowest distinct score already selects every row: (1, 1).
    Ok(RocCurve { points, thresholds })
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "fpr,tpr")?;
        for (f, t) in &self.points {
            writeln!(w, "{f},{t}")?;
        }
        Ok(())
    }
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Time to fill one causal feature window of `w` packets at the median
/// interarrival rate.
///
/// The product is rounded to 15 significant digits (the decimal precision an
/// `f64` always carries), so decimal medians give decimal-exact results:
/// `5 * 13.97` is `69.85`, not `69.85000000000001`.
pub fn latency_estimate(median_dt: f64, w: usize) -> f64 {
    let raw = w as f64 * median_dt;
    if raw == 0.0 || !raw.is_finite() {
        return raw;
    }
    format!("{raw:.14e}").parse().unwrap_or(raw)
}

/// Binary evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub positive: String,
    pub confusion: BinaryCounts,
    #[serde(flatten)]
    pub rates: Rates,
    /// Absent when only counts were available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocCurve>,
}

impl EvalReport {
    pub fn from_counts(positive: &str, counts: BinaryCounts) -> Self {
        EvalReport {
            positive: positive.to_string(),
            confusion: counts,
            rates: rates(&counts),
            auc: None,
            roc: None,
        }
    }

    pub fn with_roc(mut self, curve: RocCurve) -> Self {
        self.auc = Some(auc(&curve));
        self.roc = Some(curve);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["Crypto".into(), "Standard".into()]
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn perfect_and_inverted_predictions() {
        let actual = [0, 0, 0];
        let cm = confusion(&actual, &actual, &names(), 0).unwrap();
        let b = cm.binary();
        assert_eq!((b.fp, b.fn_), (0, 0));

        let actual = [0, 1, 0, 1];
        let inverted = [1, 0, 1, 0];
        let b = confusion(&inverted, &actual, &names(), 0).unwrap().binary();
        assert_eq!((b.tp, b.tn), (0, 0));
    }

    #[test]
    fn baseline_scenario_counts() {
        // Positive = class 0.
        let mut actual = Vec::new();
        let mut predicted = Vec::new();
        for (a, p, n) in [(1, 1, 4321), (1, 0, 254), (0, 1, 261), (0, 0, 4314)] {
            actual.extend(std::iter::repeat_n(a, n));
            predicted.extend(std::iter::repeat_n(p, n));
        }
        let b = confusion(&predicted, &actual, &names(), 0).unwrap().binary();
        assert_eq!(
            b,
            BinaryCounts {
                tp: 4314,
                tn: 4321,
                fp: 254,
                fn_: 261
            }
        );
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(matches!(
            confusion(&[0], &[0, 1], &names(), 0),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rates_from_published_counts() {
        let r = rates(&BinaryCounts {
            tp: 4314,
            tn: 4321,
            fp: 254,
            fn_: 261,
        });
        assert!(close(r.tpr, 0.9430, 5e-4));
        assert!(close(r.fpr, 0.0555, 5e-4));

        let r = rates(&BinaryCounts {
            tp: 290728,
            tn: 288452,
            fp: 10255,
            fn_: 7979,
        });
        assert!(close(r.precision, 0.9659, 5e-4));
        assert!(close(r.recall, 0.9733, 5e-4));
        assert!(close(r.f1, 0.9696, 5e-4));
        assert!(r.degenerate.is_empty());
    }

    #[test]
    fn degenerate_rates_are_flagged() {
        let r = rates(&BinaryCounts {
            tp: 0,
            tn: 5,
            fp: 0,
            fn_: 0,
        });
        assert_eq!(r.tpr, 0.0);
        assert!(r.degenerate.contains(&"tpr".to_string()));
        assert!(r.degenerate.contains(&"f1".to_string()));
    }

    #[test]
    fn one_vs_rest_consistent_with_matrix() {
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let actual = [0, 0, 1, 1, 2, 2, 2];
        let pred = [0, 1, 1, 2, 2, 0, 2];
        let cm = confusion(&pred, &actual, &names, 2).unwrap();
        let b = cm.binary();
        assert_eq!(b, BinaryCounts { tp: 2, tn: 3, fp: 1, fn_: 1 });
        assert_eq!(b.total(), 7);
    }

    #[test]
    fn roc_examples() {
        let perfect = roc(&[1.0, 1.0, 0.0, 0.0], &[true, true, false, false]).unwrap();
        assert!(perfect.points.contains(&(0.0, 1.0)));
        assert_eq!(auc(&perfect), 1.0);

        let flat = roc(&[0.5; 4], &[true, false, true, false]).unwrap();
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&flat), 0.5);

        assert_eq!(roc(&[0.3, 0.4], &[true, true]), Err(MetricsError::OneClass));
        assert_eq!(
            roc(&[1.5, 0.4], &[true, false]),
            Err(MetricsError::ScoreRange(1.5))
        );
    }

    #[test]
    fn auc_examples() {
        let c = |pts: Vec<(f64, f64)>| RocCurve {
            thresholds: vec![0.0; pts.len()],
            points: pts,
        };
        assert_eq!(auc(&c(vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)])), 1.0);
        assert_eq!(auc(&c(vec![(0.0, 0.0), (1.0, 1.0)])), 0.5);
        assert_eq!(auc(&c(vec![(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)])), 0.5);
    }

    #[test]
    fn latency_examples() {
        assert_eq!(latency_estimate(2.41, 5), 12.05);
        assert_eq!(latency_estimate(13.97, 5), 69.85);
        assert_eq!(latency_estimate(0.37, 1), 0.37);
    }

    #[test]
    fn roc_csv() {
        let c = roc(&[0.9, 0.1], &[true, false]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "fpr,tpr\n0,0\n0,1\n1,1\n");
    }
}
