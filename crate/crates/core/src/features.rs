//! Per-packet features of a directional trace.
//!
//! Each row pairs one interarrival time with the size of the later packet,
//! and carries the moving mean and population standard deviation of both
//! series over a trailing window of `w` rows. Windows shrink at the start
//! of the trace, so every statistic only looks at packets that have
//! already arrived.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{DirectionalTrace, TraceError, TraceLabel};

pub const N_FEATURES: usize = 6;

/// Column names in row order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = ["dt", "sz", "mm_dt", "sd_dt", "mm_sz", "sd_sz"];

pub const FEATURE_CSV_HEADER: &str = "dt,sz,mm_dt,sd_dt,mm_sz,sd_sz,label";

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("moving statistic of an empty series")]
    EmptySeries,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    w: usize,
}

impl WindowConfig {
    pub fn new(w: usize) -> Result<Self, FeatureError> {
        if w == 0 {
            return Err(FeatureError::ZeroWindow);
        }
        Ok(WindowConfig { w })
    }

    pub fn w(self) -> usize {
        self.w
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { w: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MovingKind {
    Mean,
    Std,
}

/// Trailing moving statistic: element `i` summarizes
/// `series[i + 1 - min(w, i + 1) ..= i]`.
pub fn moving_stat(series: &[f64], w: usize, kind: MovingKind) -> Result<Vec<f64>, FeatureError> {
    if w == 0 {
        return Err(FeatureError::ZeroWindow);
    }
    if series.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    Ok((0..series.len())
        .map(|i| {
            let window = &series[(i + 1).saturating_sub(w)..=i];
            let n = window.len() as f64;
            let mean = window.iter().sum::<f64>() / n;
            match kind {
                MovingKind::Mean => mean,
                MovingKind::Std => {
                    if window.len() == 1 {
                        0.0
                    } else {
                        (window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
                    }
                }
            }
        })
        .collect())
}

/// One classifier observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Interarrival time, seconds.
    pub dt: f64,
    /// Size of the later packet, bytes.
    pub sz: f64,
    pub mm_dt: f64,
    pub sd_dt: f64,
    pub mm_sz: f64,
    pub sd_sz: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; N_FEATURES] {
        [self.dt, self.sz, self.mm_dt, self.sd_dt, self.mm_sz, self.sd_sz]
    }

    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        FeatureVector {
            dt: a[0],
            sz: a[1],
            mm_dt: a[2],
            sd_dt: a[3],
            mm_sz: a[4],
            sd_sz: a[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub source_label: TraceLabel,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Write rows as `dt,sz,mm_dt,sd_dt,mm_sz,sd_sz,label` with the class
    /// name in the label column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{FEATURE_CSV_HEADER}")?;
        let label = self.source_label.class_name();
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.dt, r.sz, r.mm_dt, r.sd_dt, r.mm_sz, r.sd_sz, label
            )?;
        }
        Ok(())
    }
}

/// Interarrival times of a trace, in seconds.
pub fn interarrivals(trace: &DirectionalTrace) -> Result<Vec<f64>, FeatureError> {
    Ok(trace.interarrivals()?)
}

pub fn featurize(trace: &DirectionalTrace, cfg: WindowConfig) -> Result<FeatureMatrix, FeatureError> {
    let dt = interarrivals(trace)?;
    let sz: Vec<f64> = trace.packets()[1..]
        .iter()
        .map(|p| f64::from(p.size))
        .collect();
    let w = cfg.w();
    let mm_dt = moving_stat(&dt, w, MovingKind::Mean)?;
    let sd_dt = moving_stat(&dt, w, MovingKind::Std)?;
    let mm_sz = moving_stat(&sz, w, MovingKind::Mean)?;
    let sd_sz = moving_stat(&sz, w, MovingKind::Std)?;
    let rows = (0..dt.len())
        .map(|i| FeatureVector {
            dt: dt[i],
            sz: sz[i],
            mm_dt: mm_dt[i],
            sd_dt: sd_dt[i],
            mm_sz: mm_sz[i],
            sd_sz: sd_sz[i],
        })
        .collect();
    Ok(FeatureMatrix {
        rows,
        source_label: trace.label.clone(),
    })
}
