//! Captured traffic: packet records, directional traces, truncation and
//! quantile summaries.
//!
//! Timestamps are kept as integer nanoseconds relative to the first packet
//! of a capture. pcap input only carries microseconds, so pcap-derived
//! traces are exact; the extra resolution lets synthetic traces with
//! sub-microsecond interarrivals survive a CSV round trip and makes
//! time-shift invariance exact.

mod csv;
mod pcap;
mod subnet;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;

pub use self::csv::{parse_canonical_csv, write_canonical_csv, CsvError, CSV_HEADER};
pub use self::pcap::{parse_pcap, PcapCapture, PcapError, PcapStats};
pub use self::subnet::{Subnet, SubnetParseError};

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// Traffic from the Internet towards the monitored device.
    #[serde(rename = "in")]
    Ingoing,
    /// Traffic generated by the monitored device.
    #[serde(rename = "out")]
    Outgoing,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Ingoing, Direction::Outgoing];

    /// Short tag used in file names and the canonical CSV.
    pub fn tag(self) -> &'static str {
        match self {
            Direction::Ingoing => "in",
            Direction::Outgoing => "out",
        }
    }

    pub fn from_tag(s: &str) -> Option<Direction> {
        match s {
            "in" => Some(Direction::Ingoing),
            "out" => Some(Direction::Outgoing),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ingoing => "Ingoing",
            Direction::Outgoing => "Outgoing",
        })
    }
}

/// One captured packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    /// Nanoseconds since the first packet of the capture.
    pub t_rel_ns: u64,
    /// Frame length on the wire, in bytes.
    pub size: u16,
    pub direction: Direction,
}

impl PacketRecord {
    pub fn new(t_rel_ns: u64, size: u16, direction: Direction) -> Self {
        PacketRecord {
            t_rel_ns,
            size,
            direction,
        }
    }

    pub fn t_rel_secs(&self) -> f64 {
        self.t_rel_ns as f64 / NANOS_PER_SEC as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    FullNode,
    Miner,
    #[default]
    Standard,
}

/// What produced a trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceLabel {
    pub application: String,
    #[serde(default)]
    pub client_kind: ClientKind,
    /// VPN provider the traffic was tunnelled through, if any.
    #[serde(default)]
    pub tunnel: Option<String>,
}

impl TraceLabel {
    pub fn new(application: impl Into<String>) -> Result<Self, TraceError> {
        let application = application.into();
        if application.trim().is_empty() {
            return Err(TraceError::EmptyApplication);
        }
        Ok(TraceLabel {
            application,
            client_kind: ClientKind::Standard,
            tunnel: None,
        })
    }

    pub fn with_kind(mut self, kind: ClientKind) -> Self {
        self.client_kind = kind;
        self
    }

    pub fn with_tunnel(mut self, tunnel: Option<String>) -> Self {
        self.tunnel = tunnel;
        self
    }

    /// Name of the class this trace belongs to: the application, followed by
    /// the tunnel name when tunnelled ("Bitcoin Express").
    pub fn class_name(&self) -> String {
        match &self.tunnel {
            Some(t) => format!("{} {}", self.application, t),
            None => self.application.clone(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("trace label needs a non-empty application name")]
    EmptyApplication,
    #[error("truncation length must be at least 1")]
    ZeroTruncation,
    #[error("need {need}, have {have}")]
    InsufficientPackets { need: usize, have: usize },
    #[error("packet {index} has direction {found}, trace is {expected}")]
    MixedDirection {
        index: usize,
        expected: Direction,
        found: Direction,
    },
    #[error("packet {index} is earlier than its predecessor")]
    Unsorted { index: usize },
}

/// The packets of one capture that travel in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalTrace {
    direction: Direction,
    packets: Vec<PacketRecord>,
    pub label: TraceLabel,
}

impl DirectionalTrace {
    /// Checks that every packet has `direction` and that timestamps do not
    /// decrease.
    pub fn new(
        direction: Direction,
        packets: Vec<PacketRecord>,
        label: TraceLabel,
    ) -> Result<Self, TraceError> {
        for (index, p) in packets.iter().enumerate() {
            if p.direction != direction {
                return Err(TraceError::MixedDirection {
                    index,
                    expected: direction,
                    found: p.direction,
                });
            }
            if index > 0 && p.t_rel_ns < packets[index - 1].t_rel_ns {
                return Err(TraceError::Unsorted { index });
            }
        }
        Ok(DirectionalTrace {
            direction,
            packets,
            label,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn packets(&self) -> &[PacketRecord] {
        &self.packets
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Shift every timestamp by `delta_ns` nanoseconds.
    pub fn shifted(&self, delta_ns: u64) -> DirectionalTrace {
        let packets = self
            .packets
            .iter()
            .map(|p| PacketRecord {
                t_rel_ns: p.t_rel_ns + delta_ns,
                ..*p
            })
            .collect();
        DirectionalTrace {
            direction: self.direction,
            packets,
            label: self.label.clone(),
        }
    }

    /// Keep the first `n` packets and rebase them so the first is at 0.
    /// Never pads: a shorter trace is an error.
    pub fn truncate(&self, n: usize) -> Result<DirectionalTrace, TraceError> {
        if n == 0 {
            return Err(TraceError::ZeroTruncation);
        }
        if self.packets.len() < n {
            return Err(TraceError::InsufficientPackets {
                need: n,
                have: self.packets.len(),
            });
        }
        let base = self.packets[0].t_rel_ns;
        let packets = self.packets[..n]
            .iter()
            .map(|p| PacketRecord {
                t_rel_ns: p.t_rel_ns - base,
                ..*p
            })
            .collect();
        Ok(DirectionalTrace {
            direction: self.direction,
            packets,
            label: self.label.clone(),
        })
    }

    /// Interarrival times in seconds; `n - 1` values.
    pub fn interarrivals(&self) -> Result<Vec<f64>, TraceError> {
        if self.packets.len() < 2 {
            return Err(TraceError::InsufficientPackets {
                need: 2,
                have: self.packets.len(),
            });
        }
        Ok(self
            .packets
            .windows(2)
            .map(|w| (w[1].t_rel_ns - w[0].t_rel_ns) as f64 / NANOS_PER_SEC as f64)
            .collect())
    }

    pub fn summarize(&self) -> Result<TraceSummary, TraceError> {
        let dts = stats::sorted(&self.interarrivals()?);
        let sizes: Vec<f64> = self.packets.iter().map(|p| f64::from(p.size)).collect();
        let sizes = stats::sorted(&sizes);
        let first = self.packets[0].t_rel_ns;
        let last = self.packets[self.packets.len() - 1].t_rel_ns;
        Ok(TraceSummary {
            duration: (last - first) as f64 / NANOS_PER_SEC as f64,
            n_packets: self.packets.len(),
            interarrival: Quantiles::of_sorted(&dts),
            size: Quantiles::of_sorted(&sizes),
        })
    }
}

/// Split a capture into its ingoing and outgoing traces, preserving order.
pub fn split_directions(
    packets: &[PacketRecord],
    label: &TraceLabel,
) -> (DirectionalTrace, DirectionalTrace) {
    let (ingoing, outgoing): (Vec<_>, Vec<_>) = packets
        .iter()
        .partition(|p| p.direction == Direction::Ingoing);
    (
        DirectionalTrace {
            direction: Direction::Ingoing,
            packets: ingoing,
            label: label.clone(),
        },
        DirectionalTrace {
            direction: Direction::Outgoing,
            packets: outgoing,
            label: label.clone(),
        },
    )
}

/// Candle-stick marks of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    fn of_sorted(sorted: &[f64]) -> Quantiles {
        Quantiles {
            min: sorted[0],
            q05: stats::quantile_sorted(sorted, 0.05),
            q50: stats::quantile_sorted(sorted, 0.5),
            q95: stats::quantile_sorted(sorted, 0.95),
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// Seconds between the first and last packet.
    pub duration: f64,
    pub n_packets: usize,
    /// Interarrival times, seconds.
    pub interarrival: Quantiles,
    /// Packet sizes, bytes.
    pub size: Quantiles,
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    fn label() -> TraceLabel {
        TraceLabel::new("Test").unwrap()
    }

    fn trace(times_ns: &[u64], sizes: &[u16]) -> DirectionalTrace {
        let packets = times_ns
            .iter()
            .zip(sizes)
            .map(|(&t, &s)| PacketRecord::new(t, s, Ingoing))
            .collect();
        DirectionalTrace::new(Ingoing, packets, label()).unwrap()
    }

    #[test]
    fn split_partitions_by_direction() {
        let pk = [
            PacketRecord::new(0, 60, Ingoing),
            PacketRecord::new(1, 60, Outgoing),
            PacketRecord::new(2, 60, Ingoing),
        ];
        let (i, o) = split_directions(&pk, &label());
        assert_eq!(i.len(), 2);
        assert_eq!(o.len(), 1);
        assert_eq!(i.direction(), Ingoing);

        let all_out = [PacketRecord::new(0, 60, Outgoing)];
        let (i, o) = split_directions(&all_out, &label());
        assert!(i.is_empty());
        assert_eq!(o.len(), 1);

        let (i, o) = split_directions(&[], &label());
        assert!(i.is_empty() && o.is_empty());
    }

    #[test]
    fn truncate_rebases_and_never_pads() {
        let times: Vec<u64> = (0..5000u64).map(|i| 1_000 + i * 500).collect();
        let sizes = vec![100u16; 5000];
        let t = trace(&times, &sizes).truncate(20).unwrap();
        assert_eq!(t.len(), 20);

        let long = trace(&times, &sizes);
        let cut = long.truncate(4576).unwrap();
        assert_eq!(cut.len(), 4576);
        assert_eq!(cut.packets()[0].t_rel_ns, 0);
        assert_eq!(cut.packets()[1].t_rel_ns, 500);

        let same = long.truncate(5000).unwrap();
        assert_eq!(same.packets()[4999].t_rel_ns, 4999 * 500);

        let short = trace(&times[..100], &sizes[..100]);
        let err = short.truncate(832).unwrap_err();
        assert_eq!(err.to_string(), "need 832, have 100");
        assert_eq!(short.truncate(0).unwrap_err(), TraceError::ZeroTruncation);
    }

    #[test]
    fn summarize_hand_example() {
        let t = trace(&[0, NANOS_PER_SEC, 3 * NANOS_PER_SEC], &[10, 20, 30]);
        let s = t.summarize().unwrap();
        assert_eq!(s.duration, 3.0);
        assert_eq!(s.n_packets, 3);
        assert_eq!(s.interarrival.q50, 1.5);
        assert_eq!(s.interarrival.min, 1.0);
        assert_eq!(s.interarrival.max, 2.0);
        assert_eq!(s.size.q50, 20.0);
    }

    #[test]
    fn summarize_constant_series() {
        let times: Vec<u64> = (0..50).map(|i| i * NANOS_PER_SEC).collect();
        let s = trace(&times, &[100; 50]).summarize().unwrap();
        let dt = s.interarrival;
        for v in [dt.min, dt.q05, dt.q50, dt.q95, dt.max] {
            assert_eq!(v, 1.0);
        }
        let sz = s.size;
        for v in [sz.min, sz.q05, sz.q50, sz.q95, sz.max] {
            assert_eq!(v, 100.0);
        }
    }

    #[test]
    fn summarize_needs_two_packets() {
        assert!(trace(&[0], &[1]).summarize().is_err());
    }

    #[test]
    fn constructor_rejects_mixed_or_unsorted() {
        let mixed = vec![
            PacketRecord::new(0, 1, Ingoing),
            PacketRecord::new(1, 1, Outgoing),
        ];
        assert!(matches!(
            DirectionalTrace::new(Ingoing, mixed, label()),
            Err(TraceError::MixedDirection { index: 1, .. })
        ));
        let unsorted = vec![
            PacketRecord::new(5, 1, Ingoing),
            PacketRecord::new(1, 1, Ingoing),
        ];
        assert_eq!(
            DirectionalTrace::new(Ingoing, unsorted, label()).unwrap_err(),
            TraceError::Unsorted { index: 1 }
        );
    }

    #[test]
    fn class_name_includes_tunnel() {
        let l = TraceLabel::new("Bitcoin")
            .unwrap()
            .with_tunnel(Some("Express".into()));
        assert_eq!(l.class_name(), "Bitcoin Express");
        assert!(TraceLabel::new("  ").is_err());
    }
}
