//! Classic (libpcap 2.4) capture reader.
//!
//! Only the metadata needed for traffic fingerprinting is extracted: the
//! record timestamp, the original frame length and the direction implied
//! by the IP source address.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use thiserror::Error;

use super::{Direction, PacketRecord, Subnet};

const MAGIC_USEC: u32 = 0xA1B2_C3D4;
const MAGIC_NSEC: u32 = 0xA1B2_3C4D;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const LINKTYPE_ETHERNET: u32 = 1;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86DD;
const ETHERTYPE_VLAN: u16 = 0x8100;

#[derive(Debug, Error, PartialEq)]
pub enum PcapError {
    #[error("not a pcap file")]
    BadMagic,
    #[error("nanosecond-resolution pcap is not supported")]
    NanosecondPcap,
    #[error("unsupported link type {0} (only Ethernet is supported)")]
    UnsupportedLinkType(u32),
    #[error("truncated pcap global header")]
    TruncatedHeader,
    #[error("truncated record at byte offset {offset}")]
    TruncatedRecord { offset: usize },
    #[error("record at byte offset {offset} has frame length {len} > 65535")]
    OversizedFrame { offset: usize, len: u32 },
}

/// Counters for frames that were not turned into packet records, plus
/// direction corner cases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PcapStats {
    pub records: usize,
    /// Frames whose (possibly VLAN-unwrapped) ethertype is neither IPv4 nor IPv6.
    pub skipped_non_ip: usize,
    /// Frames with more than one stacked VLAN tag.
    pub skipped_vlan_depth: usize,
    /// IP frames whose captured bytes end before the addresses.
    pub skipped_short: usize,
    /// Packets whose source and destination are both local (tagged Outgoing).
    pub local_to_local: usize,
    /// Records whose timestamp precedes the previous record's.
    pub reordered: usize,
}

impl PcapStats {
    pub fn skipped(&self) -> usize {
        self.skipped_non_ip + self.skipped_vlan_depth + self.skipped_short
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcapCapture {
    pub packets: Vec<PacketRecord>,
    pub stats: PcapStats,
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }
}

/// Parse a classic pcap stream. Timestamps are rebased so the earliest
/// packet is at 0; records are stably sorted by time.
pub fn parse_pcap(bytes: &[u8], local: &Subnet) -> Result<PcapCapture, PcapError> {
    if bytes.len() < 4 {
        return Err(PcapError::BadMagic);
    }
    let magic = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let endian = match magic {
        MAGIC_USEC => Endian::Little,
        m if m.swap_bytes() == MAGIC_USEC => Endian::Big,
        m if m == MAGIC_NSEC || m.swap_bytes() == MAGIC_NSEC => {
            return Err(PcapError::NanosecondPcap)
        }
        _ => return Err(PcapError::BadMagic),
    };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::TruncatedHeader);
    }
    let network = endian.u32(&bytes[20..24]);
    if network != LINKTYPE_ETHERNET {
        return Err(PcapError::UnsupportedLinkType(network));
    }

    let mut stats = PcapStats::default();
    let mut stamped: Vec<(u64, u16, Direction)> = Vec::new();
    let mut offset = GLOBAL_HEADER_LEN;
    let mut last_us = 0u64;
    while offset < bytes.len() {
        let header = bytes
            .get(offset..offset + RECORD_HEADER_LEN)
            .ok_or(PcapError::TruncatedRecord { offset })?;
        let ts_sec = u64::from(endian.u32(&header[0..4]));
        let ts_usec = u64::from(endian.u32(&header[4..8]));
        let incl_len = endian.u32(&header[8..12]) as usize;
        let orig_len = endian.u32(&header[12..16]);
        let data_start = offset + RECORD_HEADER_LEN;
        let frame = bytes
            .get(data_start..data_start + incl_len)
            .ok_or(PcapError::TruncatedRecord { offset })?;
        let size = u16::try_from(orig_len).map_err(|_| PcapError::OversizedFrame {
            offset,
            len: orig_len,
        })?;
        stats.records += 1;
        offset = data_start + incl_len;

        let (src, dst) = match addresses(frame) {
            Frame::Ip(src, dst) => (src, dst),
            Frame::NonIp => {
                stats.skipped_non_ip += 1;
                continue;
            }
            Frame::DeepVlan => {
                stats.skipped_vlan_depth += 1;
                continue;
            }
            Frame::Short => {
                stats.skipped_short += 1;
                continue;
            }
        };
        let direction = if local.contains(src) {
            if local.contains(dst) {
                stats.local_to_local += 1;
            }
            Direction::Outgoing
        } else {
            Direction::Ingoing
        };
        let t_us = ts_sec * 1_000_000 + ts_usec;
        if !stamped.is_empty() && t_us < last_us {
            stats.reordered += 1;
        }
        last_us = t_us;
        stamped.push((t_us, size, direction));
    }

    stamped.sort_by_key(|&(t, _, _)| t);
    let base = stamped.first().map_or(0, |&(t, _, _)| t);
    let packets = stamped
        .into_iter()
        .map(|(t, size, dir)| PacketRecord::new((t - base) * 1_000, size, dir))
        .collect();
    Ok(PcapCapture { packets, stats })
}

enum Frame {
    Ip(IpAddr, IpAddr),
    NonIp,
    DeepVlan,
    Short,
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn addresses(frame: &[u8]) -> Frame {
    if frame.len() < 14 {
        return Frame::Short;
    }
    let mut ethertype = be16(&frame[12..14]);
    let mut payload = &frame[14..];
    if ethertype == ETHERTYPE_VLAN {
        if payload.len() < 4 {
            return Frame::Short;
        }
        ethertype = be16(&payload[2..4]);
        payload = &payload[4..];
        if ethertype == ETHERTYPE_VLAN || ethertype == 0x88A8 {
            return Frame::DeepVlan;
        }
    }
    match ethertype {
        ETHERTYPE_IPV4 => {
            if payload.len() < 20 {
                return Frame::Short;
            }
            let src = Ipv4Addr::new(payload[12], payload[13], payload[14], payload[15]);
            let dst = Ipv4Addr::new(payload[16], payload[17], payload[18], payload[19]);
            Frame::Ip(src.into(), dst.into())
        }
        ETHERTYPE_IPV6 => {
            if payload.len() < 40 {
                return Frame::Short;
            }
            let mut s = [0u8; 16];
            let mut d = [0u8; 16];
            s.copy_from_slice(&payload[8..24]);
            d.copy_from_slice(&payload[24..40]);
            Frame::Ip(Ipv6Addr::from(s).into(), Ipv6Addr::from(d).into())
        }
        _ => Frame::NonIp,
    }
}
