//! Canonical CSV interchange format: `t_rel_s,size_bytes,direction`.

use std::io::{self, Write};

use thiserror::Error;

use super::{Direction, PacketRecord, NANOS_PER_SEC};

pub const CSV_HEADER: &str = "t_rel_s,size_bytes,direction";

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("line 1: expected header `{CSV_HEADER}`")]
    BadHeader,
    #[error("line {line}: expected 3 columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: invalid timestamp")]
    InvalidTimestamp { line: usize },
    #[error("line {line}: invalid size")]
    InvalidSize { line: usize },
    #[error("line {line}: invalid direction (expected `in` or `out`)")]
    InvalidDirection { line: usize },
    #[error("line {line}: timestamp earlier than the previous row")]
    OutOfOrder { line: usize },
}

/// Parse a canonical CSV trace. Rows are returned in file order; the row
/// count is the length of the result. Timestamps must not decrease.
pub fn parse_canonical_csv(text: &str) -> Result<Vec<PacketRecord>, CsvError> {
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == CSV_HEADER => {}
        _ => return Err(CsvError::BadHeader),
    }
    let mut out = Vec::new();
    let mut prev = 0u64;
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 3 {
            return Err(CsvError::ColumnCount {
                line,
                found: cols.len(),
            });
        }
        let t = parse_seconds(cols[0].trim()).ok_or(CsvError::InvalidTimestamp { line })?;
        let size: u16 = cols[1]
            .trim()
            .parse()
            .map_err(|_| CsvError::InvalidSize { line })?;
        let direction =
            Direction::from_tag(cols[2].trim()).ok_or(CsvError::InvalidDirection { line })?;
        if t < prev {
            return Err(CsvError::OutOfOrder { line });
        }
        prev = t;
        out.push(PacketRecord::new(t, size, direction));
    }
    Ok(out)
}

/// Write packets in canonical CSV with nanosecond (9-digit) timestamps.
pub fn write_canonical_csv<W: Write>(packets: &[PacketRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for p in packets {
        writeln!(
            w,
            "{}.{:09},{},{}",
            p.t_rel_ns / NANOS_PER_SEC,
            p.t_rel_ns % NANOS_PER_SEC,
            p.size,
            p.direction.tag()
        )?;
    }
    Ok(())
}

/// Parse non-negative decimal seconds to nanoseconds. Plain decimals are
/// converted exactly (rounding half up beyond 9 fractional digits);
/// exponent notation goes through `f64`.
fn parse_seconds(s: &str) -> Option<u64> {
    if s.is_empty() {
        return None;
    }
    if s.contains(['e', 'E']) {
        let v: f64 = s.parse().ok()?;
        if !v.is_finite() || v < 0.0 {
            return None;
        }
        let ns = (v * NANOS_PER_SEC as f64).round();
        return (ns <= u64::MAX as f64).then_some(ns as u64);
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let secs: u64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().ok()?
    };
    let mut frac_ns = 0u64;
    for (i, b) in frac_part.bytes().take(9).enumerate() {
        frac_ns += u64::from(b - b'0') * 10u64.pow(8 - i as u32);
    }
    if frac_part.len() > 9 && frac_part.as_bytes()[9] >= b'5' {
        frac_ns += 1;
    }
    secs.checked_mul(NANOS_PER_SEC)?.checked_add(frac_ns)
}
