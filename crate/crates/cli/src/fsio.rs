//! File input and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use minerscope::trace::{self, Direction, DirectionalTrace, PacketRecord, TraceLabel};

/// Write `bytes` to a temporary file next to `path`, then rename it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Render with a writer callback and store atomically.
pub fn write_with<F>(path: &Path, render: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_atomic(path, &buf)
}

pub fn read_csv_trace(path: &Path) -> Result<Vec<PacketRecord>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    trace::parse_canonical_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `NAME=path` pair from `--trace`.
#[derive(Debug, Clone)]
pub struct TraceArg {
    pub name: String,
    pub path: PathBuf,
}

pub fn parse_trace_arg(s: &str) -> Result<TraceArg, String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))?;
    if name.trim().is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got `{s}`"));
    }
    Ok(TraceArg {
        name: name.trim().to_string(),
        path: PathBuf::from(path),
    })
}

/// Load every `--trace` input and keep the packets of `direction`. Inputs
/// with fewer than two packets in that direction are left out.
pub fn load_direction(inputs: &[TraceArg], direction: Direction) -> Result<Vec<DirectionalTrace>> {
    let mut out = Vec::new();
    for arg in inputs {
        let packets = read_csv_trace(&arg.path)?;
        let label = TraceLabel::new(arg.name.clone())?;
        let (i, o) = trace::split_directions(&packets, &label);
        let t = match direction {
            Direction::Ingoing => i,
            Direction::Outgoing => o,
        };
        if t.len() >= 2 {
            out.push(t);
        }
    }
    if out.is_empty() {
        bail!("no input has at least two {} packets", direction.tag());
    }
    Ok(out)
}

/// Lowercase ASCII letters and digits, everything else collapsed to `-`.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("trace");
    }
    out
}
