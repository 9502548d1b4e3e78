//! Synthetic directional traces.
//!
//! Interarrival times are log-normal with median `median_dt` and log-space
//! standard deviation `sigma_log_dt`; sizes are `median_sz` plus Laplace
//! noise of scale `sz_spread / 2`, rounded and clamped to Ethernet frame
//! bounds. Only the medians are calibrated; the spreads are stand-ins.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::trace::{ClientKind, Direction, DirectionalTrace, PacketRecord, TraceLabel, NANOS_PER_SEC};

pub const MIN_FRAME: u16 = 54;
pub const MAX_FRAME: u16 = 1514;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("need at least 2 packets per trace, got {0}")]
    TooFewPackets(usize),
    #[error("no profiles given")]
    NoProfiles,
    #[error("profile file: {0}")]
    Json(String),
}

fn default_sigma() -> f64 {
    1.0
}

fn default_spread() -> f64 {
    200.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    /// Application name, e.g. "Bitcoin".
    pub name: String,
    pub direction: Direction,
    /// Median interarrival time, seconds.
    pub median_dt: f64,
    #[serde(default = "default_sigma")]
    pub sigma_log_dt: f64,
    /// Median packet size, bytes.
    pub median_sz: f64,
    #[serde(default = "default_spread")]
    pub sz_spread: f64,
    #[serde(default)]
    pub client_kind: ClientKind,
    #[serde(default)]
    pub tunnel: Option<String>,
    /// Duration of the capture the medians were measured on; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_duration_s: Option<f64>,
}

impl ClassProfile {
    pub fn new(name: &str, direction: Direction, median_dt: f64, median_sz: f64) -> Self {
        ClassProfile {
            name: name.to_string(),
            direction,
            median_dt,
            sigma_log_dt: default_sigma(),
            median_sz,
            sz_spread: default_spread(),
            client_kind: ClientKind::Standard,
            tunnel: None,
            reference_duration_s: None,
        }
    }

    pub fn label(&self) -> TraceLabel {
        TraceLabel {
            application: self.name.clone(),
            client_kind: self.client_kind.clone(),
            tunnel: self.tunnel.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: &str| {
            Err(SynthError::InvalidProfile {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.name.trim().is_empty() {
            return fail("empty name");
        }
        if !(self.median_dt.is_finite() && self.median_dt > 0.0) {
            return fail("median_dt must be > 0");
        }
        if !(self.sigma_log_dt.is_finite() && self.sigma_log_dt >= 0.0) {
            return fail("sigma_log_dt must be >= 0");
        }
        if !(f64::from(MIN_FRAME)..=f64::from(MAX_FRAME)).contains(&self.median_sz) {
            return fail("median_sz must lie in [54, 1514]");
        }
        if !(self.sz_spread.is_finite() && self.sz_spread >= 0.0) {
            return fail("sz_spread must be >= 0");
        }
        Ok(())
    }
}

/// Profiles file: `{"profiles": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub profiles: Vec<ClassProfile>,
}

impl ProfileSet {
    pub fn from_json(text: &str) -> Result<ProfileSet, SynthError> {
        let set: ProfileSet =
            serde_json::from_str(text).map_err(|e| SynthError::Json(e.to_string()))?;
        if set.profiles.is_empty() {
            return Err(SynthError::NoProfiles);
        }
        for p in &set.profiles {
            p.validate()?;
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_packets: usize,
    pub seed: u64,
    pub profiles: Vec<ClassProfile>,
}

/// Zero-mean Laplace deviate of scale `b` by inverse CDF.
fn laplace<R: Rng>(rng: &mut R, b: f64) -> f64 {
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u - 0.5;
        }
    };
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Draw one `n`-packet trace. Timing and sizes use separate generator
/// streams of `seed`, so changing one dispersion leaves the other series
/// unchanged.
pub fn sample_trace(profile: &ClassProfile, n: usize, seed: u64) -> Result<DirectionalTrace, SynthError> {
    profile.validate()?;
    if n < 2 {
        return Err(SynthError::TooFewPackets(n));
    }
    let mut dt_rng = seed::rng_stream(seed, 0);
    let mut sz_rng = seed::rng_stream(seed, 1);
    let b = profile.sz_spread / 2.0;
    let mut t_ns = 0u64;
    let mut packets = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let z: f64 = if profile.sigma_log_dt > 0.0 {
                dt_rng.sample(StandardNormal)
            } else {
                0.0
            };
            let dt = profile.median_dt * (profile.sigma_log_dt * z).exp();
            let mut ns = (dt * NANOS_PER_SEC as f64).round() as u64;
            if ns == 0 && profile.sigma_log_dt > 0.0 {
                ns = 1;
            }
            t_ns += ns;
        }
        let noise = if b > 0.0 { laplace(&mut sz_rng, b) } else { 0.0 };
        let size = (profile.median_sz + noise)
            .round()
            .clamp(f64::from(MIN_FRAME), f64::from(MAX_FRAME)) as u16;
        packets.push(PacketRecord::new(t_ns, size, profile.direction));
    }
    Ok(DirectionalTrace::new(profile.direction, packets, profile.label())
        .expect("generated packets are sorted and share one direction"))
}

/// One trace per profile; profile `i` uses seed `seed::derive(cfg.seed, i)`.
pub fn build_corpus(cfg: &SynthConfig) -> Result<Vec<DirectionalTrace>, SynthError> {
    if cfg.profiles.is_empty() {
        return Err(SynthError::NoProfiles);
    }
    cfg.profiles
        .iter()
        .enumerate()
        .map(|(i, p)| sample_trace(p, cfg.n_packets, seed::derive(cfg.seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bitcoin_in() -> ClassProfile {
        ClassProfile::new("Bitcoin", Direction::Ingoing, 0.000600, 90.0)
    }

    #[test]
    fn calibrated_medians() {
        let t = sample_trace(&bitcoin_in(), 4576, 7).unwrap();
        let s = t.summarize().unwrap();
        assert!(
            (0.000600 * 0.8..=0.000600 * 1.25).contains(&s.interarrival.q50),
            "{}",
            s.interarrival.q50
        );
        assert!((81.0..=99.0).contains(&s.size.q50), "{}", s.size.q50);
    }

    #[test]
    fn zero_dispersion_is_regular() {
        let p = ClassProfile {
            sigma_log_dt: 0.0,
            sz_spread: 0.0,
            ..bitcoin_in()
        };
        let t = sample_trace(&p, 100, 1).unwrap();
        assert!(t.interarrivals().unwrap().iter().all(|&d| d == 0.000600));
        assert!(t.packets().iter().all(|p| p.size == 90));
    }

    #[test]
    fn same_seed_same_trace() {
        assert_eq!(
            sample_trace(&bitcoin_in(), 500, 3).unwrap(),
            sample_trace(&bitcoin_in(), 500, 3).unwrap()
        );
        assert_ne!(
            sample_trace(&bitcoin_in(), 500, 3).unwrap(),
            sample_trace(&bitcoin_in(), 500, 4).unwrap()
        );
    }

    #[test]
    fn bounds_hold() {
        let p = ClassProfile {
            median_sz: 60.0,
            sz_spread: 3000.0,
            median_dt: 1e-6,
            ..bitcoin_in()
        };
        let t = sample_trace(&p, 5000, 9).unwrap();
        assert!(t.packets().iter().all(|p| (MIN_FRAME..=MAX_FRAME).contains(&p.size)));
        assert!(t.interarrivals().unwrap().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            sample_trace(&bitcoin_in(), 1, 0).unwrap_err(),
            SynthError::TooFewPackets(1)
        );
        let bad = ClassProfile {
            median_sz: 20.0,
            ..bitcoin_in()
        };
        assert!(matches!(
            sample_trace(&bad, 10, 0),
            Err(SynthError::InvalidProfile { .. })
        ));
        let bad = ClassProfile {
            median_dt: 0.0,
            ..bitcoin_in()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn corpus_one_trace_per_profile() {
        let cfg = SynthConfig {
            n_packets: 4576,
            seed: 1,
            profiles: vec![
                bitcoin_in(),
                ClassProfile::new("Office", Direction::Ingoing, 0.000118, 1434.0),
            ],
        };
        let traces = build_corpus(&cfg).unwrap();
        assert_eq!(traces.len(), 2);
        assert!(traces.iter().all(|t| t.len() == 4576));
        assert_eq!(traces[1].label.application, "Office");
        assert!(build_corpus(&SynthConfig {
            profiles: vec![],
            ..cfg
        })
        .is_err());
    }

    #[test]
    fn profile_json_defaults() {
        let set = ProfileSet::from_json(
            r#"{"profiles":[{"name":"Skype","direction":"out","median_dt":0.019988,"median_sz":130}]}"#,
        )
        .unwrap();
        let p = &set.profiles[0];
        assert_eq!(p.sigma_log_dt, 1.0);
        assert_eq!(p.sz_spread, 200.0);
        assert_eq!(p.direction, Direction::Outgoing);
        assert!(ProfileSet::from_json(r#"{"profiles":[]}"#).is_err());
    }
}
