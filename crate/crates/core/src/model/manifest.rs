//! Canonical task manifest: the parameter document a node's sampling template
//! reads at deploy time.
//!
//! Format: one `key=value` line per field, keys in ascending byte order,
//! UTF-8, LF endings, no blank lines. The same parameters always produce the
//! same bytes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use super::platform::Platform;
use super::units::{Capability, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Gt,
    Lt,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Lt => value < threshold,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Gt => "gt",
            Comparator::Lt => "lt",
        }
    }
}

impl FromStr for Comparator {
    type Err = ManifestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gt" => Ok(Comparator::Gt),
            "lt" => Ok(Comparator::Lt),
            _ => Err(ManifestError::BadValue("comparator", s.to_string())),
        }
    }
}

/// Threshold rule: the task reports only when the rule becomes true.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub comparator: Comparator,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("manifest is not valid UTF-8")]
    NotUtf8,
    #[error("malformed manifest line: {0:?}")]
    BadLine(String),
    #[error("unknown manifest key {0:?}")]
    UnknownKey(String),
    #[error("manifest keys out of canonical order at {0:?}")]
    Unordered(String),
    #[error("missing manifest key {0}")]
    Missing(&'static str),
    #[error("bad value for {0}: {1:?}")]
    BadValue(&'static str, String),
    #[error("threshold and comparator must appear together")]
    HalfThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskManifest {
    pub vs_id: Uuid,
    pub platform: Platform,
    pub capability: Capability,
    pub sampling_interval_ms: u64,
    pub unit: Unit,
    pub endpoint: String,
    pub rule: Option<ThresholdRule>,
}

/// `host:port` with a non-empty host free of whitespace and a u16 port.
pub fn valid_endpoint(s: &str) -> bool {
    match s.rsplit_once(':') {
        Some((host, port)) => {
            !host.is_empty()
                && !host.chars().any(|c| c.is_whitespace() || c == '=')
                && port.parse::<u16>().is_ok()
                && !port.starts_with('+')
        }
        None => false,
    }
}

impl TaskManifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_string().into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ManifestError> {
        std::str::from_utf8(bytes)
            .map_err(|_| ManifestError::NotUtf8)?
            .parse()
    }

    /// Size in whole kilobytes, rounded up.
    pub fn size_kb(&self) -> u64 {
        (self.to_string().len() as u64).div_ceil(1024)
    }
}

impl fmt::Display for TaskManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "capability={}", self.capability)?;
        if let Some(r) = &self.rule {
            writeln!(f, "comparator={}", r.comparator.as_str())?;
        }
        writeln!(f, "endpoint={}", self.endpoint)?;
        writeln!(f, "platform={}", self.platform)?;
        writeln!(f, "sampling_interval_ms={}", self.sampling_interval_ms)?;
        if let Some(r) = &self.rule {
            writeln!(f, "threshold={}", r.threshold)?;
        }
        writeln!(f, "unit={}", self.unit)?;
        writeln!(f, "vs_id={}", self.vs_id.hyphenated())
    }
}

const KEYS: [&str; 8] = [
    "capability",
    "comparator",
    "endpoint",
    "platform",
    "sampling_interval_ms",
    "threshold",
    "unit",
    "vs_id",
];

impl FromStr for TaskManifest {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !s.ends_with('\n') {
            return Err(ManifestError::BadLine(s.to_string()));
        }
        let mut values: [Option<&str>; 8] = [None; 8];
        let mut last: Option<usize> = None;
        for line in s[..s.len() - 1].split('\n') {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ManifestError::BadLine(line.to_string()))?;
            if value.is_empty() || value.contains('\r') {
                return Err(ManifestError::BadLine(line.to_string()));
            }
            let idx = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| ManifestError::UnknownKey(key.to_string()))?;
            if last.is_some_and(|l| l >= idx) {
                return Err(ManifestError::Unordered(key.to_string()));
            }
            last = Some(idx);
            values[idx] = Some(value);
        }
        let get = |i: usize| values[i].ok_or(ManifestError::Missing(KEYS[i]));
        let bad = |k: &'static str, v: &str| ManifestError::BadValue(k, v.to_string());

        let capability = get(0)?;
        let capability: Capability = capability
            .parse()
            .map_err(|_| bad("capability", capability))?;
        let endpoint = get(2)?;
        if !valid_endpoint(endpoint) {
            return Err(bad("endpoint", endpoint));
        }
        let platform = get(3)?;
        let platform: Platform = platform.parse().map_err(|_| bad("platform", platform))?;
        let interval = get(4)?;
        let sampling_interval_ms = interval
            .parse::<u64>()
            .ok()
            .filter(|v| *v > 0 && v.to_string() == interval)
            .ok_or_else(|| bad("sampling_interval_ms", interval))?;
        let unit = get(6)?;
        let unit: Unit = unit.parse().map_err(|_| bad("unit", unit))?;
        let vs_id = get(7)?;
        let parsed_id = Uuid::parse_str(vs_id)
            .ok()
            .filter(|u| u.hyphenated().to_string() == vs_id)
            .ok_or_else(|| bad("vs_id", vs_id))?;
        let rule = match (values[1], values[5]) {
            (None, None) => None,
            (Some(c), Some(t)) => {
                let threshold = t
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && v.to_string() == t)
                    .ok_or_else(|| bad("threshold", t))?;
                Some(ThresholdRule {
                    comparator: c.parse()?,
                    threshold,
                })
            }
            _ => return Err(ManifestError::HalfThreshold),
        };
        Ok(TaskManifest {
            vs_id: parsed_id,
            platform,
            capability,
            sampling_interval_ms,
            unit,
            endpoint: endpoint.to_string(),
            rule,
        })
    }
}
