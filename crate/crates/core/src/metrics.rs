//! Creation and start delay samples plus lifecycle counters.

use serde::{Deserialize, Serialize};

use crate::manager::RouterStats;
use crate::provisioning::CacheStats;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub creates: u64,
    pub starts: u64,
    pub stops: u64,
    pub deletes: u64,
    pub migrations: u64,
    pub failures: u64,
}

/// One measured delay, in virtual milliseconds, from request receipt to
/// completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySample {
    pub vs_id: String,
    pub received_at_ms: u64,
    pub completed_at_ms: u64,
    pub value_ms: u64,
    /// The base-station session had to be opened for this request.
    pub session_setup: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pub counters: Counters,
    pub vscd: Vec<DelaySample>,
    pub vsst: Vec<DelaySample>,
}

impl Metrics {
    pub fn sample(
        vs_id: String,
        received_at_ms: u64,
        completed_at_ms: u64,
        session_setup: bool,
    ) -> DelaySample {
        DelaySample {
            vs_id,
            received_at_ms,
            completed_at_ms,
            value_ms: completed_at_ms - received_at_ms,
            session_setup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub now_ms: u64,
    pub counters: Counters,
    pub vscd: Vec<DelaySample>,
    pub vsst: Vec<DelaySample>,
    pub data: DataStats,
    pub cache: CacheCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataStats {
    pub delivered: u64,
    pub unrouted: u64,
    pub seq_gaps: u64,
    pub seq_duplicates: u64,
}

impl From<RouterStats> for DataStats {
    fn from(s: RouterStats) -> Self {
        DataStats {
            delivered: s.delivered,
            unrouted: s.unrouted,
            seq_gaps: s.seq_gaps,
            seq_duplicates: s.seq_duplicates,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheCounters {
    pub hits: u64,
    pub misses: u64,
    pub stale: u64,
}

impl From<CacheStats> for CacheCounters {
    fn from(s: CacheStats) -> Self {
        CacheCounters {
            hits: s.hits,
            misses: s.misses,
            stale: s.stale,
        }
    }
}
