//! Request intake and node selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::RecentSensorCache;
use super::configurator::TaskParams;
use crate::registry::{DiscoveryQuery, Registry, RegistryError, SensorDescription};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("no candidate node satisfies the request")]
    NoCandidateNode,
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

fn yes() -> bool {
    true
}

/// VS creation request. Exactly one of `node_id` and `query` selects the
/// node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub app_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<DiscoveryQuery>,
    pub task: TaskParams,
    /// Defer the start to this virtual instant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_at: Option<u64>,
    /// Start right after deployment when no `start_at` is given.
    #[serde(default = "yes")]
    pub autostart: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    Node(String),
    Query(DiscoveryQuery),
}

impl CreateRequest {
    pub fn selector(&self) -> Result<Selector, SelectError> {
        if self.app_id.is_empty() {
            return Err(SelectError::InvalidRequest(
                "app_id must not be empty".into(),
            ));
        }
        match (&self.node_id, &self.query) {
            (Some(n), None) => Ok(Selector::Node(n.clone())),
            (None, Some(q)) => {
                let mut q = q.clone();
                // the task's capability is always part of the search
                if q.capability.is_none() {
                    q.capability = Some(self.task.capability);
                }
                if q.capability != Some(self.task.capability) {
                    return Err(SelectError::InvalidRequest(
                        "query capability differs from the task's".into(),
                    ));
                }
                Ok(Selector::Query(q))
            }
            _ => Err(SelectError::InvalidRequest(
                "exactly one of node_id and query is required".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub stale: u64,
}

/// Chooses nodes for creation requests, remembering recent choices.
#[derive(Debug, Clone)]
pub struct Provider {
    cache: RecentSensorCache,
    stats: CacheStats,
}

fn has_room(d: &SensorDescription) -> bool {
    d.active_vs().unwrap_or(0) < d.capacity as u32
}

impl Provider {
    pub fn new(cache_capacity: usize) -> Self {
        Provider {
            cache: RecentSensorCache::new(cache_capacity),
            stats: CacheStats::default(),
        }
    }

    pub fn cache(&self) -> &RecentSensorCache {
        &self.cache
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.stats
    }

    /// A cache hit is used only if the node still satisfies the query and
    /// has a free slot; otherwise it is evicted and the registry is asked.
    /// Among query results the first one with a free slot wins.
    pub fn select(
        &mut self,
        registry: &Registry,
        selector: &Selector,
    ) -> Result<SensorDescription, SelectError> {
        let q = match selector {
            Selector::Node(id) => {
                return registry
                    .get(id)
                    .ok_or_else(|| SelectError::UnknownNode(id.clone()));
            }
            Selector::Query(q) => q,
        };
        q.validate()?;
        let key = q.canonical_key();
        if let Some(node) = self.cache.lookup(&key) {
            match registry.get(&node) {
                Some(d) if registry.satisfies(&node, q) && has_room(&d) => {
                    self.stats.hits += 1;
                    return Ok(d);
                }
                _ => {
                    self.stats.stale += 1;
                    self.cache.evict(&key);
                }
            }
        }
        self.stats.misses += 1;
        let chosen = registry
            .query(q)?
            .into_iter()
            .find(has_room)
            .ok_or(SelectError::NoCandidateNode)?;
        self.cache.insert(&key, &chosen.node_id);
        Ok(chosen)
    }
}
