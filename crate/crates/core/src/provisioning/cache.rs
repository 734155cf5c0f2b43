use std::collections::VecDeque;

pub const DEFAULT_CACHE_CAPACITY: usize = 16;

/// Small LRU of query key to the node last chosen for it. Capacity 0
/// disables caching. Callers must revalidate hits before using them.
#[derive(Debug, Clone)]
pub struct RecentSensorCache {
    capacity: usize,
    // most recently used at the front
    entries: VecDeque<(String, String)>,
}

impl RecentSensorCache {
    pub fn new(capacity: usize) -> Self {
        RecentSensorCache {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&mut self, key: &str) -> Option<String> {
        let i = self.entries.iter().position(|(k, _)| k == key)?;
        let e = self.entries.remove(i).unwrap();
        let node = e.1.clone();
        self.entries.push_front(e);
        Some(node)
    }

    /// Returns the entry evicted to make room, if any.
    pub fn insert(&mut self, key: &str, node_id: &str) -> Option<(String, String)> {
        if self.capacity == 0 {
            return None;
        }
        if let Some(i) = self.entries.iter().position(|(k, _)| k == key) {
            self.entries.remove(i);
        }
        self.entries
            .push_front((key.to_string(), node_id.to_string()));
        if self.entries.len() > self.capacity {
            self.entries.pop_back()
        } else {
            None
        }
    }

    pub fn evict(&mut self, key: &str) -> bool {
        match self.entries.iter().position(|(k, _)| k == key) {
            Some(i) => {
                self.entries.remove(i);
                true
            }
            None => false,
        }
    }

    /// Keys from most to least recently used.
    pub fn keys(&self) -> Vec<String> {
        self.entries.iter().map(|(k, _)| k.clone()).collect()
    }
}

impl Default for RecentSensorCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY)
    }
}
