use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Shared read handle on the simulation's virtual time, in milliseconds.
/// Only the simulation engine advances it.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now_ms: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn now_ms(&self) -> u64 {
        self.now_ms.load(Ordering::Acquire)
    }

    pub(crate) fn set(&self, t_ms: u64) {
        debug_assert!(t_ms >= self.now_ms());
        self.now_ms.store(t_ms, Ordering::Release);
    }
}
