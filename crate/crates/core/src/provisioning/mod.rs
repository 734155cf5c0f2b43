//! VS provider, configurator and scheduler.

mod cache;
pub mod configurator;
mod provider;
mod scheduler;

pub use cache::{RecentSensorCache, DEFAULT_CACHE_CAPACITY};
pub use configurator::{configure, ConfigureError, TaskParams};
pub use provider::{CacheStats, CreateRequest, Provider, SelectError, Selector};
pub use scheduler::{EntryStatus, ScheduleEntry, ScheduleError, Scheduler};
