//! Deferred lifecycle actions on the virtual clock.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("due time {due_ms} is before now ({now_ms})")]
    PastDue { due_ms: u64, now_ms: u64 },
    #[error("unknown schedule entry {0}")]
    UnknownId(u64),
    #[error("schedule entry {0} already fired")]
    AlreadyFired(u64),
    #[error("schedule entry {0} already cancelled")]
    AlreadyCancelled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Pending,
    Fired,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry<A> {
    pub id: u64,
    pub action: A,
    pub due_ms: u64,
    pub status: EntryStatus,
    /// Virtual time the entry actually fired.
    pub fired_at_ms: Option<u64>,
    /// Short description of what happened when it fired.
    pub outcome: Option<String>,
}

/// Entries fire in `(due_ms, id)` order, each at most once.
#[derive(Debug, Clone)]
pub struct Scheduler<A> {
    next_id: u64,
    entries: BTreeMap<u64, ScheduleEntry<A>>,
    pending: BTreeSet<(u64, u64)>,
}

impl<A: Clone> Scheduler<A> {
    pub fn new() -> Self {
        Scheduler {
            next_id: 1,
            entries: BTreeMap::new(),
            pending: BTreeSet::new(),
        }
    }

    pub fn schedule(&mut self, action: A, due_ms: u64, now_ms: u64) -> Result<u64, ScheduleError> {
        if due_ms < now_ms {
            return Err(ScheduleError::PastDue { due_ms, now_ms });
        }
        let id = self.next_id;
        self.next_id += 1;
        self.entries.insert(
            id,
            ScheduleEntry {
                id,
                action,
                due_ms,
                status: EntryStatus::Pending,
                fired_at_ms: None,
                outcome: None,
            },
        );
        self.pending.insert((due_ms, id));
        Ok(id)
    }

    pub fn cancel(&mut self, id: u64) -> Result<(), ScheduleError> {
        let e = self
            .entries
            .get_mut(&id)
            .ok_or(ScheduleError::UnknownId(id))?;
        match e.status {
            EntryStatus::Fired => Err(ScheduleError::AlreadyFired(id)),
            EntryStatus::Cancelled => Err(ScheduleError::AlreadyCancelled(id)),
            EntryStatus::Pending => {
                e.status = EntryStatus::Cancelled;
                self.pending.remove(&(e.due_ms, id));
                Ok(())
            }
        }
    }

    pub fn get(&self, id: u64) -> Option<&ScheduleEntry<A>> {
        self.entries.get(&id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ScheduleEntry<A>> {
        self.entries.values()
    }

    pub fn next_due(&self) -> Option<u64> {
        self.pending.first().map(|(due, _)| *due)
    }

    /// Marks the earliest pending entry due by `now_ms` as fired and hands
    /// back its id and action.
    pub fn pop_due(&mut self, now_ms: u64) -> Option<(u64, A)> {
        let &(due, id) = self.pending.first()?;
        if due > now_ms {
            return None;
        }
        self.pending.pop_first();
        let e = self.entries.get_mut(&id).expect("pending entries exist");
        e.status = EntryStatus::Fired;
        e.fired_at_ms = Some(now_ms);
        Some((id, e.action.clone()))
    }

    pub fn record_outcome(&mut self, id: u64, outcome: impl Into<String>) {
        if let Some(e) = self.entries.get_mut(&id) {
            e.outcome = Some(outcome.into());
        }
    }
}

impl<A: Clone> Default for Scheduler<A> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fires_once_in_order() {
        let mut s = Scheduler::new();
        let b = s.schedule("b", 20, 0).unwrap();
        let a = s.schedule("a", 10, 0).unwrap();
        let c = s.schedule("c", 20, 0).unwrap();
        assert_eq!(s.pop_due(9), None);
        assert_eq!(s.pop_due(100), Some((a, "a")));
        assert_eq!(s.pop_due(100), Some((b, "b")));
        assert_eq!(s.pop_due(100), Some((c, "c")));
        assert_eq!(s.pop_due(100), None);
        assert_eq!(s.cancel(a), Err(ScheduleError::AlreadyFired(a)));
    }

    #[test]
    fn cancel_and_past_due() {
        let mut s = Scheduler::new();
        assert_eq!(
            s.schedule((), 4, 5),
            Err(ScheduleError::PastDue {
                due_ms: 4,
                now_ms: 5
            })
        );
        let id = s.schedule((), 5, 5).unwrap();
        s.cancel(id).unwrap();
        assert_eq!(s.cancel(id), Err(ScheduleError::AlreadyCancelled(id)));
        assert_eq!(s.cancel(99), Err(ScheduleError::UnknownId(99)));
        assert_eq!(s.pop_due(u64::MAX), None);
        assert_eq!(s.get(id).unwrap().status, EntryStatus::Cancelled);
    }
}
