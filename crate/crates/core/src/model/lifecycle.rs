//! Virtual sensor lifecycle state machine.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VsState {
    Requested,
    Configured,
    Deploying,
    Deployed,
    Running,
    Stopped,
    Migrating,
    Deleting,
    Deleted,
    Faulted,
}

impl VsState {
    pub const ALL: [VsState; 10] = [
        VsState::Requested,
        VsState::Configured,
        VsState::Deploying,
        VsState::Deployed,
        VsState::Running,
        VsState::Stopped,
        VsState::Migrating,
        VsState::Deleting,
        VsState::Deleted,
        VsState::Faulted,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, VsState::Deleted | VsState::Faulted)
    }

    /// States in which the VS occupies a node slot and owns a local address.
    pub fn holds_slot(self) -> bool {
        matches!(
            self,
            VsState::Deployed | VsState::Running | VsState::Stopped | VsState::Migrating
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VsState::Requested => "requested",
            VsState::Configured => "configured",
            VsState::Deploying => "deploying",
            VsState::Deployed => "deployed",
            VsState::Running => "running",
            VsState::Stopped => "stopped",
            VsState::Migrating => "migrating",
            VsState::Deleting => "deleting",
            VsState::Deleted => "deleted",
            VsState::Faulted => "faulted",
        }
    }
}

impl fmt::Display for VsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleEvent {
    Configure,
    DeployBegin,
    DeployOk,
    StartOk,
    StopOk,
    MigrateBegin,
    MigrateOk,
    DeleteBegin,
    DeleteOk,
    Fault,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 10] = [
        LifecycleEvent::Configure,
        LifecycleEvent::DeployBegin,
        LifecycleEvent::DeployOk,
        LifecycleEvent::StartOk,
        LifecycleEvent::StopOk,
        LifecycleEvent::MigrateBegin,
        LifecycleEvent::MigrateOk,
        LifecycleEvent::DeleteBegin,
        LifecycleEvent::DeleteOk,
        LifecycleEvent::Fault,
    ];
}

/// Outcome of a legal transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    To(VsState),
    /// Leave `Migrating` and return to whatever state preceded it.
    ResumePreMigration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal transition: {event:?} in state {state}")]
pub struct IllegalTransition {
    pub state: VsState,
    pub event: LifecycleEvent,
}

/// The fixed lifecycle table. Pure.
pub fn transition(state: VsState, event: LifecycleEvent) -> Result<Step, IllegalTransition> {
    use LifecycleEvent as E;
    use VsState as S;
    let step = match (state, event) {
        (S::Requested, E::Configure) => Step::To(S::Configured),
        (S::Configured, E::DeployBegin) => Step::To(S::Deploying),
        (S::Deploying, E::DeployOk) => Step::To(S::Deployed),
        (S::Deployed, E::StartOk) => Step::To(S::Running),
        (S::Stopped, E::StartOk) => Step::To(S::Running),
        (S::Running, E::StopOk) => Step::To(S::Stopped),
        (S::Running | S::Stopped, E::MigrateBegin) => Step::To(S::Migrating),
        (S::Migrating, E::MigrateOk) => Step::ResumePreMigration,
        (S::Deployed | S::Stopped, E::DeleteBegin) => Step::To(S::Deleting),
        (S::Deleting, E::DeleteOk) => Step::To(S::Deleted),
        (s, E::Fault) if !s.is_terminal() => Step::To(S::Faulted),
        _ => return Err(IllegalTransition { state, event }),
    };
    Ok(step)
}

/// A state plus the memory needed to leave `Migrating`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifecycle {
    state: VsState,
    pre_migration: Option<VsState>,
}

impl Lifecycle {
    pub fn new() -> Self {
        Lifecycle {
            state: VsState::Requested,
            pre_migration: None,
        }
    }

    pub fn state(&self) -> VsState {
        self.state
    }

    /// Checks an event without applying it.
    pub fn check(&self, event: LifecycleEvent) -> Result<(), IllegalTransition> {
        transition(self.state, event).map(|_| ())
    }

    pub fn apply(&mut self, event: LifecycleEvent) -> Result<VsState, IllegalTransition> {
        let next = match transition(self.state, event)? {
            Step::To(VsState::Migrating) => {
                self.pre_migration = Some(self.state);
                VsState::Migrating
            }
            Step::To(s) => s,
            Step::ResumePreMigration => self
                .pre_migration
                .take()
                .expect("Migrating is only entered through migrate_begin"),
        };
        if next != VsState::Migrating {
            self.pre_migration = None;
        }
        self.state = next;
        Ok(next)
    }
}

impl Default for Lifecycle {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LifecycleEvent as E;
    use VsState as S;

    #[test]
    fn deployed_start_runs() {
        assert_eq!(
            transition(S::Deployed, E::StartOk),
            Ok(Step::To(S::Running))
        );
    }

    #[test]
    fn deleted_is_absorbing() {
        for e in LifecycleEvent::ALL {
            assert!(transition(S::Deleted, e).is_err());
            assert!(transition(S::Faulted, e).is_err());
        }
    }

    #[test]
    fn migration_resumes_prior_state() {
        for prior in [S::Running, S::Stopped] {
            let mut lc = Lifecycle::new();
            lc.apply(E::Configure).unwrap();
            lc.apply(E::DeployBegin).unwrap();
            lc.apply(E::DeployOk).unwrap();
            lc.apply(E::StartOk).unwrap();
            if prior == S::Stopped {
                lc.apply(E::StopOk).unwrap();
            }
            assert_eq!(lc.apply(E::MigrateBegin), Ok(S::Migrating));
            assert_eq!(lc.apply(E::MigrateOk), Ok(prior));
        }
    }

    #[test]
    fn delete_requires_stop() {
        assert!(transition(S::Running, E::DeleteBegin).is_err());
        assert_eq!(
            transition(S::Stopped, E::DeleteBegin),
            Ok(Step::To(S::Deleting))
        );
    }
}
