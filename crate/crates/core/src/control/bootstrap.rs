use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use super::role::NodeRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapPhase {
    Idle,
    ManagerUp,
    GlobalControllerUp,
    NameServerUp,
    LocalControllersUp,
    WorkflowManagersUp,
    HostsUp,
    ClientsUp,
    Running,
}

impl BootstrapPhase {
    pub const ORDER: [BootstrapPhase; 9] = [
        BootstrapPhase::Idle,
        BootstrapPhase::ManagerUp,
        BootstrapPhase::GlobalControllerUp,
        BootstrapPhase::NameServerUp,
        BootstrapPhase::LocalControllersUp,
        BootstrapPhase::WorkflowManagersUp,
        BootstrapPhase::HostsUp,
        BootstrapPhase::ClientsUp,
        BootstrapPhase::Running,
    ];

    pub fn next(self) -> Option<BootstrapPhase> {
        Self::ORDER.get(self as usize + 1).copied()
    }

    /// The role whose group completes this phase.
    pub fn role(self) -> Option<NodeRole> {
        match self {
            BootstrapPhase::ManagerUp => Some(NodeRole::GlobalManager),
            BootstrapPhase::GlobalControllerUp => Some(NodeRole::GlobalController),
            BootstrapPhase::NameServerUp => Some(NodeRole::NameServer),
            BootstrapPhase::LocalControllersUp => Some(NodeRole::LocalController),
            BootstrapPhase::WorkflowManagersUp => Some(NodeRole::WorkflowManager),
            BootstrapPhase::HostsUp => Some(NodeRole::HostNode),
            BootstrapPhase::ClientsUp => Some(NodeRole::ClientHost),
            BootstrapPhase::Idle | BootstrapPhase::Running => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BootstrapPhase::Idle => "idle",
            BootstrapPhase::ManagerUp => "manager_up",
            BootstrapPhase::GlobalControllerUp => "global_controller_up",
            BootstrapPhase::NameServerUp => "name_server_up",
            BootstrapPhase::LocalControllersUp => "local_controllers_up",
            BootstrapPhase::WorkflowManagersUp => "workflow_managers_up",
            BootstrapPhase::HostsUp => "hosts_up",
            BootstrapPhase::ClientsUp => "clients_up",
            BootstrapPhase::Running => "running",
        }
    }
}

impl fmt::Display for BootstrapPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PhaseOrderError {
    #[error("phase {got} recorded after {last}; expected {expected:?}")]
    OutOfOrder {
        last: BootstrapPhase,
        got: BootstrapPhase,
        expected: Option<BootstrapPhase>,
    },
    #[error("phase {phase} timestamp does not advance")]
    NotIncreasing { phase: BootstrapPhase },
}

/// A phase reached at `at` (offset from orchestrator start), of which
/// `slept` was spent in the group's post-start sleep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStamp {
    pub phase: BootstrapPhase,
    pub at: Duration,
    pub slept: Duration,
}

/// Phase stamps; each recorded phase is the successor of the previous one
/// and its timestamp is strictly later.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapTimeline {
    stamps: Vec<PhaseStamp>,
}

impl BootstrapTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> BootstrapPhase {
        self.stamps.last().map_or(BootstrapPhase::Idle, |s| s.phase)
    }

    pub fn record(&mut self, phase: BootstrapPhase, at: Duration, slept: Duration) -> Result<(), PhaseOrderError> {
        let last = self.current();
        let expected = if self.stamps.is_empty() {
            Some(BootstrapPhase::ManagerUp)
        } else {
            last.next()
        };
        if Some(phase) != expected {
            return Err(PhaseOrderError::OutOfOrder {
                last,
                got: phase,
                expected,
            });
        }
        if self.stamps.last().is_some_and(|s| at <= s.at) {
            return Err(PhaseOrderError::NotIncreasing { phase });
        }
        self.stamps.push(PhaseStamp { phase, at, slept });
        Ok(())
    }

    pub fn stamps(&self) -> &[PhaseStamp] {
        &self.stamps
    }

    pub fn get(&self, phase: BootstrapPhase) -> Option<&PhaseStamp> {
        self.stamps.iter().find(|s| s.phase == phase)
    }

    pub fn is_running(&self) -> bool {
        self.current() == BootstrapPhase::Running
    }

    /// Time between the previous phase and `phase`.
    pub fn delta(&self, phase: BootstrapPhase) -> Option<Duration> {
        let i = self.stamps.iter().position(|s| s.phase == phase)?;
        let prev = if i == 0 { Duration::ZERO } else { self.stamps[i - 1].at };
        Some(self.stamps[i].at.saturating_sub(prev))
    }

    pub fn total_slept(&self) -> Duration {
        self.stamps.iter().map(|s| s.slept).sum()
    }

    pub fn elapsed(&self) -> Duration {
        self.stamps.last().map_or(Duration::ZERO, |s| s.at)
    }
}
