use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use super::role::NodeRole;

#[derive(Debug, Clone)]
struct Tracked {
    role: NodeRole,
    controller: Option<String>,
    last_seen: Duration,
    failed: bool,
    unreachable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LivenessEvent {
    Failed {
        node: String,
        role: NodeRole,
        last_seen: Duration,
        detected_at: Duration,
    },
    /// A host whose local controller failed; the host itself may be alive.
    UnreachableViaController {
        host: String,
        controller: String,
        detected_at: Duration,
    },
}

/// Heartbeat bookkeeping. A node fails once more than
/// `miss_limit * interval` has passed since its last heartbeat, so a check
/// run every `interval` reports it within `(miss_limit + 1) * interval`.
#[derive(Debug, Clone)]
pub struct LivenessTracker {
    interval: Duration,
    miss_limit: u32,
    nodes: BTreeMap<String, Tracked>,
}

impl LivenessTracker {
    pub fn new(interval: Duration, miss_limit: u32) -> Self {
        Self {
            interval,
            miss_limit: miss_limit.max(1),
            nodes: BTreeMap::new(),
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    pub fn timeout(&self) -> Duration {
        self.interval * self.miss_limit
    }

    /// Worst-case detection latency.
    pub fn bound(&self) -> Duration {
        self.interval * (self.miss_limit + 1)
    }

    pub fn track(&mut self, node: &str, role: NodeRole, controller: Option<&str>, now: Duration) {
        self.nodes.insert(
            node.into(),
            Tracked {
                role,
                controller: controller.map(String::from),
                last_seen: now,
                failed: false,
                unreachable: false,
            },
        );
    }

    pub fn untrack(&mut self, node: &str) {
        self.nodes.remove(node);
    }

    /// Records a heartbeat; unknown nodes are ignored.
    pub fn heartbeat(&mut self, node: &str, now: Duration) {
        if let Some(t) = self.nodes.get_mut(node) {
            if now > t.last_seen {
                t.last_seen = now;
            }
        }
    }

    pub fn is_failed(&self, node: &str) -> bool {
        self.nodes.get(node).is_some_and(|t| t.failed)
    }

    pub fn is_unreachable(&self, node: &str) -> bool {
        self.nodes.get(node).is_some_and(|t| t.unreachable)
    }

    /// New failures and cascades since the previous check. Each node fails
    /// at most once.
    pub fn check(&mut self, now: Duration) -> Vec<LivenessEvent> {
        let timeout = self.timeout();
        let mut events = Vec::new();
        let mut dead_controllers = Vec::new();
        for (id, t) in self.nodes.iter_mut() {
            if !t.failed && now.saturating_sub(t.last_seen) > timeout {
                t.failed = true;
                events.push(LivenessEvent::Failed {
                    node: id.clone(),
                    role: t.role,
                    last_seen: t.last_seen,
                    detected_at: now,
                });
                if t.role == NodeRole::LocalController {
                    dead_controllers.push(id.clone());
                }
            }
        }
        for (id, t) in self.nodes.iter_mut() {
            if let Some(c) = t.controller.as_ref().filter(|c| dead_controllers.contains(c)) {
                if !t.unreachable {
                    t.unreachable = true;
                    events.push(LivenessEvent::UnreachableViaController {
                        host: id.clone(),
                        controller: c.clone(),
                        detected_at: now,
                    });
                }
            }
        }
        events
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub node: String,
    pub role: NodeRole,
    pub last_seen_s: f64,
    pub detected_at_s: f64,
    /// When the orchestrator killed the node, if it did.
    pub killed_at_s: Option<f64>,
}

impl FailureRecord {
    pub fn detection_latency_s(&self) -> Option<f64> {
        self.killed_at_s.map(|k| self.detected_at_s - k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnreachableRecord {
    pub host: String,
    pub controller: String,
    pub detected_at_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LivenessReport {
    pub interval_s: f64,
    pub miss_limit: u32,
    pub heartbeats: u64,
    pub failures: Vec<FailureRecord>,
    pub unreachable: Vec<UnreachableRecord>,
}

impl LivenessReport {
    pub fn bound_s(&self) -> f64 {
        self.interval_s * (self.miss_limit as f64 + 1.0)
    }

    pub fn failure(&self, node: &str) -> Option<&FailureRecord> {
        self.failures.iter().find(|f| f.node == node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Duration {
        Duration::from_secs_f64(x)
    }

    #[test]
    fn killed_host_detected_within_bound() {
        // interval 1 s, miss limit 3, host silent from t=2
        let mut t = LivenessTracker::new(s(1.0), 3);
        t.track("h0", NodeRole::HostNode, Some("lc"), s(0.0));
        t.track("h1", NodeRole::HostNode, Some("lc"), s(0.0));
        let mut detected = None;
        for tick in 1..=10 {
            let now = s(tick as f64);
            t.heartbeat("h1", now);
            if tick <= 2 {
                t.heartbeat("h0", now);
            }
            for e in t.check(now) {
                if let LivenessEvent::Failed { node, .. } = e {
                    assert_eq!(node, "h0");
                    detected.get_or_insert(now);
                }
            }
        }
        let d = detected.expect("failure reported");
        assert!(d <= s(6.0), "{d:?}");
        assert!(!t.is_failed("h1"));
    }

    #[test]
    fn controller_death_cascades() {
        let mut t = LivenessTracker::new(s(1.0), 1);
        t.track("lc", NodeRole::LocalController, None, s(0.0));
        t.track("h0", NodeRole::HostNode, Some("lc"), s(0.0));
        t.heartbeat("h0", s(2.5));
        let ev = t.check(s(2.5));
        assert_eq!(ev.len(), 2);
        assert!(t.is_failed("lc"));
        assert!(t.is_unreachable("h0"));
        assert!(!t.is_failed("h0"));
        assert!(t.check(s(2.6)).is_empty());
    }

    #[test]
    fn no_failures_when_all_beat() {
        let mut t = LivenessTracker::new(s(0.2), 3);
        t.track("a", NodeRole::NameServer, None, s(0.0));
        for k in 1..100 {
            let now = s(k as f64 * 0.2);
            t.heartbeat("a", now);
            assert!(t.check(now).is_empty());
        }
    }
}
