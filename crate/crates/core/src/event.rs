//! Raw profile events and the per-dump trace that owns them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::TimeCategory;
use crate::site::{CodeSite, SiteId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Enter,
    Exit,
    Sample,
}

/// One timestamped record. For `Sample` events `site` is the leaf frame and
/// `stack` holds the full root-to-leaf stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEvent {
    #[serde(rename = "tid")]
    pub thread_id: u64,
    pub kind: EventKind,
    pub site: SiteId,
    pub wall_ns: u64,
    pub cpu_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<TimeCategory>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stack: Vec<SiteId>,
}

impl ProfileEvent {
    pub fn enter(thread_id: u64, site: SiteId, wall_ns: u64, cpu_ns: u64) -> Self {
        Self {
            thread_id,
            kind: EventKind::Enter,
            site,
            wall_ns,
            cpu_ns,
            tag: None,
            stack: Vec::new(),
        }
    }

    pub fn exit(thread_id: u64, site: SiteId, wall_ns: u64, cpu_ns: u64) -> Self {
        Self {
            kind: EventKind::Exit,
            ..Self::enter(thread_id, site, wall_ns, cpu_ns)
        }
    }

    pub fn with_tag(mut self, tag: TimeCategory) -> Self {
        self.tag = Some(tag);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// An exit with no matching open enter; the exit was dropped.
    UnmatchedExit,
    /// An enter closed implicitly by an outer exit or by end of stream.
    UnclosedEnter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestingViolation {
    #[serde(rename = "tid")]
    pub thread_id: u64,
    pub site: SiteId,
    pub wall_ns: u64,
    pub kind: ViolationKind,
}

/// A site table plus the events and nesting violations recorded against it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub sites: Vec<CodeSite>,
    pub events: Vec<ProfileEvent>,
    #[serde(default)]
    pub violations: Vec<NestingViolation>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `site`, adding it to the table if absent.
    pub fn intern(&mut self, site: CodeSite) -> SiteId {
        if let Some(i) = self.sites.iter().position(|s| s.key() == site.key()) {
            return SiteId(i as u32);
        }
        self.sites.push(site);
        SiteId((self.sites.len() - 1) as u32)
    }

    pub fn site(&self, id: SiteId) -> Option<&CodeSite> {
        self.sites.get(id.index())
    }

    /// First site whose symbol equals `symbol`.
    pub fn find_symbol(&self, symbol: &str) -> Option<SiteId> {
        self.sites
            .iter()
            .position(|s| s.symbol == symbol)
            .map(|i| SiteId(i as u32))
    }

    pub fn push(&mut self, event: ProfileEvent) {
        self.events.push(event);
    }

    /// Distinct thread ids in first-appearance order.
    pub fn thread_ids(&self) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.thread_id) {
                out.push(e.thread_id);
            }
        }
        out
    }

    pub fn samples(&self) -> impl Iterator<Item = &ProfileEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Sample)
    }
}
