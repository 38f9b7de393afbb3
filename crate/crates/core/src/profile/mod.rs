//! Event replay into function, region, thread and sample tables.
//!
//! All times are integer nanoseconds so that replay, the conservation checks
//! and merging are exact; seconds appear only at the reporting edge.
//!
//! Recursion follows the interpreter-profiler convention: every activation
//! counts toward `ncalls_total`, only activations of a site that is not
//! already on the stack count toward `ncalls_primitive`, and only those
//! outermost activations add to `cumtime`. For `f -> f -> g` the row for `f`
//! reads `2/1` and its cumtime is the outer span alone.

mod merge;
mod regions;
mod replay;
mod samples;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::TimeCategory;
use crate::event::Trace;
use crate::ns_to_secs;
use crate::site::CodeSite;

pub use merge::merge_profiles;
pub use regions::aggregate_regions;
pub use replay::{aggregate_functions, aggregate_threads, replay, Replay, ThreadReplay};
pub use samples::{aggregate_samples, SampleStats, SampleSummary};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("malformed event stream on thread {thread_id}: {reason}")]
    MalformedStream { thread_id: u64, reason: String },
    #[error("no site named `{0}` in the trace")]
    UnknownScope(String),
    #[error("run id mismatch: expected `{expected}`, found `{found}`")]
    RunIdMismatch { expected: String, found: String },
    #[error("nothing to merge")]
    EmptyMerge,
}

/// Which timestamp the replay measures durations with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    Wall,
    Cpu,
}

impl Clock {
    pub fn label(self) -> &'static str {
        match self {
            Clock::Wall => "WALL",
            Clock::Cpu => "CPU",
        }
    }
}

/// One row of the function table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionStats {
    pub site: CodeSite,
    pub ncalls_total: u64,
    pub ncalls_primitive: u64,
    /// Exclusive time.
    pub tottime_ns: u64,
    /// Inclusive time over primitive activations.
    pub cumtime_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<TimeCategory>,
}

impl FunctionStats {
    pub fn new(site: CodeSite) -> Self {
        Self {
            site,
            ncalls_total: 0,
            ncalls_primitive: 0,
            tottime_ns: 0,
            cumtime_ns: 0,
            tag: None,
        }
    }

    pub fn tottime_s(&self) -> f64 {
        ns_to_secs(self.tottime_ns)
    }

    pub fn cumtime_s(&self) -> f64 {
        ns_to_secs(self.cumtime_ns)
    }

    /// `tottime / ncalls_total`.
    pub fn percall_tot_s(&self) -> f64 {
        if self.ncalls_total == 0 {
            0.0
        } else {
            self.tottime_s() / self.ncalls_total as f64
        }
    }

    /// `cumtime / ncalls_primitive`.
    pub fn percall_cum_s(&self) -> f64 {
        if self.ncalls_primitive == 0 {
            0.0
        } else {
            self.cumtime_s() / self.ncalls_primitive as f64
        }
    }

    /// `"7"` or `"2/1"` when recursion made the counts differ.
    pub fn ncalls_label(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        if self.ncalls_total == self.ncalls_primitive {
            let _ = write!(s, "{}", self.ncalls_total);
        } else {
            let _ = write!(s, "{}/{}", self.ncalls_total, self.ncalls_primitive);
        }
        s
    }

    pub(crate) fn absorb(&mut self, other: &FunctionStats) {
        self.ncalls_total += other.ncalls_total;
        self.ncalls_primitive += other.ncalls_primitive;
        self.tottime_ns += other.tottime_ns;
        self.cumtime_ns += other.cumtime_ns;
        if self.tag.is_none() {
            self.tag = other.tag;
        }
    }
}

/// One row of a statement/region table, relative to its enclosing function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub site: CodeSite,
    pub hits: u64,
    pub time_ns: u64,
    pub pct_time: f64,
}

impl RegionStats {
    pub fn time_s(&self) -> f64 {
        ns_to_secs(self.time_ns)
    }

    /// Undefined for sites that were never hit.
    pub fn per_hit_s(&self) -> Option<f64> {
        (self.hits > 0).then(|| self.time_s() / self.hits as f64)
    }
}

/// Region table for one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub function: CodeSite,
    /// Primitive activations of the function.
    pub calls: u64,
    /// Inclusive time of those activations; the denominator of `pct_time`.
    pub total_ns: u64,
    pub regions: Vec<RegionStats>,
}

impl RegionReport {
    pub fn total_s(&self) -> f64 {
        ns_to_secs(self.total_ns)
    }

    pub fn region(&self, symbol: &str) -> Option<&RegionStats> {
        self.regions.iter().find(|r| r.site.symbol == symbol)
    }
}

/// One `(thread, site)` row of the concurrency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadStats {
    #[serde(rename = "tid")]
    pub thread_id: u64,
    /// Process (dump) the thread belonged to.
    #[serde(default)]
    pub source: String,
    pub site: CodeSite,
    pub ncall: u64,
    pub ncall_primitive: u64,
    /// Exclusive time.
    pub tsub_ns: u64,
    /// Inclusive time.
    pub ttot_ns: u64,
}

impl ThreadStats {
    pub fn tsub_s(&self) -> f64 {
        ns_to_secs(self.tsub_ns)
    }

    pub fn ttot_s(&self) -> f64 {
        ns_to_secs(self.ttot_ns)
    }

    pub fn tavg_s(&self) -> f64 {
        if self.ncall == 0 {
            0.0
        } else {
            self.ttot_s() / self.ncall as f64
        }
    }
}

/// Identity shared by every dump of one testbed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub run_id: String,
    pub scenario_id: String,
    /// Simulated users relative to the reference workload.
    pub scale_factor: f64,
    #[serde(default)]
    pub clock: Clock,
}

impl Default for ProfileMeta {
    fn default() -> Self {
        Self {
            run_id: String::new(),
            scenario_id: String::new(),
            scale_factor: 1.0,
            clock: Clock::Wall,
        }
    }
}

/// Provenance of one part of a (possibly merged) profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub source: String,
    pub events: u64,
    pub bracketed_ns: u64,
    pub violations: u64,
}

/// Aggregated function and thread tables for one or more dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub meta: ProfileMeta,
    pub sources: Vec<SourceSummary>,
    pub functions: Vec<FunctionStats>,
    pub threads: Vec<ThreadStats>,
}

impl Profile {
    /// Replays `trace` and builds the tables for a single source.
    pub fn from_trace(meta: ProfileMeta, source: &str, trace: &Trace) -> Result<Self, ProfileError> {
        let r = replay(trace, meta.clock)?;
        let functions = r.function_stats(trace);
        let threads = r.thread_stats(trace, source);
        let summary = SourceSummary {
            source: source.into(),
            events: trace.events.len() as u64,
            bracketed_ns: r.threads.iter().map(|t| t.bracketed_ns).sum(),
            violations: (r.violations.len() + trace.violations.len()) as u64,
        };
        Ok(Self {
            meta,
            sources: alloc::vec![summary],
            functions,
            threads,
        })
    }

    pub fn empty(meta: ProfileMeta) -> Self {
        Self {
            meta,
            sources: Vec::new(),
            functions: Vec::new(),
            threads: Vec::new(),
        }
    }

    pub fn function(&self, symbol: &str) -> Option<&FunctionStats> {
        self.functions.iter().find(|f| f.site.symbol == symbol)
    }

    pub fn total_calls(&self) -> u64 {
        self.functions.iter().map(|f| f.ncalls_total).sum()
    }

    pub fn primitive_calls(&self) -> u64 {
        self.functions.iter().map(|f| f.ncalls_primitive).sum()
    }

    /// Sum of exclusive times, which equals the bracketed time of all threads.
    pub fn total_ns(&self) -> u64 {
        self.functions.iter().map(|f| f.tottime_ns).sum()
    }

    /// Summed inclusive time of sites carrying `tag`.
    pub fn tagged_cumtime_ns(&self, tag: TimeCategory) -> u64 {
        self.functions
            .iter()
            .filter(|f| f.tag == Some(tag))
            .map(|f| f.cumtime_ns)
            .sum()
    }
}
