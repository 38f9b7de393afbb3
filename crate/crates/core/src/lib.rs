//! Allocation-only core of `adnprof`.
//!
//! Everything here is a pure function over in-memory data: replaying raw
//! enter/exit/sample event streams into function, region and thread tables,
//! the percentage arithmetic used for coarse and function-level breakdowns,
//! time-category classification and hotspot ranking, fixed-width text
//! rendering, and the state machines of the control-plane testbed (bootstrap
//! ordering, wire framing, workflow scaling, heartbeat liveness).
//!
//! Clocks, sockets, processes and files live in the `adnprof` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod category;
pub mod coarse;
pub mod control;
pub mod event;
pub mod profile;
pub mod report;
pub mod site;
pub(crate) mod util;

pub use category::TimeCategory;
pub use coarse::CoarseBreakdown;
pub use event::{EventKind, NestingViolation, ProfileEvent, Trace, ViolationKind};
pub use profile::{Clock, FunctionStats, Profile, ProfileMeta, RegionReport, RegionStats, ThreadStats};
pub use site::{CodeSite, SiteId, SiteKind};

/// Nanoseconds per second.
pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Converts an integer nanosecond count to seconds.
#[inline]
pub fn ns_to_secs(ns: u64) -> f64 {
    ns as f64 / NANOS_PER_SEC as f64
}

/// Converts seconds to whole nanoseconds, rounding to nearest.
#[inline]
pub fn secs_to_ns(secs: f64) -> u64 {
    if secs <= 0.0 {
        0
    } else {
        libm::round(secs * NANOS_PER_SEC as f64) as u64
    }
}
