//! Percentage arithmetic, time-category classification and hotspot ranking.

mod classify;
mod compare;
mod hotspot;
mod percent;

use alloc::string::String;

pub use crate::category::TimeCategory;
pub use classify::{classify, CategoryBreakdown, CategoryRule, CategoryRules, CategoryShare};
pub use compare::{compare, CategoryDelta, CompareOptions, DeltaReport, SiteDelta};
pub use hotspot::{find_hotspots, recommendation, HotspotFinding};
pub use percent::{coarse_percentages, share_of_runtime, CoarsePercentages, RuntimeShare};

pub use crate::util::round_half_up;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("elapsed time is zero")]
    ZeroElapsed,
    #[error("{components} component times but {runs} run times")]
    LengthMismatch { components: usize, runs: usize },
    #[error("run {index} has a non-positive run time")]
    ZeroRuntime { index: usize },
    #[error("cannot compare scenario `{before}` (scale {before_scale}) with `{after}` (scale {after_scale})")]
    ScenarioMismatch {
        before: String,
        after: String,
        before_scale: f64,
        after_scale: f64,
    },
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::category::TimeCategory;
    use crate::profile::{FunctionStats, Profile, ProfileMeta};
    use crate::secs_to_ns;
    use crate::site::CodeSite;

    pub fn fig6_shaped() -> Profile {
        // run 77.621 s: poll 59.322 s, sleep 15.010 s, the rest in the driver
        let row = |site: CodeSite, n: u64, tot: f64, cum: f64, tag| FunctionStats {
            ncalls_total: n,
            ncalls_primitive: n,
            tottime_ns: secs_to_ns(tot),
            cumtime_ns: secs_to_ns(cum),
            tag,
            ..FunctionStats::new(site)
        };
        let mut p = Profile::empty(ProfileMeta::default());
        p.functions = alloc::vec![
            row(
                CodeSite::function("driver.rs", 2, "main"),
                1,
                77.621 - 59.322 - 15.010,
                77.621,
                None
            ),
            row(
                CodeSite::builtin("poll"),
                111580,
                59.322,
                59.322,
                Some(TimeCategory::IoWaitPoll)
            ),
            row(CodeSite::builtin("sleep"), 3, 15.010, 15.010, Some(TimeCategory::Sleep)),
        ];
        p
    }
}
