use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::classify::CategoryBreakdown;
use crate::category::TimeCategory;
use crate::profile::{FunctionStats, Profile};
use crate::site::CodeSite;

const EVIDENCE_ROWS: usize = 3;

/// A ranked optimization candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotFinding {
    pub category: TimeCategory,
    /// Site with the most exclusive time in the category.
    pub site: CodeSite,
    /// Category share of all attributed time, in `(0, 100]`.
    pub share_pct: f64,
    /// Heaviest rows of the category, by exclusive time.
    pub evidence: Vec<FunctionStats>,
    pub recommendation: String,
}

pub fn recommendation(category: TimeCategory) -> &'static str {
    match category {
        TimeCategory::IoWaitPoll => {
            "Socket polling dominates. Replace short fixed-timeout polls with blocking waits or \
             readiness notification, and batch request/response exchanges between services."
        }
        TimeCategory::Sleep => {
            "Fixed sleeps dominate. Replace hard-coded start-up delays with readiness handshakes, \
             or tune each duration to the measured start time of the dependency."
        }
        TimeCategory::Heartbeat => {
            "Liveness checks are costly. Lengthen the heartbeat interval, piggyback liveness on \
             regular traffic, or probe only peers that have gone quiet."
        }
        TimeCategory::VmLifecycle => {
            "Creating and linking entities is expensive. Start independent entities in parallel, \
             reuse warm instances, or provision capacity ahead of demand."
        }
        TimeCategory::UserCompute => {
            "Application code is the hotspot. Profile the dominant function at statement level \
             before changing it."
        }
        TimeCategory::Kernel => "System-call heavy. Buffer writes and flush less often.",
        TimeCategory::Other => "Time is not attributed to a known category. Add category rules for the dominant sites.",
    }
}

/// One finding per category whose share is at least `min_share_pct`,
/// sorted by share (descending) then by site.
pub fn find_hotspots(profile: &Profile, breakdown: &CategoryBreakdown, min_share_pct: f64) -> Vec<HotspotFinding> {
    let mut out = Vec::new();
    for share in &breakdown.categories {
        if !(share.share_pct > 0.0) || share.share_pct < min_share_pct {
            continue;
        }
        let mut rows: Vec<&FunctionStats> = profile
            .functions
            .iter()
            .zip(&breakdown.assignments)
            .filter(|(_, c)| **c == share.category)
            .map(|(f, _)| f)
            .collect();
        rows.sort_by(|a, b| {
            b.tottime_ns
                .cmp(&a.tottime_ns)
                .then_with(|| a.site.to_string().cmp(&b.site.to_string()))
        });
        let Some(top) = rows.first() else { continue };
        out.push(HotspotFinding {
            category: share.category,
            site: top.site.clone(),
            share_pct: share.share_pct.min(100.0),
            evidence: rows.iter().take(EVIDENCE_ROWS).map(|r| (*r).clone()).collect(),
            recommendation: recommendation(share.category).into(),
        });
    }
    out.sort_by(|a, b| {
        b.share_pct
            .total_cmp(&a.share_pct)
            .then_with(|| a.site.to_string().cmp(&b.site.to_string()))
    });
    out
}
