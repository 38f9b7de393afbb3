use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::replay::{walk, Frame, FrameVisitor};
use super::{Clock, ProfileError, RegionReport, RegionStats};
use crate::event::Trace;
use crate::site::{CodeSite, SiteId};

struct RegionVisitor {
    scope: Vec<SiteId>,
    calls: u64,
    total_ns: u64,
    hits: BTreeMap<SiteId, (u64, u64)>,
}

impl FrameVisitor for RegionVisitor {
    fn close(&mut self, _tid: u64, frame: &Frame, elapsed: u64, below: &[Frame]) {
        if frame.primitive && self.scope.contains(&frame.site) {
            self.calls += 1;
            self.total_ns += elapsed;
        }
        if let Some(parent) = below.last() {
            if parent.primitive && self.scope.contains(&parent.site) {
                let h = self.hits.entry(frame.site).or_insert((0, 0));
                h.0 += 1;
                h.1 += elapsed;
            }
        }
    }
}

fn resolve_scope(trace: &Trace, scope: &str) -> Vec<SiteId> {
    use alloc::string::ToString;
    trace
        .sites
        .iter()
        .enumerate()
        .filter(|(_, s)| s.symbol == scope || s.to_string() == scope)
        .map(|(i, _)| SiteId(i as u32))
        .collect()
}

/// Statement table for the function named `scope` (a bare symbol or the
/// `file:line(symbol)` display form).
///
/// Every direct child activation of a primitive activation of the function
/// counts as one hit of that child's site, with its inclusive time; nested
/// regions roll up into their parent. Because direct children never overlap
/// the rows sum to at most the function's inclusive time, which is the
/// `pct_time` denominator.
pub fn aggregate_regions(trace: &Trace, scope: &str, clock: Clock) -> Result<RegionReport, ProfileError> {
    let ids = resolve_scope(trace, scope);
    let Some(&first) = ids.first() else {
        return Err(ProfileError::UnknownScope(String::from(scope)));
    };
    let mut v = RegionVisitor {
        scope: ids,
        calls: 0,
        total_ns: 0,
        hits: BTreeMap::new(),
    };
    walk(trace, clock, &mut v)?;

    let total = v.total_ns;
    let mut regions: Vec<RegionStats> = v
        .hits
        .into_iter()
        .map(|(site, (hits, time_ns))| RegionStats {
            site: trace.sites[site.index()].clone(),
            hits,
            time_ns,
            pct_time: if total == 0 {
                0.0
            } else {
                (100.0 * time_ns as f64 / total as f64).clamp(0.0, 100.0)
            },
        })
        .collect();
    regions.sort_by(|a, b| line_order(&a.site, &b.site));
    Ok(RegionReport {
        function: trace.sites[first.index()].clone(),
        calls: v.calls,
        total_ns: total,
        regions,
    })
}

fn line_order(a: &CodeSite, b: &CodeSite) -> core::cmp::Ordering {
    (a.line, &a.symbol).cmp(&(b.line, &b.symbol))
}
