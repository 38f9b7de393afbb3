use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::event::Trace;
use crate::site::{CodeSite, SiteId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub site: CodeSite,
    /// Samples where the site was the leaf frame.
    pub self_samples: u64,
    /// Samples where the site appeared anywhere on the stack.
    pub total_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub samples: u64,
    /// Ordered by `self_samples`, descending.
    pub sites: Vec<SampleStats>,
}

impl SampleSummary {
    pub fn self_share_pct(&self, symbol: &str) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        let n: u64 = self
            .sites
            .iter()
            .filter(|s| s.site.symbol == symbol)
            .map(|s| s.self_samples)
            .sum();
        100.0 * n as f64 / self.samples as f64
    }
}

/// Attributes stack samples to their leaf (self) and to every distinct frame
/// on the stack (total).
pub fn aggregate_samples(trace: &Trace) -> SampleSummary {
    let mut acc: BTreeMap<SiteId, (u64, u64)> = BTreeMap::new();
    let mut samples = 0;
    let mut seen: Vec<SiteId> = Vec::new();
    for e in trace.samples() {
        samples += 1;
        acc.entry(e.site).or_default().0 += 1;
        seen.clear();
        for s in e.stack.iter().chain(core::iter::once(&e.site)) {
            if !seen.contains(s) {
                seen.push(*s);
                acc.entry(*s).or_default().1 += 1;
            }
        }
    }
    let mut sites: Vec<SampleStats> = acc
        .into_iter()
        .filter_map(|(id, (self_samples, total_samples))| {
            trace.site(id).map(|site| SampleStats {
                site: site.clone(),
                self_samples,
                total_samples,
            })
        })
        .collect();
    sites.sort_by_key(|r| core::cmp::Reverse(r.self_samples));
    SampleSummary { samples, sites }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{EventKind, ProfileEvent};

    fn sample(stack: &[SiteId]) -> ProfileEvent {
        ProfileEvent {
            thread_id: 1,
            kind: EventKind::Sample,
            site: *stack.last().unwrap(),
            wall_ns: 0,
            cpu_ns: 0,
            tag: None,
            stack: stack.to_vec(),
        }
    }

    #[test]
    fn self_and_total_attribution() {
        let mut t = Trace::new();
        let main = t.intern(CodeSite::function("a.rs", 1, "main"));
        let f = t.intern(CodeSite::function("a.rs", 2, "f"));
        let g = t.intern(CodeSite::function("a.rs", 3, "g"));
        for _ in 0..3 {
            t.push(sample(&[main, f]));
        }
        t.push(sample(&[main, g]));
        t.push(sample(&[main, f, f]));
        let s = aggregate_samples(&t);
        assert_eq!(s.samples, 5);
        assert_eq!(s.self_share_pct("f"), 80.0);
        let m = s.sites.iter().find(|x| x.site.symbol == "main").unwrap();
        assert_eq!((m.self_samples, m.total_samples), (0, 5));
        let fs = s.sites.iter().find(|x| x.site.symbol == "f").unwrap();
        assert_eq!(fs.total_samples, 4);
    }

    #[test]
    fn no_samples() {
        let s = aggregate_samples(&Trace::new());
        assert_eq!(s.samples, 0);
        assert_eq!(s.self_share_pct("f"), 0.0);
    }
}
