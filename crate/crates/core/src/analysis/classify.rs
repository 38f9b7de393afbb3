use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::TimeCategory;
use crate::ns_to_secs;
use crate::profile::{FunctionStats, Profile};
use crate::site::CodeSite;
use crate::util::glob_match;

/// `pattern` is a case-insensitive wildcard matched against a site's symbol
/// and against its display form (`file:line(symbol)` / `{symbol}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub pattern: String,
    pub category: TimeCategory,
}

impl CategoryRule {
    pub fn new(pattern: impl Into<String>, category: TimeCategory) -> Self {
        Self {
            pattern: pattern.into(),
            category,
        }
    }

    pub fn matches(&self, site: &CodeSite) -> bool {
        glob_match(&self.pattern, &site.symbol) || glob_match(&self.pattern, &site.to_string())
    }
}

/// Ordered rule list; the first matching rule wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRules {
    pub rules: Vec<CategoryRule>,
}

impl CategoryRules {
    pub fn new(rules: Vec<CategoryRule>) -> Self {
        Self { rules }
    }

    /// Defaults matching the site names the testbed instruments.
    pub fn testbed_defaults() -> Self {
        use TimeCategory::*;
        let r = |p: &str, c| CategoryRule::new(p, c);
        Self::new(alloc::vec![
            r("poll", IoWaitPoll),
            r("*poll*", IoWaitPoll),
            r("sleep", Sleep),
            r("*sleep*", Sleep),
            r("*heartbeat*", Heartbeat),
            r("spawn_*", VmLifecycle),
            r("start_*", VmLifecycle),
            r("link_*", VmLifecycle),
            r("*write*", Kernel),
            r("*flush*", Kernel),
            r("*send*", Kernel),
            r("handle_*", UserCompute),
            r("*compute*", UserCompute),
        ])
    }

    /// Instrumentation tags take precedence over rules; unmatched is `Other`.
    pub fn categorize(&self, site: &CodeSite, tag: Option<TimeCategory>) -> TimeCategory {
        if let Some(t) = tag {
            return t;
        }
        self.rules
            .iter()
            .find(|r| r.matches(site))
            .map(|r| r.category)
            .unwrap_or(TimeCategory::Other)
    }

    pub fn categorize_row(&self, row: &FunctionStats) -> TimeCategory {
        self.categorize(&row.site, row.tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub category: TimeCategory,
    pub time_ns: u64,
    pub share_pct: f64,
}

impl CategoryShare {
    pub fn time_s(&self) -> f64 {
        ns_to_secs(self.time_ns)
    }
}

/// Exclusive time of a profile split by category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBreakdown {
    pub total_ns: u64,
    /// All categories, in [`TimeCategory::ALL`] order.
    pub categories: Vec<CategoryShare>,
    /// Category of each row of the classified profile's function table.
    pub assignments: Vec<TimeCategory>,
}

impl CategoryBreakdown {
    pub fn share(&self, c: TimeCategory) -> f64 {
        self.categories[c.index()].share_pct
    }

    pub fn time_ns(&self, c: TimeCategory) -> u64 {
        self.categories[c.index()].time_ns
    }

    pub fn share_sum(&self) -> f64 {
        self.categories.iter().map(|c| c.share_pct).sum()
    }
}

/// Attributes every site's exclusive time to exactly one category.
///
/// Exclusive times partition the bracketed time, so shares of a non-empty
/// profile sum to 100. An empty profile yields all-zero shares.
pub fn classify(profile: &Profile, rules: &CategoryRules) -> CategoryBreakdown {
    let mut time = [0u64; TimeCategory::ALL.len()];
    let assignments: Vec<TimeCategory> = profile.functions.iter().map(|f| rules.categorize_row(f)).collect();
    for (f, c) in profile.functions.iter().zip(&assignments) {
        time[c.index()] += f.tottime_ns;
    }
    let total_ns: u64 = time.iter().sum();
    let categories = TimeCategory::ALL
        .iter()
        .map(|&category| {
            let t = time[category.index()];
            CategoryShare {
                category,
                time_ns: t,
                share_pct: if total_ns == 0 {
                    0.0
                } else {
                    100.0 * t as f64 / total_ns as f64
                },
            }
        })
        .collect();
    CategoryBreakdown {
        total_ns,
        categories,
        assignments,
    }
}
