use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::classify::{classify, CategoryRules};
use super::AnalysisError;
use crate::category::TimeCategory;
use crate::ns_to_secs;
use crate::profile::Profile;
use crate::site::CodeSite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// A category growing by more than this many seconds is a regression.
    pub regression_epsilon_s: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            regression_epsilon_s: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDelta {
    pub category: TimeCategory,
    pub before_s: f64,
    pub after_s: f64,
    pub delta_s: f64,
    pub before_pct: f64,
    pub after_pct: f64,
    /// Percentage points.
    pub delta_pct: f64,
    pub regression: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDelta {
    pub site: CodeSite,
    pub before_calls: u64,
    pub after_calls: u64,
    pub before_cum_s: f64,
    pub after_cum_s: f64,
    pub delta_cum_s: f64,
    /// Relative change of inclusive time in percent; `None` when the site
    /// had no time before.
    pub delta_cum_pct: Option<f64>,
}

impl SiteDelta {
    /// `before_calls / after_calls`, when both are non-zero.
    pub fn call_reduction(&self) -> Option<f64> {
        (self.before_calls > 0 && self.after_calls > 0).then(|| self.before_calls as f64 / self.after_calls as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub scenario_id: String,
    pub scale_factor: f64,
    pub before_total_s: f64,
    pub after_total_s: f64,
    /// All categories, in [`TimeCategory::ALL`] order.
    pub categories: Vec<CategoryDelta>,
    /// Ordered by absolute inclusive-time change, largest first.
    pub sites: Vec<SiteDelta>,
    pub regressions: Vec<TimeCategory>,
}

impl DeltaReport {
    pub fn category(&self, c: TimeCategory) -> &CategoryDelta {
        &self.categories[c.index()]
    }

    pub fn site(&self, symbol: &str) -> Option<&SiteDelta> {
        self.sites.iter().find(|s| s.site.symbol == symbol)
    }
}

/// Per-category and per-site deltas from `before` to `after`.
pub fn compare(
    before: &Profile,
    after: &Profile,
    rules: &CategoryRules,
    options: &CompareOptions,
) -> Result<DeltaReport, AnalysisError> {
    if before.meta.scenario_id != after.meta.scenario_id || before.meta.scale_factor != after.meta.scale_factor {
        return Err(AnalysisError::ScenarioMismatch {
            before: before.meta.scenario_id.clone(),
            after: after.meta.scenario_id.clone(),
            before_scale: before.meta.scale_factor,
            after_scale: after.meta.scale_factor,
        });
    }
    let cb = classify(before, rules);
    let ca = classify(after, rules);
    let mut regressions = Vec::new();
    let categories = TimeCategory::ALL
        .iter()
        .map(|&c| {
            let b = ns_to_secs(cb.time_ns(c));
            let a = ns_to_secs(ca.time_ns(c));
            let regression = a - b > options.regression_epsilon_s;
            if regression {
                regressions.push(c);
            }
            CategoryDelta {
                category: c,
                before_s: b,
                after_s: a,
                delta_s: a - b,
                before_pct: cb.share(c),
                after_pct: ca.share(c),
                delta_pct: ca.share(c) - cb.share(c),
                regression,
            }
        })
        .collect();

    let mut sites: Vec<SiteDelta> = before
        .pair_with(after)
        .into_iter()
        .filter_map(|(b, a)| {
            let site = b.or(a)?.site.clone();
            let (bc, bt) = b.map_or((0, 0), |f| (f.ncalls_total, f.cumtime_ns));
            let (ac, at) = a.map_or((0, 0), |f| (f.ncalls_total, f.cumtime_ns));
            let (bs, as_) = (ns_to_secs(bt), ns_to_secs(at));
            Some(SiteDelta {
                site,
                before_calls: bc,
                after_calls: ac,
                before_cum_s: bs,
                after_cum_s: as_,
                delta_cum_s: as_ - bs,
                delta_cum_pct: (bt > 0).then(|| 100.0 * (as_ - bs) / bs),
            })
        })
        .collect();
    sites.sort_by(|x, y| {
        y.delta_cum_s
            .abs()
            .total_cmp(&x.delta_cum_s.abs())
            .then_with(|| x.site.to_string().cmp(&y.site.to_string()))
    });

    Ok(DeltaReport {
        scenario_id: before.meta.scenario_id.clone(),
        scale_factor: before.meta.scale_factor,
        before_total_s: ns_to_secs(cb.total_ns),
        after_total_s: ns_to_secs(ca.total_ns),
        categories,
        sites,
        regressions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fixtures::fig6_shaped;
    use crate::profile::FunctionStats;
    use crate::secs_to_ns;

    #[test]
    fn identical_inputs_have_zero_deltas() {
        let p = fig6_shaped();
        let d = compare(&p, &p, &CategoryRules::testbed_defaults(), &CompareOptions::default()).unwrap();
        assert!(d.categories.iter().all(|c| c.delta_s == 0.0 && c.delta_pct == 0.0));
        assert!(d.sites.iter().all(|s| s.delta_cum_s == 0.0));
        assert!(d.regressions.is_empty());
    }

    #[test]
    fn shorter_sleeps_shrink_sleep_category() {
        // three 5 s sleeps cut to 0.5 s
        let before = fig6_shaped();
        let mut after = before.clone();
        let s: &mut FunctionStats = after.functions.iter_mut().find(|f| f.site.symbol == "sleep").unwrap();
        s.tottime_ns = secs_to_ns(1.5);
        s.cumtime_ns = secs_to_ns(1.5);
        let d = compare(
            &before,
            &after,
            &CategoryRules::testbed_defaults(),
            &CompareOptions::default(),
        )
        .unwrap();
        let sleep = d.category(TimeCategory::Sleep);
        assert!((sleep.delta_s + 13.51).abs() < 1e-6);
        assert!(d.regressions.is_empty());
        assert_eq!(d.sites[0].site.symbol, "sleep");
    }

    #[test]
    fn growth_beyond_epsilon_is_a_regression() {
        let before = fig6_shaped();
        let mut after = before.clone();
        after.functions[1].tottime_ns += secs_to_ns(1.0);
        let d = compare(&before, &after, &CategoryRules::default(), &CompareOptions::default()).unwrap();
        assert_eq!(d.regressions, [TimeCategory::IoWaitPoll]);
    }

    #[test]
    fn scenario_must_match() {
        let before = fig6_shaped();
        let mut after = before.clone();
        after.meta.scale_factor = 0.5;
        assert!(matches!(
            compare(&before, &after, &CategoryRules::default(), &CompareOptions::default()),
            Err(AnalysisError::ScenarioMismatch { .. })
        ));
    }
}
