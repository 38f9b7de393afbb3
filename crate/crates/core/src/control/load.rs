use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Requests a client issues for a rate and duration; zero users issue none.
pub fn request_count(users: u32, rate: f64, duration_s: f64) -> u64 {
    if users == 0 || !(rate > 0.0) || !(duration_s > 0.0) {
        return 0;
    }
    libm::round(rate * duration_s) as u64
}

/// Nearest-rank quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = libm::ceil(q.clamp(0.0, 1.0) * sorted.len() as f64) as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    pub fn from_samples(mut ms: Vec<f64>) -> Self {
        ms.sort_by(f64::total_cmp);
        let q = |p| quantile(&ms, p).unwrap_or(0.0);
        Self {
            p50_ms: q(0.5),
            p90_ms: q(0.9),
            p99_ms: q(0.99),
            max_ms: q(1.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub client: String,
    pub users: u32,
    pub rate: f64,
    pub duration_s: f64,
    pub scale_factor: f64,
    pub sent: u64,
    pub answered: u64,
    pub errors: u64,
    /// Answered requests per `wm/instance`.
    pub per_instance: BTreeMap<String, u64>,
    pub latency: LatencySummary,
}

impl LoadReport {
    /// Sums counts; latency quantiles are taken from the first report.
    pub fn combine(reports: &[LoadReport]) -> LoadReport {
        let mut out = reports.first().cloned().unwrap_or_default();
        for r in reports.iter().skip(1) {
            out.sent += r.sent;
            out.answered += r.answered;
            out.errors += r.errors;
            out.users += r.users;
            for (k, v) in &r.per_instance {
                *out.per_instance.entry(k.clone()).or_default() += v;
            }
        }
        out
    }
}
