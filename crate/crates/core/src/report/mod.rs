//! Report specification, row ordering and fixed-width text tables.
//!
//! The text layouts follow the classic interpreter profilers: the function
//! table is pstats-shaped, the line table line_profiler-shaped and the
//! thread table yappi-shaped. CSV and structured exports live in the
//! `adnprof` crate; they share the ordering implemented here.

mod text;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::profile::{FunctionStats, RegionStats, ThreadStats};

pub use text::{
    fmt_g, render_coarse_table, render_compare, render_function_table, render_hotspots, render_line_table,
    render_thread_table, CoarseRow, FUNCTION_HEADER, LINE_HEADER, THREAD_HEADER,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("sort key `{key}` is not valid for {kind}")]
    InvalidSortKey { kind: ReportKind, key: SortKey },
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    FunctionTable,
    LineTable,
    ThreadTable,
    CoarseTable,
    HotspotReport,
    CompareReport,
}

impl ReportKind {
    pub const ALL: [ReportKind; 6] = [
        ReportKind::FunctionTable,
        ReportKind::LineTable,
        ReportKind::ThreadTable,
        ReportKind::CoarseTable,
        ReportKind::HotspotReport,
        ReportKind::CompareReport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::FunctionTable => "function_table",
            ReportKind::LineTable => "line_table",
            ReportKind::ThreadTable => "thread_table",
            ReportKind::CoarseTable => "coarse_table",
            ReportKind::HotspotReport => "hotspot_report",
            ReportKind::CompareReport => "compare_report",
        }
    }

    pub fn default_sort(self) -> SortKey {
        match self {
            ReportKind::FunctionTable => SortKey::Cumulative,
            ReportKind::LineTable => SortKey::Line,
            ReportKind::ThreadTable => SortKey::TotalTime,
            ReportKind::CoarseTable => SortKey::Input,
            ReportKind::HotspotReport => SortKey::Share,
            ReportKind::CompareReport => SortKey::Delta,
        }
    }

    pub fn accepts(self, key: SortKey) -> bool {
        use SortKey::*;
        key == Input
            || match self {
                ReportKind::FunctionTable => matches!(key, Cumulative | Tottime | Calls | Name),
                ReportKind::LineTable => matches!(key, Line | Time | Hits),
                ReportKind::ThreadTable => matches!(key, TotalTime | SubTime | Calls | Name),
                ReportKind::CoarseTable => matches!(key, Name | Elapsed),
                ReportKind::HotspotReport => matches!(key, Share),
                ReportKind::CompareReport => matches!(key, Delta | Name),
            }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let short = match t.as_str() {
            "function" | "functions" => Some(ReportKind::FunctionTable),
            "line" | "lines" => Some(ReportKind::LineTable),
            "thread" | "threads" => Some(ReportKind::ThreadTable),
            "coarse" => Some(ReportKind::CoarseTable),
            "hotspot" | "hotspots" => Some(ReportKind::HotspotReport),
            "compare" => Some(ReportKind::CompareReport),
            _ => None,
        };
        short
            .or_else(|| ReportKind::ALL.into_iter().find(|k| k.as_str() == t))
            .ok_or(ReportError::Unknown {
                what: "report kind",
                value: t,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    /// Keep input order.
    Input,
    Cumulative,
    Tottime,
    Calls,
    Name,
    Line,
    Time,
    Hits,
    TotalTime,
    SubTime,
    Elapsed,
    Share,
    Delta,
}

impl SortKey {
    const NAMES: [(&'static str, SortKey); 13] = [
        ("input", SortKey::Input),
        ("cumulative", SortKey::Cumulative),
        ("tottime", SortKey::Tottime),
        ("calls", SortKey::Calls),
        ("name", SortKey::Name),
        ("line", SortKey::Line),
        ("time", SortKey::Time),
        ("hits", SortKey::Hits),
        ("totaltime", SortKey::TotalTime),
        ("subtime", SortKey::SubTime),
        ("elapsed", SortKey::Elapsed),
        ("share", SortKey::Share),
        ("delta", SortKey::Delta),
    ];

    pub fn as_str(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(_, k)| *k == self)
            .map(|(n, _)| *n)
            .unwrap_or("input")
    }

    /// The "Ordered by:" phrase of the text tables.
    pub fn description(self) -> &'static str {
        match self {
            SortKey::Input => "input order",
            SortKey::Cumulative => "cumulative time",
            SortKey::Tottime => "internal time",
            SortKey::Calls => "call count",
            SortKey::Name => "name",
            SortKey::Line => "line number",
            SortKey::Time => "time",
            SortKey::Hits => "hits",
            SortKey::TotalTime => "totaltime, desc",
            SortKey::SubTime => "subtime, desc",
            SortKey::Elapsed => "elapsed time",
            SortKey::Share => "share, desc",
            SortKey::Delta => "absolute change, desc",
        }
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortKey {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let t = match t.as_str() {
            "cumtime" | "cum" => "cumulative",
            "ncalls" | "ncall" => "calls",
            "ttot" => "totaltime",
            "tsub" => "subtime",
            other => other,
        };
        Self::NAMES
            .iter()
            .find(|(n, _)| *n == t)
            .map(|(_, k)| *k)
            .ok_or(ReportError::Unknown {
                what: "sort key",
                value: t.into(),
            })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(ReportError::Unknown {
                what: "report format",
                value: other.into(),
            }),
        }
    }
}

/// What to render and how. Output location is handled by the caller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub kind: ReportKind,
    pub sort_key: Option<SortKey>,
    /// `None` is unlimited.
    pub top_n: Option<usize>,
    pub format: ReportFormat,
}

impl ReportSpec {
    pub fn new(kind: ReportKind) -> Self {
        Self {
            kind,
            sort_key: None,
            top_n: None,
            format: ReportFormat::Text,
        }
    }

    pub fn sorted_by(mut self, key: SortKey) -> Self {
        self.sort_key = Some(key);
        self
    }

    pub fn top(mut self, n: usize) -> Self {
        self.top_n = Some(n.max(1));
        self
    }

    pub fn format(mut self, format: ReportFormat) -> Self {
        self.format = format;
        self
    }

    /// The effective sort key, or `InvalidSortKey`.
    pub fn resolve_sort(&self) -> Result<SortKey, ReportError> {
        let key = self.sort_key.unwrap_or(self.kind.default_sort());
        if self.kind.accepts(key) {
            Ok(key)
        } else {
            Err(ReportError::InvalidSortKey { kind: self.kind, key })
        }
    }
}

fn limit<T>(mut rows: Vec<T>, top_n: Option<usize>) -> Vec<T> {
    if let Some(n) = top_n {
        rows.truncate(n);
    }
    rows
}

/// Stable ordering of function rows; numeric keys sort descending.
pub fn order_functions(rows: &[FunctionStats], key: SortKey, top_n: Option<usize>) -> Vec<&FunctionStats> {
    use alloc::string::ToString;
    let mut v: Vec<&FunctionStats> = rows.iter().collect();
    match key {
        SortKey::Cumulative => v.sort_by_key(|r| core::cmp::Reverse(r.cumtime_ns)),
        SortKey::Tottime => v.sort_by_key(|r| core::cmp::Reverse(r.tottime_ns)),
        SortKey::Calls => v.sort_by_key(|r| core::cmp::Reverse(r.ncalls_total)),
        SortKey::Name => v.sort_by_cached_key(|r| r.site.to_string()),
        _ => {}
    }
    limit(v, top_n)
}

pub fn order_regions(rows: &[RegionStats], key: SortKey, top_n: Option<usize>) -> Vec<&RegionStats> {
    let mut v: Vec<&RegionStats> = rows.iter().collect();
    match key {
        SortKey::Line => v.sort_by_key(|a| a.site.line),
        SortKey::Time => v.sort_by_key(|r| core::cmp::Reverse(r.time_ns)),
        SortKey::Hits => v.sort_by_key(|r| core::cmp::Reverse(r.hits)),
        _ => {}
    }
    limit(v, top_n)
}

pub fn order_threads(rows: &[ThreadStats], key: SortKey, top_n: Option<usize>) -> Vec<&ThreadStats> {
    use alloc::string::ToString;
    let mut v: Vec<&ThreadStats> = rows.iter().collect();
    match key {
        SortKey::TotalTime => v.sort_by_key(|r| core::cmp::Reverse(r.ttot_ns)),
        SortKey::SubTime => v.sort_by_key(|r| core::cmp::Reverse(r.tsub_ns)),
        SortKey::Calls => v.sort_by_key(|r| core::cmp::Reverse(r.ncall)),
        SortKey::Name => v.sort_by_cached_key(|r| r.site.to_string()),
        _ => {}
    }
    limit(v, top_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_key_validation() {
        let spec = ReportSpec::new(ReportKind::LineTable).sorted_by(SortKey::Cumulative);
        assert_eq!(
            spec.resolve_sort(),
            Err(ReportError::InvalidSortKey {
                kind: ReportKind::LineTable,
                key: SortKey::Cumulative
            })
        );
        assert_eq!(
            ReportSpec::new(ReportKind::ThreadTable).resolve_sort(),
            Ok(SortKey::TotalTime)
        );
    }

    #[test]
    fn parse_names() {
        assert_eq!("cumtime".parse::<SortKey>().unwrap(), SortKey::Cumulative);
        assert_eq!("threads".parse::<ReportKind>().unwrap(), ReportKind::ThreadTable);
        assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Structured);
        assert!("bogus".parse::<SortKey>().is_err());
    }
}
