//! Report rendering in all three formats.
//!
//! Every render goes through a [`ReportDocument`]: the input rows in their
//! final order plus the sort key and row limit. Text is rendered from the
//! document, so a structured export that is read back renders the same
//! bytes as the original input.
//!
//! Structured export (schema `adnprof-report`, version 1):
//!
//! ```text
//! {"schema":"adnprof-report","version":1,"sort_key":"cumulative","top_n":null,
//!  "body":{"function_table":{"meta":{..},"sources":[..],"functions":[..],"threads":[..]}}}
//! ```
//!
//! The body keeps every row; `top_n` only limits what text and CSV show.
//! CSV has one row per stat row with integer nanosecond columns next to the
//! derived seconds, so a re-parse reproduces every stat field.

use adnprof_core::analysis::{DeltaReport, HotspotFinding};
use adnprof_core::report::{
    order_functions, order_regions, order_threads, render_coarse_table, render_compare, render_function_table,
    render_hotspots, render_line_table, render_thread_table, CoarseRow, ReportError, ReportFormat, ReportKind,
    ReportSpec, SortKey,
};
use adnprof_core::{
    CodeSite, FunctionStats, Profile, ProfileMeta, RegionReport, RegionStats, SiteKind, ThreadStats, TimeCategory,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA: &str = "adnprof-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{kind} cannot be rendered from {input}")]
    InputMismatch { kind: ReportKind, input: &'static str },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("structured report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported report schema `{schema}` version {version}")]
    Schema { schema: String, version: u32 },
}

/// What a report is rendered from.
#[derive(Debug, Clone, Copy)]
pub enum ReportInput<'a> {
    Profile(&'a Profile),
    Regions(&'a RegionReport),
    Coarse(&'a [CoarseRow]),
    Findings(&'a [HotspotFinding]),
    Compare(&'a DeltaReport),
}

impl ReportInput<'_> {
    fn name(&self) -> &'static str {
        match self {
            ReportInput::Profile(_) => "a profile",
            ReportInput::Regions(_) => "a region report",
            ReportInput::Coarse(_) => "coarse rows",
            ReportInput::Findings(_) => "hotspot findings",
            ReportInput::Compare(_) => "a delta report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportBody {
    FunctionTable(Profile),
    LineTable(RegionReport),
    ThreadTable { meta: ProfileMeta, rows: Vec<ThreadStats> },
    CoarseTable(Vec<CoarseRow>),
    HotspotReport(Vec<HotspotFinding>),
    CompareReport(DeltaReport),
}

impl ReportBody {
    pub fn kind(&self) -> ReportKind {
        match self {
            ReportBody::FunctionTable(_) => ReportKind::FunctionTable,
            ReportBody::LineTable(_) => ReportKind::LineTable,
            ReportBody::ThreadTable { .. } => ReportKind::ThreadTable,
            ReportBody::CoarseTable(_) => ReportKind::CoarseTable,
            ReportBody::HotspotReport(_) => ReportKind::HotspotReport,
            ReportBody::CompareReport(_) => ReportKind::CompareReport,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub version: u32,
    pub sort_key: SortKey,
    pub top_n: Option<usize>,
    pub body: ReportBody,
}

fn owned<T: Clone>(rows: Vec<&T>) -> Vec<T> {
    rows.into_iter().cloned().collect()
}

/// Orders the input rows for `spec` and wraps them in a document.
pub fn build_document(input: ReportInput<'_>, spec: &ReportSpec) -> Result<ReportDocument, ExportError> {
    let key = spec.resolve_sort()?;
    let mismatch = || ExportError::InputMismatch {
        kind: spec.kind,
        input: input.name(),
    };
    let body = match (spec.kind, input) {
        (ReportKind::FunctionTable, ReportInput::Profile(p)) => {
            let mut p = p.clone();
            p.functions = owned(order_functions(&p.functions, key, None));
            ReportBody::FunctionTable(p)
        }
        (ReportKind::ThreadTable, ReportInput::Profile(p)) => ReportBody::ThreadTable {
            meta: p.meta.clone(),
            rows: owned(order_threads(&p.threads, key, None)),
        },
        (ReportKind::LineTable, ReportInput::Regions(r)) => {
            let mut r = r.clone();
            r.regions = owned(order_regions(&r.regions, key, None));
            ReportBody::LineTable(r)
        }
        (ReportKind::CoarseTable, ReportInput::Coarse(rows)) => {
            let mut v = rows.to_vec();
            match key {
                SortKey::Name => v.sort_by(|a, b| a.name.cmp(&b.name)),
                SortKey::Elapsed => v.sort_by(|a, b| b.breakdown.elapsed_s.total_cmp(&a.breakdown.elapsed_s)),
                _ => {}
            }
            ReportBody::CoarseTable(v)
        }
        (ReportKind::HotspotReport, ReportInput::Findings(f)) => ReportBody::HotspotReport(f.to_vec()),
        (ReportKind::CompareReport, ReportInput::Compare(d)) => {
            let mut d = d.clone();
            if key == SortKey::Name {
                d.sites.sort_by_cached_key(|s| s.site.to_string());
            }
            ReportBody::CompareReport(d)
        }
        _ => return Err(mismatch()),
    };
    Ok(ReportDocument {
        schema: REPORT_SCHEMA.into(),
        version: REPORT_VERSION,
        sort_key: key,
        top_n: spec.top_n,
        body,
    })
}

pub fn render_text(doc: &ReportDocument) -> String {
    let (key, top) = (doc.sort_key, doc.top_n);
    match &doc.body {
        ReportBody::FunctionTable(p) => render_function_table(p, key, top),
        ReportBody::LineTable(r) => render_line_table(r, key, top),
        ReportBody::ThreadTable { meta, rows } => render_thread_table(rows, meta.clock, key, top),
        ReportBody::CoarseTable(rows) => render_coarse_table(rows, key, top),
        ReportBody::HotspotReport(f) => render_hotspots(f, top),
        ReportBody::CompareReport(d) => render_compare(d, key, top),
    }
}

pub fn render_structured(doc: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).unwrap_or_default();
    s.push('\n');
    s
}

pub fn import_structured(text: &str) -> Result<ReportDocument, ExportError> {
    let doc: ReportDocument = serde_json::from_str(text)?;
    if doc.schema != REPORT_SCHEMA || doc.version != REPORT_VERSION {
        return Err(ExportError::Schema {
            schema: doc.schema,
            version: doc.version,
        });
    }
    Ok(doc)
}

/// Renders `input` in the format named by `spec`.
pub fn render(input: ReportInput<'_>, spec: &ReportSpec) -> Result<String, ExportError> {
    let doc = build_document(input, spec)?;
    Ok(match spec.format {
        ReportFormat::Text => render_text(&doc),
        ReportFormat::Csv => render_csv(&doc)?,
        ReportFormat::Structured => render_structured(&doc),
    })
}

// ---- csv ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRow {
    pub file: String,
    pub line: u32,
    pub symbol: String,
    pub kind: SiteKind,
    pub tag: Option<TimeCategory>,
    pub ncalls_total: u64,
    pub ncalls_primitive: u64,
    pub tottime_ns: u64,
    pub cumtime_ns: u64,
    pub tottime_s: f64,
    pub percall_tot_s: f64,
    pub cumtime_s: f64,
    pub percall_cum_s: f64,
}

impl From<&FunctionStats> for FunctionRow {
    fn from(f: &FunctionStats) -> Self {
        Self {
            file: f.site.file.clone(),
            line: f.site.line,
            symbol: f.site.symbol.clone(),
            kind: f.site.kind,
            tag: f.tag,
            ncalls_total: f.ncalls_total,
            ncalls_primitive: f.ncalls_primitive,
            tottime_ns: f.tottime_ns,
            cumtime_ns: f.cumtime_ns,
            tottime_s: f.tottime_s(),
            percall_tot_s: f.percall_tot_s(),
            cumtime_s: f.cumtime_s(),
            percall_cum_s: f.percall_cum_s(),
        }
    }
}

impl FunctionRow {
    pub fn to_stats(&self) -> FunctionStats {
        FunctionStats {
            site: CodeSite::new(self.file.clone(), self.line, self.symbol.clone(), self.kind),
            ncalls_total: self.ncalls_total,
            ncalls_primitive: self.ncalls_primitive,
            tottime_ns: self.tottime_ns,
            cumtime_ns: self.cumtime_ns,
            tag: self.tag,
        }
    }
}

/// Region rows repeat the enclosing function so the table can be rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub function_file: String,
    pub function_line: u32,
    pub function_symbol: String,
    pub function_calls: u64,
    pub function_total_ns: u64,
    pub file: String,
    pub line: u32,
    pub symbol: String,
    pub kind: SiteKind,
    pub hits: u64,
    pub time_ns: u64,
    pub time_s: f64,
    pub per_hit_s: Option<f64>,
    pub pct_time: f64,
}

impl RegionRow {
    fn new(r: &RegionReport, s: &RegionStats) -> Self {
        Self {
            function_file: r.function.file.clone(),
            function_line: r.function.line,
            function_symbol: r.function.symbol.clone(),
            function_calls: r.calls,
            function_total_ns: r.total_ns,
            file: s.site.file.clone(),
            line: s.site.line,
            symbol: s.site.symbol.clone(),
            kind: s.site.kind,
            hits: s.hits,
            time_ns: s.time_ns,
            time_s: s.time_s(),
            per_hit_s: s.per_hit_s(),
            pct_time: s.pct_time,
        }
    }

    pub fn to_stats(&self) -> RegionStats {
        RegionStats {
            site: CodeSite::new(self.file.clone(), self.line, self.symbol.clone(), self.kind),
            hits: self.hits,
            time_ns: self.time_ns,
            pct_time: self.pct_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadRow {
    pub tid: u64,
    pub source: String,
    pub file: String,
    pub line: u32,
    pub symbol: String,
    pub kind: SiteKind,
    pub ncall: u64,
    pub ncall_primitive: u64,
    pub tsub_ns: u64,
    pub ttot_ns: u64,
    pub tsub_s: f64,
    pub ttot_s: f64,
    pub tavg_s: f64,
}

impl From<&ThreadStats> for ThreadRow {
    fn from(t: &ThreadStats) -> Self {
        Self {
            tid: t.thread_id,
            source: t.source.clone(),
            file: t.site.file.clone(),
            line: t.site.line,
            symbol: t.site.symbol.clone(),
            kind: t.site.kind,
            ncall: t.ncall,
            ncall_primitive: t.ncall_primitive,
            tsub_ns: t.tsub_ns,
            ttot_ns: t.ttot_ns,
            tsub_s: t.tsub_s(),
            ttot_s: t.ttot_s(),
            tavg_s: t.tavg_s(),
        }
    }
}

impl ThreadRow {
    pub fn to_stats(&self) -> ThreadStats {
        ThreadStats {
            thread_id: self.tid,
            source: self.source.clone(),
            site: CodeSite::new(self.file.clone(), self.line, self.symbol.clone(), self.kind),
            ncall: self.ncall,
            ncall_primitive: self.ncall_primitive,
            tsub_ns: self.tsub_ns,
            ttot_ns: self.ttot_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseCsvRow {
    pub name: String,
    pub elapsed_s: f64,
    pub user_s: f64,
    pub system_s: f64,
    pub other_s: f64,
    pub oversubscribed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotRow {
    pub rank: usize,
    pub category: TimeCategory,
    pub share_pct: f64,
    pub file: String,
    pub line: u32,
    pub symbol: String,
    pub kind: SiteKind,
    pub recommendation: String,
}

/// Category rows carry `category`; site rows carry the site columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub section: String,
    pub category: Option<TimeCategory>,
    pub file: Option<String>,
    pub line: Option<u32>,
    pub symbol: Option<String>,
    pub before_calls: Option<u64>,
    pub after_calls: Option<u64>,
    pub before_s: f64,
    pub after_s: f64,
    pub delta_s: f64,
    pub before_pct: Option<f64>,
    pub after_pct: Option<f64>,
    pub delta_pct: Option<f64>,
    pub regression: bool,
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).unwrap_or_default())
}

pub fn render_csv(doc: &ReportDocument) -> Result<String, ExportError> {
    let top = doc.top_n.unwrap_or(usize::MAX);
    match &doc.body {
        ReportBody::FunctionTable(p) => write_rows(p.functions.iter().take(top).map(FunctionRow::from)),
        ReportBody::LineTable(r) => write_rows(r.regions.iter().take(top).map(|s| RegionRow::new(r, s))),
        ReportBody::ThreadTable { rows, .. } => write_rows(rows.iter().take(top).map(ThreadRow::from)),
        ReportBody::CoarseTable(rows) => write_rows(rows.iter().take(top).map(|r| CoarseCsvRow {
            name: r.name.clone(),
            elapsed_s: r.breakdown.elapsed_s,
            user_s: r.breakdown.user_s,
            system_s: r.breakdown.system_s,
            other_s: r.breakdown.other_s,
            oversubscribed: r.breakdown.oversubscribed,
        })),
        ReportBody::HotspotReport(f) => write_rows(f.iter().take(top).enumerate().map(|(i, f)| HotspotRow {
            rank: i + 1,
            category: f.category,
            share_pct: f.share_pct,
            file: f.site.file.clone(),
            line: f.site.line,
            symbol: f.site.symbol.clone(),
            kind: f.site.kind,
            recommendation: f.recommendation.clone(),
        })),
        ReportBody::CompareReport(d) => {
            let cats = d.categories.iter().map(|c| CompareRow {
                section: "category".into(),
                category: Some(c.category),
                file: None,
                line: None,
                symbol: None,
                before_calls: None,
                after_calls: None,
                before_s: c.before_s,
                after_s: c.after_s,
                delta_s: c.delta_s,
                before_pct: Some(c.before_pct),
                after_pct: Some(c.after_pct),
                delta_pct: Some(c.delta_pct),
                regression: c.regression,
            });
            let sites = d.sites.iter().take(top).map(|s| CompareRow {
                section: "site".into(),
                category: None,
                file: Some(s.site.file.clone()),
                line: Some(s.site.line),
                symbol: Some(s.site.symbol.clone()),
                before_calls: Some(s.before_calls),
                after_calls: Some(s.after_calls),
                before_s: s.before_cum_s,
                after_s: s.after_cum_s,
                delta_s: s.delta_cum_s,
                before_pct: None,
                after_pct: None,
                delta_pct: s.delta_cum_pct,
                regression: false,
            });
            write_rows(cats.chain(sites))
        }
    }
}

pub fn parse_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, ExportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

pub fn parse_function_csv(text: &str) -> Result<Vec<FunctionStats>, ExportError> {
    Ok(parse_csv::<FunctionRow>(text)?
        .iter()
        .map(FunctionRow::to_stats)
        .collect())
}

pub fn parse_thread_csv(text: &str) -> Result<Vec<ThreadStats>, ExportError> {
    Ok(parse_csv::<ThreadRow>(text)?.iter().map(ThreadRow::to_stats).collect())
}

/// Rebuilds a region report; `None` for a CSV without rows.
pub fn parse_region_csv(text: &str) -> Result<Option<RegionReport>, ExportError> {
    let rows = parse_csv::<RegionRow>(text)?;
    Ok(rows.first().map(|f| RegionReport {
        function: CodeSite::function(f.function_file.clone(), f.function_line, f.function_symbol.clone()),
        calls: f.function_calls,
        total_ns: f.function_total_ns,
        regions: rows.iter().map(RegionRow::to_stats).collect(),
    }))
}
