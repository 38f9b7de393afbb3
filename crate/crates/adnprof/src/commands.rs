//! The post-run subcommands. Each writes one artifact and returns its
//! path; `-` as the output path means stdout.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use adnprof_core::analysis::{classify, compare, find_hotspots, AnalysisError, CategoryRules, CompareOptions};
use adnprof_core::profile::aggregate_regions;
use adnprof_core::report::{CoarseRow, ReportError, ReportFormat, ReportKind, ReportSpec};
use adnprof_core::Profile;
use serde::{Deserialize, Serialize};

use crate::dump::{write_json, AnalysisDoc, FormatError, ProfileInput, FORMAT_VERSION};
use crate::export::{
    build_document, import_structured, render_csv, render_structured, render_text, ExportError, ReportBody,
    ReportDocument, ReportInput,
};
use crate::instrument::{calibrate, ClockCalibration};
use crate::run::RunError;
use crate::scenario::{load_rules, ConfigFileError};
use crate::testbed::TestbedError;

pub const CALIBRATION_FORMAT: &str = "adnprof-calibration";

/// Overhead share a profiled function may add to its own wall time.
pub const OVERHEAD_BUDGET_PCT: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, scenario or rule files.
    #[error("{0}")]
    Config(String),
    /// Everything that fails after the inputs were accepted.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigFileError> for CliError {
    fn from(e: ConfigFileError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Report(_) | ExportError::InputMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Testbed(TestbedError::Config(_)) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn write_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Where an artifact derived from `input` goes by default.
fn artifact_dir(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.into()
    } else {
        input.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn emit(out: &Path, text: &str) -> Result<Option<PathBuf>, CliError> {
    if out == Path::new("-") {
        print!("{text}");
        return Ok(None);
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    }
    fs::write(out, text).map_err(|e| write_err(out, e))?;
    Ok(Some(out.into()))
}

fn rules_or_default(rules: Option<&Path>) -> Result<CategoryRules, CliError> {
    Ok(match rules {
        Some(p) => load_rules(p)?,
        None => CategoryRules::testbed_defaults(),
    })
}

#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    pub rules: Option<PathBuf>,
    pub threshold_pct: f64,
    pub out: Option<PathBuf>,
}

/// Merges the input, classifies it and ranks hotspots.
pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(AnalysisDoc, Option<PathBuf>), CliError> {
    if !(a.threshold_pct >= 0.0 && a.threshold_pct <= 100.0) {
        return Err(CliError::Config(format!(
            "threshold {} is not a percentage",
            a.threshold_pct
        )));
    }
    let rules = rules_or_default(a.rules.as_deref())?;
    let profile = ProfileInput::load(&a.input)?.profile()?;
    let breakdown = classify(&profile, &rules);
    let findings = find_hotspots(&profile, &breakdown, a.threshold_pct);
    let doc = AnalysisDoc::new(profile, rules, breakdown, findings, a.threshold_pct);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| artifact_dir(&a.input).join("analysis.json"));
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    let path = emit(&out, &text)?;
    Ok((doc, path))
}

#[derive(Debug, Clone)]
pub struct ReportArgs {
    pub input: PathBuf,
    pub spec: ReportSpec,
    /// Scope function of a line table.
    pub scope: Option<String>,
    pub rules: Option<PathBuf>,
    pub threshold_pct: f64,
    pub out: Option<PathBuf>,
}

fn extension(f: ReportFormat) -> &'static str {
    match f {
        ReportFormat::Text => "txt",
        ReportFormat::Csv => "csv",
        ReportFormat::Structured => "json",
    }
}

/// A structured report export, recognised by its leading schema key.
fn is_structured_report(path: &Path) -> bool {
    let Ok(f) = fs::File::open(path) else {
        return false;
    };
    let mut lines = BufReader::new(f).lines();
    matches!(lines.next(), Some(Ok(l)) if l.trim() == "{")
        && matches!(lines.next(), Some(Ok(l)) if l.trim_start().starts_with("\"schema\""))
}

/// Re-orders a stored report body for a new spec.
fn rebuild(body: &ReportBody, spec: &ReportSpec) -> Result<ReportDocument, ExportError> {
    match body {
        ReportBody::FunctionTable(p) => build_document(ReportInput::Profile(p), spec),
        ReportBody::ThreadTable { meta, rows } => {
            let mut p = Profile::empty(meta.clone());
            p.threads = rows.clone();
            build_document(ReportInput::Profile(&p), spec)
        }
        ReportBody::LineTable(r) => build_document(ReportInput::Regions(r), spec),
        ReportBody::CoarseTable(rows) => build_document(ReportInput::Coarse(rows), spec),
        ReportBody::HotspotReport(f) => build_document(ReportInput::Findings(f), spec),
        ReportBody::CompareReport(d) => build_document(ReportInput::Compare(d), spec),
    }
}

/// Renders `input` per `spec`.
pub fn cmd_report(a: &ReportArgs) -> Result<(String, Option<PathBuf>), CliError> {
    let spec = &a.spec;
    spec.resolve_sort()?;
    if spec.top_n == Some(0) {
        return Err(CliError::Config("--top must be at least 1".into()));
    }
    let doc = if a.input.is_file() && is_structured_report(&a.input) {
        let text = fs::read_to_string(&a.input).map_err(|e| write_err(&a.input, e))?;
        let stored = import_structured(&text)?;
        if stored.body.kind() != spec.kind {
            return Err(CliError::Config(format!(
                "{} holds a {}, not a {}",
                a.input.display(),
                stored.body.kind(),
                spec.kind
            )));
        }
        rebuild(&stored.body, spec)?
    } else {
        let input = ProfileInput::load(&a.input)?;
        match spec.kind {
            ReportKind::FunctionTable | ReportKind::ThreadTable => {
                build_document(ReportInput::Profile(&input.profile()?), spec)?
            }
            ReportKind::LineTable => {
                let scope = a
                    .scope
                    .as_deref()
                    .ok_or_else(|| CliError::Config("a line table needs --scope <function>".into()))?;
                let dump = input
                    .dumps()
                    .iter()
                    .find(|d| d.trace.find_symbol(scope).is_some())
                    .ok_or_else(|| CliError::Runtime(format!("no dump records function `{scope}`")))?;
                let regions = aggregate_regions(&dump.trace, scope, dump.header.clock)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                build_document(ReportInput::Regions(&regions), spec)?
            }
            ReportKind::CoarseTable => {
                let rows: Vec<CoarseRow> = input
                    .dumps()
                    .iter()
                    .filter_map(|d| {
                        d.header.coarse.map(|breakdown| CoarseRow {
                            name: d.header.entity.clone(),
                            breakdown,
                        })
                    })
                    .collect();
                build_document(ReportInput::Coarse(&rows), spec)?
            }
            ReportKind::HotspotReport => {
                let findings = match &input {
                    ProfileInput::Analysis(doc) => doc.findings.clone(),
                    _ => {
                        let p = input.profile()?;
                        let rules = rules_or_default(a.rules.as_deref())?;
                        find_hotspots(&p, &classify(&p, &rules), a.threshold_pct)
                    }
                };
                build_document(ReportInput::Findings(&findings), spec)?
            }
            ReportKind::CompareReport => {
                return Err(CliError::Config(
                    "a compare report is rendered from the output of `compare`".into(),
                ))
            }
        }
    };
    let text = match spec.format {
        ReportFormat::Text => render_text(&doc),
        ReportFormat::Csv => render_csv(&doc)?,
        ReportFormat::Structured => render_structured(&doc),
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| artifact_dir(&a.input).join(format!("report-{}.{}", spec.kind, extension(spec.format))));
    let path = emit(&out, &text)?;
    Ok((text, path))
}

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub before: PathBuf,
    pub after: PathBuf,
    pub rules: Option<PathBuf>,
    pub epsilon_s: f64,
    pub spec: ReportSpec,
    pub out: Option<PathBuf>,
}

pub fn cmd_compare(a: &CompareArgs) -> Result<(String, Option<PathBuf>), CliError> {
    a.spec.resolve_sort()?;
    let rules = rules_or_default(a.rules.as_deref())?;
    let before: Profile = ProfileInput::load(&a.before)?.profile()?;
    let after: Profile = ProfileInput::load(&a.after)?.profile()?;
    let opts = CompareOptions {
        regression_epsilon_s: a.epsilon_s,
    };
    let delta = compare(&before, &after, &rules, &opts)?;
    let doc = build_document(ReportInput::Compare(&delta), &a.spec)?;
    let text = match a.spec.format {
        ReportFormat::Text => render_text(&doc),
        ReportFormat::Csv => render_csv(&doc)?,
        ReportFormat::Structured => render_structured(&doc),
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| artifact_dir(&a.after).join(format!("compare.{}", extension(a.spec.format))));
    let path = emit(&out, &text)?;
    Ok((text, path))
}

/// Measured profiler cost and the shortest function it keeps within
/// budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub format: String,
    pub version: u32,
    pub calibration: ClockCalibration,
    pub budget_pct: f64,
    /// Functions at least this long inflate by no more than `budget_pct`.
    pub min_function_ns: f64,
}

impl CalibrationRecord {
    pub fn new(calibration: ClockCalibration) -> Self {
        Self {
            format: CALIBRATION_FORMAT.into(),
            version: FORMAT_VERSION,
            min_function_ns: calibration.pair_cost_ns * 100.0 / OVERHEAD_BUDGET_PCT,
            budget_pct: OVERHEAD_BUDGET_PCT,
            calibration,
        }
    }
}

pub fn cmd_calibrate(out: &Path) -> Result<CalibrationRecord, CliError> {
    let rec = CalibrationRecord::new(calibrate());
    write_json(out, &rec)?;
    Ok(rec)
}
