//! On-disk formats: per-entity event dumps, merged profiles and analysis
//! documents.
//!
//! A dump is JSON Lines. The first line is the header:
//!
//! ```text
//! {"format":"adnprof-dump","version":1,"run_id":..,"entity":..,"role":..,
//!  "scenario_id":..,"scale_factor":..,"clock":"wall","levels":[..],
//!  "calibration":{..},"coarse":{..},"threads":[..],"sampling":[..],
//!  "loop_stats":{..},"load":{..},"messages":{..},
//!  "sites":[..],"violations":[..],"events":N}
//! ```
//!
//! followed by exactly `events` lines, one per event:
//!
//! ```text
//! {"tid":1,"kind":"enter","site":0,"wall_ns":1200,"cpu_ns":800,"tag":"Sleep"}
//! ```
//!
//! `site` indexes the header's `sites` array. Field order is fixed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use adnprof_core::analysis::{CategoryBreakdown, CategoryRules, HotspotFinding};
use adnprof_core::control::{LoadReport, NodeRole};
use adnprof_core::profile::{merge_profiles, ProfileError};
use adnprof_core::{Clock, CoarseBreakdown, CodeSite, NestingViolation, Profile, ProfileEvent, ProfileMeta, Trace};
use serde::{Deserialize, Serialize};

use crate::instrument::{ClockCalibration, SampleStream};
use crate::testbed::LoopStats;

pub const DUMP_FORMAT: &str = "adnprof-dump";
pub const MERGED_FORMAT: &str = "adnprof-merged";
pub const ANALYSIS_FORMAT: &str = "adnprof-analysis";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: expected {expected}, found format `{found}` version {version}")]
    Unsupported {
        path: PathBuf,
        expected: &'static str,
        found: String,
        version: u32,
    },
    #[error("{path}: header announces {announced} events, file holds {found}")]
    Truncated { path: PathBuf, announced: u64, found: u64 },
    #[error("{0}: no dumps found")]
    NoDumps(PathBuf),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadInfo {
    pub tid: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingInfo {
    pub tid: u64,
    pub interval_ms: f64,
    pub ticks: u64,
    pub idle: u64,
    pub truncated: bool,
}

impl From<&SampleStream> for SamplingInfo {
    fn from(s: &SampleStream) -> Self {
        Self {
            tid: s.thread_id,
            interval_ms: s.interval.as_secs_f64() * 1e3,
            ticks: s.ticks,
            idle: s.idle,
            truncated: s.truncated,
        }
    }
}

/// Everything in a dump header except the site table, violations and
/// event count, which come from the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub run_id: String,
    pub entity: String,
    #[serde(default)]
    pub role: Option<NodeRole>,
    pub scenario_id: String,
    pub scale_factor: f64,
    #[serde(default)]
    pub clock: Clock,
    pub levels: Vec<String>,
    pub calibration: ClockCalibration,
    #[serde(default)]
    pub coarse: Option<CoarseBreakdown>,
    #[serde(default)]
    pub threads: Vec<ThreadInfo>,
    #[serde(default)]
    pub sampling: Vec<SamplingInfo>,
    #[serde(default)]
    pub loop_stats: Option<LoopStats>,
    #[serde(default)]
    pub load: Option<LoadReport>,
    /// Messages handled, by type.
    #[serde(default)]
    pub messages: BTreeMap<String, u64>,
}

impl DumpHeader {
    pub fn new(run_id: &str, entity: &str) -> Self {
        Self {
            run_id: run_id.into(),
            entity: entity.into(),
            role: None,
            scenario_id: String::new(),
            scale_factor: 1.0,
            clock: Clock::Wall,
            levels: Vec::new(),
            calibration: ClockCalibration::default(),
            coarse: None,
            threads: Vec::new(),
            sampling: Vec::new(),
            loop_stats: None,
            load: None,
            messages: BTreeMap::new(),
        }
    }

    pub fn meta(&self) -> ProfileMeta {
        ProfileMeta {
            run_id: self.run_id.clone(),
            scenario_id: self.scenario_id.clone(),
            scale_factor: self.scale_factor,
            clock: self.clock,
        }
    }
}

#[derive(Serialize)]
struct HeaderOut<'a> {
    format: &'static str,
    version: u32,
    #[serde(flatten)]
    header: &'a DumpHeader,
    sites: &'a [CodeSite],
    violations: &'a [NestingViolation],
    events: u64,
}

#[derive(Deserialize)]
struct HeaderIn {
    format: String,
    version: u32,
    #[serde(flatten)]
    header: DumpHeader,
    sites: Vec<CodeSite>,
    #[serde(default)]
    violations: Vec<NestingViolation>,
    events: u64,
}

#[derive(Deserialize)]
struct FormatProbe {
    #[serde(default)]
    format: String,
    #[serde(default)]
    version: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub header: DumpHeader,
    pub trace: Trace,
}

impl Dump {
    pub fn profile(&self) -> Result<Profile, ProfileError> {
        Profile::from_trace(self.header.meta(), &self.header.entity, &self.trace)
    }

    pub fn write_to(&self, path: &Path) -> Result<(), FormatError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        let head = HeaderOut {
            format: DUMP_FORMAT,
            version: FORMAT_VERSION,
            header: &self.header,
            sites: &self.trace.sites,
            violations: &self.trace.violations,
            events: self.trace.events.len() as u64,
        };
        serde_json::to_writer(&mut *w, &head)?;
        w.write_all(b"\n")?;
        for e in &self.trace.events {
            serde_json::to_writer(&mut *w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Dump, FormatError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut lines = BufReader::new(file).lines();
        let json_err = |line: usize| {
            move |source| FormatError::Json {
                path: path.to_path_buf(),
                line,
                source,
            }
        };
        let first = lines.next().transpose().map_err(io_err(path))?.unwrap_or_default();
        let probe: FormatProbe = serde_json::from_str(&first).map_err(json_err(1))?;
        if probe.format != DUMP_FORMAT || probe.version != FORMAT_VERSION {
            return Err(FormatError::Unsupported {
                path: path.into(),
                expected: DUMP_FORMAT,
                found: probe.format,
                version: probe.version,
            });
        }
        let head: HeaderIn = serde_json::from_str(&first).map_err(json_err(1))?;
        debug_assert_eq!((head.format.as_str(), head.version), (DUMP_FORMAT, FORMAT_VERSION));
        let mut trace = Trace::new();
        trace.sites = head.sites;
        trace.violations = head.violations;
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ProfileEvent = serde_json::from_str(&line).map_err(json_err(i + 2))?;
            trace.events.push(e);
        }
        if trace.events.len() as u64 != head.events {
            return Err(FormatError::Truncated {
                path: path.into(),
                announced: head.events,
                found: trace.events.len() as u64,
            });
        }
        Ok(Dump {
            header: head.header,
            trace,
        })
    }
}

/// Dump files of a run directory (`<dir>/dumps/*.jsonl`, or `<dir>/*.jsonl`),
/// ordered by file name.
pub fn dump_paths(dir: &Path) -> Result<Vec<PathBuf>, FormatError> {
    let sub = dir.join("dumps");
    let root = if sub.is_dir() { sub } else { dir.to_path_buf() };
    let mut out: Vec<PathBuf> = fs::read_dir(&root)
        .map_err(io_err(&root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(FormatError::NoDumps(dir.into()));
    }
    Ok(out)
}

pub fn read_dumps(dir: &Path) -> Result<Vec<Dump>, FormatError> {
    dump_paths(dir)?.iter().map(|p| Dump::read_from(p)).collect()
}

/// One profile per dump, merged.
pub fn merge_dumps(dumps: &[Dump]) -> Result<Profile, FormatError> {
    let parts = dumps.iter().map(Dump::profile).collect::<Result<Vec<_>, _>>()?;
    Ok(merge_profiles(&parts)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedDoc {
    pub format: String,
    pub version: u32,
    pub profile: Profile,
}

impl MergedDoc {
    pub fn new(profile: Profile) -> Self {
        Self {
            format: MERGED_FORMAT.into(),
            version: FORMAT_VERSION,
            profile,
        }
    }
}

/// Output of `adnprof analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDoc {
    pub format: String,
    pub version: u32,
    pub threshold_pct: f64,
    pub rules: CategoryRules,
    pub breakdown: CategoryBreakdown,
    pub findings: Vec<HotspotFinding>,
    pub profile: Profile,
}

impl AnalysisDoc {
    pub fn new(
        profile: Profile,
        rules: CategoryRules,
        breakdown: CategoryBreakdown,
        findings: Vec<HotspotFinding>,
        threshold_pct: f64,
    ) -> Self {
        Self {
            format: ANALYSIS_FORMAT.into(),
            version: FORMAT_VERSION,
            threshold_pct,
            rules,
            breakdown,
            findings,
            profile,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FormatError::Json {
        path: path.into(),
        line: 0,
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.into(),
        line: source.line(),
        source,
    })
}

/// What a profile argument on the command line resolved to.
pub enum ProfileInput {
    /// A run directory or a single dump; the raw traces stay available.
    Dumps(Vec<Dump>),
    Merged(Profile),
    Analysis(Box<AnalysisDoc>),
}

impl ProfileInput {
    pub fn load(path: &Path) -> Result<ProfileInput, FormatError> {
        if path.is_dir() {
            return Ok(ProfileInput::Dumps(read_dumps(path)?));
        }
        let file = File::open(path).map_err(io_err(path))?;
        let mut first = String::new();
        BufReader::new(file).read_line(&mut first).map_err(io_err(path))?;
        // a pretty-printed document starts with a lone brace
        let probe: FormatProbe = if first.trim() == "{" {
            read_json(path)?
        } else {
            serde_json::from_str(&first).map_err(|source| FormatError::Json {
                path: path.into(),
                line: 1,
                source,
            })?
        };
        match probe.format.as_str() {
            DUMP_FORMAT => Ok(ProfileInput::Dumps(vec![Dump::read_from(path)?])),
            MERGED_FORMAT => Ok(ProfileInput::Merged(read_json::<MergedDoc>(path)?.profile)),
            ANALYSIS_FORMAT => Ok(ProfileInput::Analysis(Box::new(read_json(path)?))),
            _ => Err(FormatError::Unsupported {
                path: path.into(),
                expected: "a dump, merged profile or analysis document",
                found: probe.format,
                version: probe.version,
            }),
        }
    }

    pub fn profile(&self) -> Result<Profile, FormatError> {
        match self {
            ProfileInput::Dumps(d) => merge_dumps(d),
            ProfileInput::Merged(p) => Ok(p.clone()),
            ProfileInput::Analysis(a) => Ok(a.profile.clone()),
        }
    }

    pub fn dumps(&self) -> &[Dump] {
        match self {
            ProfileInput::Dumps(d) => d,
            _ => &[],
        }
    }
}
