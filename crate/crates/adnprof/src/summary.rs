//! Run manifests, the human summary of a run and the dump index.

use std::fmt::Write as _;
use std::path::Path;

use adnprof_core::control::{BootstrapPhase, BootstrapTimeline, LivenessReport, LoadReport, NodeRole, ScenarioConfig};
use adnprof_core::report::{fmt_g, CoarseRow};
use serde::{Deserialize, Serialize};

use crate::dump::{dump_paths, write_json, Dump, FormatError, FORMAT_VERSION};
use crate::testbed::{LoopStats, WorkflowChangeRecord};

pub const RUN_FORMAT: &str = "adnprof-run";
pub const INDEX_FORMAT: &str = "adnprof-index";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: BootstrapPhase,
    pub at_s: f64,
    pub slept_s: f64,
}

pub fn phase_records(t: &BootstrapTimeline) -> Vec<PhaseRecord> {
    t.stamps()
        .iter()
        .map(|s| PhaseRecord {
            phase: s.phase,
            at_s: s.at.as_secs_f64(),
            slept_s: s.slept.as_secs_f64(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub role: NodeRole,
    pub pid: u32,
    /// Dump file relative to the run directory; `None` if none was written.
    pub dump: Option<String>,
}

/// Everything `run` knows about a finished run, written as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub run_id: String,
    pub scenario: ScenarioConfig,
    pub levels: Vec<String>,
    pub mode: String,
    pub timeline: Vec<PhaseRecord>,
    pub entities: Vec<EntityRecord>,
    pub liveness: LivenessReport,
    pub workflow_changes: Vec<WorkflowChangeRecord>,
    /// Client load summed over client hosts.
    pub load: Option<LoadReport>,
    /// The manager's monitor loop.
    pub monitor: LoopStats,
    pub coarse: Vec<CoarseRow>,
    pub forced_shutdown: Vec<String>,
}

impl RunManifest {
    pub fn new(run_id: &str, scenario: ScenarioConfig) -> Self {
        Self {
            format: RUN_FORMAT.into(),
            version: FORMAT_VERSION,
            run_id: run_id.into(),
            scenario,
            levels: Vec::new(),
            mode: "process".into(),
            timeline: Vec::new(),
            entities: Vec::new(),
            liveness: LivenessReport::default(),
            workflow_changes: Vec::new(),
            load: None,
            monitor: LoopStats::default(),
            coarse: Vec::new(),
            forced_shutdown: Vec::new(),
        }
    }
}

pub fn render_summary(m: &RunManifest) -> String {
    let mut out = String::new();
    let c = &m.scenario;
    let _ = writeln!(
        out,
        "run {} scenario {} (scale {})",
        m.run_id,
        c.scenario_id,
        fmt_g(c.scale_factor())
    );
    let levels = if m.levels.is_empty() {
        "none".to_string()
    } else {
        m.levels.join(",")
    };
    let _ = writeln!(out, "levels {levels}, {} mode, {} entities", m.mode, m.entities.len());
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<22} {:>10} {:>10}", "phase", "at_s", "slept_s");
    for p in &m.timeline {
        let _ = writeln!(out, "{:<22} {:>10.3} {:>10.3}", p.phase.as_str(), p.at_s, p.slept_s);
    }
    let _ = writeln!(out);
    let mon = &m.monitor;
    let _ = writeln!(
        out,
        "monitor: {} polls, {} messages, {:.3}s of {:.3}s in poll ({:.2}%)",
        mon.poll_invocations,
        mon.messages_handled,
        mon.wall_time_in_poll_s(),
        mon.wall_time_ns as f64 / 1e9,
        mon.poll_share_pct()
    );
    let l = &m.liveness;
    let _ = writeln!(
        out,
        "liveness: {} heartbeats, {} failures, {} unreachable (bound {:.3}s)",
        l.heartbeats,
        l.failures.len(),
        l.unreachable.len(),
        l.bound_s()
    );
    for f in &l.failures {
        let latency = f
            .detection_latency_s()
            .map_or_else(|| "-".to_string(), |s| format!("{s:.3}s"));
        let _ = writeln!(
            out,
            "  failed {} ({}) at {:.3}s, latency {latency}",
            f.node, f.role, f.detected_at_s
        );
    }
    for u in &l.unreachable {
        let _ = writeln!(
            out,
            "  unreachable {} via {} at {:.3}s",
            u.host, u.controller, u.detected_at_s
        );
    }
    if let Some(load) = &m.load {
        let _ = writeln!(
            out,
            "load: {} sent, {} answered, {} errors, p50 {:.3}ms p99 {:.3}ms",
            load.sent, load.answered, load.errors, load.latency.p50_ms, load.latency.p99_ms
        );
    }
    if !m.workflow_changes.is_empty() {
        let up = m.workflow_changes.iter().filter(|w| w.commission).count();
        let _ = writeln!(
            out,
            "workflows: {up} commissioned, {} decommissioned",
            m.workflow_changes.len() - up
        );
    }
    if !m.forced_shutdown.is_empty() {
        let _ = writeln!(out, "forced shutdown: {}", m.forced_shutdown.join(", "));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: String,
    pub entity: String,
    pub role: Option<NodeRole>,
    pub events: usize,
    pub sites: usize,
    pub violations: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpIndex {
    pub format: String,
    pub version: u32,
    pub dumps: Vec<IndexEntry>,
}

/// Lists every dump under `dir` and writes `dir/index.json`.
pub fn write_dump_index(dir: &Path) -> Result<DumpIndex, FormatError> {
    let mut dumps = Vec::new();
    for path in dump_paths(dir)? {
        let d = Dump::read_from(&path)?;
        let file = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        dumps.push(IndexEntry {
            file,
            entity: d.header.entity.clone(),
            role: d.header.role,
            events: d.trace.events.len(),
            sites: d.trace.sites.len(),
            violations: d.trace.violations.len(),
            threads: d.header.threads.len(),
        });
    }
    dumps.sort_by(|a, b| a.file.cmp(&b.file));
    let index = DumpIndex {
        format: INDEX_FORMAT.into(),
        version: FORMAT_VERSION,
        dumps,
    };
    write_json(&dir.join("index.json"), &index)?;
    Ok(index)
}
