//! Executes a scenario end to end and writes the run directory:
//!
//! ```text
//! <out>/scenario.toml   the effective scenario
//! <out>/dumps/*.jsonl   one dump per entity, the manager's is gm.jsonl
//! <out>/index.json      dump index
//! <out>/run.json        run manifest
//! <out>/summary.txt     human summary
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use adnprof_core::control::{LoadReport, ScenarioConfig};
use adnprof_core::report::CoarseRow;

use crate::coarse::{read_process_times, ProcessRef};
use crate::dump::{read_dumps, write_json, Dump, DumpHeader, FormatError, SamplingInfo, ThreadInfo};
use crate::instrument::{self, build_trace, finish_thread, start_thread, Level, Levels, Sampler};
use crate::profile_scope;
use crate::scenario::scenario_to_toml;
use crate::summary::{phase_records, render_summary, write_dump_index, EntityRecord, RunManifest};
use crate::testbed::entity::SAMPLE_INTERVAL;
use crate::testbed::{bootstrap, LoopStats, RunOptions, ShutdownReport, SpawnMode, TestbedError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Testbed(#[from] TestbedError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct RunPlan {
    pub scenario: ScenarioConfig,
    pub out: PathBuf,
    pub levels: Levels,
    pub mode: SpawnMode,
}

/// Run ids depend only on the scenario, so re-runs land on the same names.
pub fn run_id(c: &ScenarioConfig) -> String {
    format!("{}-s{}", c.scenario_id, c.seed)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.into(),
        source,
    }
}

struct GmRun {
    manifest: RunManifest,
    monitor: LoopStats,
    messages: std::collections::BTreeMap<String, u64>,
    shutdown: ShutdownReport,
}

fn start_sim(plan: &RunPlan, id: &str, dump_dir: &Path) -> Result<GmRun, RunError> {
    let _g = profile_scope!("start_sim");
    let c = &plan.scenario;
    let opts = RunOptions {
        run_id: id.into(),
        dump_dir: Some(dump_dir.into()),
        levels: plan.levels,
        mode: plan.mode.clone(),
    };
    let mut topo = bootstrap(c, opts)?;
    let monitor = topo.monitor(Duration::from_secs_f64(c.run_duration_s.max(0.0)))?;
    let mut manifest = RunManifest::new(id, c.clone());
    manifest.timeline = phase_records(topo.timeline());
    manifest.liveness = topo.liveness_report().clone();
    manifest.workflow_changes = topo.workflow_changes().to_vec();
    manifest.entities = topo
        .members()
        .into_iter()
        .map(|m| EntityRecord {
            id: m.id,
            role: m.role,
            pid: m.pid,
            dump: None,
        })
        .collect();
    let messages = topo.messages().clone();
    let shutdown = topo.shutdown()?;
    Ok(GmRun {
        manifest,
        monitor,
        messages,
        shutdown,
    })
}

/// Runs the scenario with the manager on the calling thread.
pub fn cmd_run(plan: &RunPlan) -> Result<RunManifest, RunError> {
    let c = &plan.scenario;
    let id = run_id(c);
    let dump_dir = plan.out.join("dumps");
    fs::create_dir_all(&dump_dir).map_err(io_err(&dump_dir))?;
    // stale dumps from an earlier run would be merged into this one
    for old in crate::dump::dump_paths(&dump_dir).unwrap_or_default() {
        fs::remove_file(&old).map_err(io_err(&old))?;
    }
    let scenario_path = plan.out.join("scenario.toml");
    fs::write(&scenario_path, scenario_to_toml(c)).map_err(io_err(&scenario_path))?;

    start_thread("gm", plan.levels);
    let sampler = if plan.levels.contains(Level::Sample) {
        instrument::sample_target().and_then(|t| Sampler::start(t, SAMPLE_INTERVAL).ok())
    } else {
        None
    };
    let result = start_sim(plan, &id, &dump_dir);
    let stream = sampler.map(Sampler::stop);
    let capture = finish_thread();
    let run = result?;

    let process_mode = matches!(plan.mode, SpawnMode::Process(_));
    let gm_coarse = (process_mode && plan.levels.contains(Level::Coarse))
        .then(|| read_process_times(ProcessRef::Current).ok())
        .flatten();
    if let Some(capture) = capture {
        let streams: Vec<_> = stream.into_iter().collect();
        let mut header = DumpHeader::new(&id, "gm");
        header.role = Some(adnprof_core::control::NodeRole::GlobalManager);
        header.scenario_id = c.scenario_id.clone();
        header.scale_factor = c.scale_factor();
        header.levels = plan.levels.names().into_iter().map(String::from).collect();
        header.calibration = instrument::cached_calibration();
        header.coarse = gm_coarse;
        header.threads = vec![ThreadInfo {
            tid: capture.tid,
            name: capture.name.clone(),
        }];
        header.sampling = streams.iter().map(SamplingInfo::from).collect();
        header.loop_stats = Some(run.monitor);
        header.messages = run.messages.clone();
        let trace = build_trace(std::slice::from_ref(&capture), &streams);
        Dump { header, trace }.write_to(&dump_dir.join("gm.jsonl"))?;
    }

    let mut manifest = run.manifest;
    manifest.levels = plan.levels.names().into_iter().map(String::from).collect();
    manifest.mode = if process_mode { "process" } else { "thread" }.into();
    manifest.monitor = run.monitor;
    manifest.forced_shutdown = run.shutdown.forced;

    let dumps = read_dumps(&plan.out)?;
    let mut loads = Vec::new();
    for d in &dumps {
        let h = &d.header;
        if let Some(e) = manifest.entities.iter_mut().find(|e| e.id == h.entity) {
            e.dump = Some(format!("dumps/{}.jsonl", h.entity));
        }
        if let Some(b) = &h.coarse {
            manifest.coarse.push(CoarseRow {
                name: h.entity.clone(),
                breakdown: *b,
            });
        }
        if let Some(l) = &h.load {
            loads.push(l.clone());
        }
    }
    loads.sort_by(|a, b| a.client.cmp(&b.client));
    manifest.load = (!loads.is_empty()).then(|| LoadReport::combine(&loads));

    write_dump_index(&plan.out)?;
    write_json(&plan.out.join("run.json"), &manifest)?;
    let summary_path = plan.out.join("summary.txt");
    fs::write(&summary_path, render_summary(&manifest)).map_err(io_err(&summary_path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use adnprof_core::control::PostStartSleep;

    #[test]
    fn bootstrap_only_run_writes_every_dump() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = ScenarioConfig {
            sites_per_zone: 1,
            hosts_per_site: 1,
            client_hosts: 1,
            run_duration_s: 0.0,
            post_start_sleep: PostStartSleep::none(),
            ..ScenarioConfig::default()
        };
        let plan = RunPlan {
            scenario,
            out: dir.path().into(),
            levels: Levels::parse("function").unwrap(),
            mode: SpawnMode::Thread,
        };
        let m = cmd_run(&plan).unwrap();
        // oracle: gm, gc, ns, one lc, one wm, one host, one client
        let expected = ["client-0", "gc", "gm", "host-z0-s0-0", "lc-z0-s0", "ns", "wm-z0-w0"];
        let idx: crate::summary::DumpIndex = crate::dump::read_json(&dir.path().join("index.json")).unwrap();
        let mut names: Vec<&str> = idx.dumps.iter().map(|e| e.entity.as_str()).collect();
        names.sort();
        assert_eq!(names, expected);
        assert!(m.entities.iter().all(|e| e.dump.is_some()), "{:?}", m.entities);
        assert!(dir.path().join("summary.txt").exists());
        assert!(dir.path().join("scenario.toml").exists());
        assert_eq!(
            m.timeline.last().unwrap().phase,
            adnprof_core::control::BootstrapPhase::Running
        );
    }
}
