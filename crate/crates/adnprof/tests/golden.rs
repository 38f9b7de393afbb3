//! Byte-for-byte goldens of every rendered format. Regenerate with
//! `ADNPROF_BLESS=1 cargo test -p adnprof --test golden` and review the diff.

mod support;

use adnprof::core::analysis::{classify, compare, find_hotspots, CategoryRules, CompareOptions};
use adnprof::core::control::{BootstrapPhase, FailureRecord, NodeRole, ScenarioConfig};
use adnprof::core::report::{
    render_function_table, render_line_table, render_thread_table, CoarseRow, ReportFormat, ReportKind, ReportSpec,
    SortKey,
};
use adnprof::core::{secs_to_ns, Clock, CoarseBreakdown, CodeSite, ProfileEvent, TimeCategory, Trace};
use adnprof::dump::{Dump, DumpHeader};
use adnprof::export::{render, ReportInput};
use adnprof::summary::{render_summary, write_dump_index, EntityRecord, PhaseRecord, RunManifest};
use adnprof::testbed::LoopStats;
use support::{check_golden, fig11_regions, fig13_threads, fig6_profile};

fn golden(name: &str, actual: &str) {
    if let Err(e) = check_golden(name, actual) {
        panic!("{e}");
    }
}

#[test]
fn function_table_header_has_the_pstats_columns() {
    let text = render_function_table(&fig6_profile(), SortKey::Cumulative, None);
    let header = text.lines().find(|l| l.contains("ncalls")).unwrap();
    assert_eq!(
        header,
        "   ncalls  tottime  percall  cumtime  percall filename:lineno(function)"
    );
    assert!(text.contains("541337 function calls (541319 primitive calls) in 77.621 seconds"));
}

#[test]
fn fig6_ordering_puts_poll_above_sleep() {
    let text = render_function_table(&fig6_profile(), SortKey::Cumulative, None);
    let pos = |needle: &str| text.find(needle).unwrap();
    assert!(pos("{poll}") < pos("{sleep}"));
    assert!(pos("(start_sim)") < pos("{poll}"));
    golden("function_table_fig6.txt", &text);
}

#[test]
fn function_table_top_n_reports_the_reduction() {
    golden(
        "function_table_top5.txt",
        &render_function_table(&fig6_profile(), SortKey::Tottime, Some(5)),
    );
}

#[test]
fn line_table_matches_golden() {
    let text = render_line_table(&fig11_regions(), SortKey::Line, None);
    assert!(text.contains("Line #      Hits         Time  Per Hit   % Time  Line Contents"));
    assert!(text.contains("98.4  {sleep}"), "{text}");
    golden("line_table_fig11.txt", &text);
}

#[test]
fn thread_table_matches_golden() {
    let text = render_thread_table(&fig13_threads(), Clock::Cpu, SortKey::TotalTime, None);
    assert!(text.starts_with("Clock type: CPU\nOrdered by: totaltime, desc\n"));
    assert!(
        text.contains("name                                  ncall  tsub      ttot      tavg"),
        "{text}"
    );
    golden("thread_table_fig13.txt", &text);
}

#[test]
fn csv_and_structured_exports_match_goldens() {
    let p = fig6_profile();
    let spec = ReportSpec::new(ReportKind::FunctionTable).top(5);
    golden(
        "function_table_fig6.csv",
        &render(ReportInput::Profile(&p), &spec.clone().format(ReportFormat::Csv)).unwrap(),
    );
    let mut small = p.clone();
    small.functions.truncate(3);
    golden(
        "function_table_small.json",
        &render(ReportInput::Profile(&small), &spec.format(ReportFormat::Structured)).unwrap(),
    );
}

#[test]
fn analysis_reports_match_goldens() {
    let p = fig6_profile();
    let rules = CategoryRules::testbed_defaults();
    let b = classify(&p, &rules);
    let findings = find_hotspots(&p, &b, 10.0);
    golden(
        "hotspot_report_fig6.txt",
        &render(
            ReportInput::Findings(&findings),
            &ReportSpec::new(ReportKind::HotspotReport),
        )
        .unwrap(),
    );

    let mut after = p.clone();
    for f in &mut after.functions {
        if f.site.symbol == "sleep" {
            f.tottime_ns = secs_to_ns(1.5);
            f.cumtime_ns = secs_to_ns(1.5);
        }
    }
    let d = compare(&p, &after, &rules, &CompareOptions::default()).unwrap();
    golden(
        "compare_report_fig6.txt",
        &render(
            ReportInput::Compare(&d),
            &ReportSpec::new(ReportKind::CompareReport).top(3),
        )
        .unwrap(),
    );

    let rows = vec![
        CoarseRow {
            name: "average of three runs".into(),
            breakdown: CoarseBreakdown::new(44.15, 0.64, 1.05),
        },
        CoarseRow {
            name: "gc".into(),
            breakdown: CoarseBreakdown::new(16.38, 0.129, 0.173),
        },
    ];
    golden(
        "coarse_table.txt",
        &render(ReportInput::Coarse(&rows), &ReportSpec::new(ReportKind::CoarseTable)).unwrap(),
    );
}

fn manifest() -> RunManifest {
    let mut m = RunManifest::new("reference-s1", ScenarioConfig::default());
    m.levels = vec!["coarse".into(), "function".into()];
    let phases = [
        (BootstrapPhase::ManagerUp, 0.0, 0.0),
        (BootstrapPhase::GlobalControllerUp, 5.002, 5.0),
        (BootstrapPhase::NameServerUp, 10.004, 5.0),
        (BootstrapPhase::Running, 15.011, 0.0),
    ];
    m.timeline = phases
        .iter()
        .map(|&(phase, at_s, slept_s)| PhaseRecord { phase, at_s, slept_s })
        .collect();
    m.entities = vec![EntityRecord {
        id: "gc".into(),
        role: NodeRole::GlobalController,
        pid: 42,
        dump: Some("dumps/gc.jsonl".into()),
    }];
    m.monitor = LoopStats {
        poll_invocations: 910,
        messages_handled: 36,
        wall_time_in_poll_ns: 996_100_000,
        wall_time_ns: 1_000_000_000,
    };
    m.liveness.interval_s = 1.0;
    m.liveness.miss_limit = 3;
    m.liveness.heartbeats = 56;
    m.liveness.failures.push(FailureRecord {
        node: "host-z0-s0-1".into(),
        role: NodeRole::HostNode,
        last_seen_s: 20.0,
        detected_at_s: 23.5,
        killed_at_s: Some(20.25),
    });
    m
}

#[test]
fn run_summary_matches_golden() {
    golden("summary.txt", &render_summary(&manifest()));
}

fn tiny_dump(entity: &str) -> Dump {
    let mut t = Trace::new();
    let f = t.intern(CodeSite::function("gm.rs", 12, "monitor"));
    let p = t.intern(CodeSite::builtin("poll"));
    t.push(ProfileEvent::enter(1, f, 100, 10));
    t.push(ProfileEvent::enter(1, p, 150, 12).with_tag(TimeCategory::IoWaitPoll));
    t.push(ProfileEvent::exit(1, p, 1150, 13).with_tag(TimeCategory::IoWaitPoll));
    t.push(ProfileEvent::exit(1, f, 1200, 20));
    let mut header = DumpHeader::new("golden", entity);
    header.scenario_id = "idle".into();
    Dump { header, trace: t }
}

#[test]
fn dump_and_index_match_goldens() {
    let mut bytes = Vec::new();
    tiny_dump("gm").write(&mut bytes).unwrap();
    golden("dump_gm.jsonl", &String::from_utf8(bytes).unwrap());

    let dir = tempfile::tempdir().unwrap();
    for e in ["ns", "gm"] {
        tiny_dump(e)
            .write_to(&dir.path().join(format!("dumps/{e}.jsonl")))
            .unwrap();
    }
    write_dump_index(dir.path()).unwrap();
    golden(
        "index.json",
        &std::fs::read_to_string(dir.path().join("index.json")).unwrap(),
    );
}
