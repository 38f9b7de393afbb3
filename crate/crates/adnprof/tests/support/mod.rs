//! Fixtures shared by the golden, CLI and acceptance tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use adnprof::core::profile::SourceSummary;
use adnprof::core::{
    secs_to_ns, Clock, CodeSite, FunctionStats, Profile, ProfileMeta, RegionReport, RegionStats, ThreadStats,
    TimeCategory,
};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `actual` with a stored golden; `ADNPROF_BLESS=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("ADNPROF_BLESS").is_some() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if want == actual {
        Ok(())
    } else {
        Err(format!(
            "{name} differs from golden:\n--- want\n{want}--- got\n{actual}"
        ))
    }
}

fn row(site: CodeSite, calls: (u64, u64), tot: f64, cum: f64, tag: Option<TimeCategory>) -> FunctionStats {
    FunctionStats {
        ncalls_total: calls.0,
        ncalls_primitive: calls.1,
        tottime_ns: secs_to_ns(tot),
        cumtime_ns: secs_to_ns(cum),
        tag,
        ..FunctionStats::new(site)
    }
}

/// The deterministic profile of one start-up run: 541337 calls (541319
/// primitive) in 77.621 s, dominated by poll and three sleeps. Rows are in
/// insertion order, not sorted.
pub fn fig6_profile() -> Profile {
    let f = |file: &str, line, sym: &str| CodeSite::function(file, line, sym);
    let one = (1, 1);
    let functions = vec![
        row(
            CodeSite::builtin("sleep"),
            (3, 3),
            15.010,
            15.010,
            Some(TimeCategory::Sleep),
        ),
        row(f("driver.rs", 2, "main"), one, 0.001, 77.621, None),
        row(f("driver.rs", 186, "start_hosts"), one, 0.001, 5.183, None),
        row(
            CodeSite::builtin("poll"),
            (111580, 111580),
            59.322,
            59.322,
            Some(TimeCategory::IoWaitPoll),
        ),
        row(f("driver.rs", 209, "start_sim"), one, 0.849, 77.613, None),
        row(f("driver.rs", 163, "start_name_server"), one, 0.0, 5.010, None),
        row(f("driver.rs", 134, "start_global_controller"), one, 0.0, 5.009, None),
        row(f("driver.rs", 264, "write_log"), (3106, 3106), 0.013, 1.065, None),
        row(f("util.rs", 25, "quiet_run"), (104, 104), 0.160, 1.052, None),
        row(f("driver.rs", 42, "new"), one, 0.0, 0.980, None),
        row(f("driver.rs", 67, "allocate_topology"), one, 0.001, 0.943, None),
        row(f("util.rs", 91, "retry"), (379942, 379924), 0.916, 0.916, None),
        row(f("node.rs", 300, "link_to"), (19, 19), 0.001, 0.893, None),
        row(f("util.rs", 79, "make_intf_pair"), (19, 19), 0.001, 0.698, None),
        row(CodeSite::builtin("write"), (3106, 3106), 0.671, 0.671, None),
        row(CodeSite::builtin("flush"), (3106, 3106), 0.381, 0.381, None),
        row(f("node.rs", 235, "cmd"), (195, 195), 0.003, 0.294, None),
        row(CodeSite::builtin("time"), (40024, 40024), 0.287, 0.287, None),
        row(f("process.rs", 619, "spawn"), (125, 125), 0.004, 0.273, None),
        row(f("driver.rs", 128, "start_topo"), one, 0.0, 0.266, None),
    ];
    Profile {
        meta: ProfileMeta {
            run_id: "crun1000".into(),
            scenario_id: "reference".into(),
            scale_factor: 1.0,
            clock: Clock::Wall,
        },
        sources: vec![SourceSummary {
            source: "gm".into(),
            events: 2 * 541337,
            bracketed_ns: secs_to_ns(77.621),
            violations: 0,
        }],
        functions,
        threads: Vec::new(),
    }
}

/// Statement table of the controller start function: one 5 s sleep
/// dominating a handful of quick commands.
pub fn fig11_regions() -> RegionReport {
    let r = |line, sym: &str, us: u64| RegionStats {
        site: CodeSite::region("driver.rs", line, sym),
        hits: 1,
        time_ns: us * 1000,
        pct_time: 0.0,
    };
    let mut regions = vec![
        r(151, "announce", 16),
        r(152, "export_host_name", 258),
        r(153, "export_name_server_addr", 182),
        r(154, "export_update_port", 179),
        r(155, "launch_controller", 6597),
        r(156, "announce_started", 579),
        RegionStats {
            site: CodeSite::builtin("sleep"),
            hits: 1,
            time_ns: 5_002_929_000,
            pct_time: 0.0,
        },
        r(160, "print_func_stats", 74569),
        r(161, "print_thread_stats", 557),
    ];
    let total_ns = 5_085_870_000;
    for x in &mut regions {
        x.pct_time = adnprof::core::analysis::round_half_up(x.time_ns as f64 * 100.0 / total_ns as f64, 1);
    }
    RegionReport {
        function: CodeSite::function("driver.rs", 149, "start_global_controller"),
        calls: 1,
        total_ns,
        regions,
    }
}

/// Concurrency rows of the topology build, CPU clock.
pub fn fig13_threads() -> Vec<ThreadStats> {
    let t = |file: &str, line, sym: &str, calls: (u64, u64), tsub: f64, ttot: f64| ThreadStats {
        thread_id: 1,
        source: "gm".into(),
        site: CodeSite::function(file, line, sym),
        ncall: calls.0,
        ncall_primitive: calls.1,
        tsub_ns: secs_to_ns(tsub),
        ttot_ns: secs_to_ns(ttot),
    };
    vec![
        t("net.rs", 303, "Mininet.build", (1, 1), 0.000024, 0.228708),
        t(
            "/opt/testbed/lib/util.rs",
            25,
            "quiet_run",
            (179, 179),
            0.372231,
            0.983090,
        ),
        t(
            "/opt/testbed/lib/node.rs",
            300,
            "Host.link_to",
            (35, 35),
            0.001244,
            0.770000,
        ),
        t(
            "/opt/testbed/lib/util.rs",
            79,
            "make_intf_pair",
            (35, 35),
            0.001611,
            0.541088,
        ),
        t(
            "/opt/testbed/lib/process.rs",
            757,
            "Popen.poll",
            (65625, 65625),
            0.085931,
            0.333069,
        ),
        t(
            "/opt/testbed/lib/profiler.rs",
            95,
            "wrapper",
            (3, 2),
            0.000031,
            0.278079,
        ),
    ]
}

pub fn fig13_profile() -> Profile {
    let mut p = Profile::empty(ProfileMeta {
        run_id: "threads".into(),
        clock: Clock::Cpu,
        ..ProfileMeta::default()
    });
    p.threads = fig13_threads();
    p
}
