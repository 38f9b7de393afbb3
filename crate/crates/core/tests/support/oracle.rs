//! Random well-nested event streams and a brute-force interval oracle.
//!
//! The oracle never keeps frames: it walks consecutive event pairs and hands
//! each gap to the top of the stack (exclusive time) and to every distinct
//! site on the stack (inclusive time). Shared by the core property tests and
//! the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;

use adnprof_core::{CodeSite, EventKind, ProfileEvent, SiteId, Trace};
use rand::Rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleRow {
    pub ncalls_total: u64,
    pub ncalls_primitive: u64,
    pub tottime_ns: u64,
    pub cumtime_ns: u64,
}

/// Up to `max_events` events on one or two threads over a pool of four
/// sites, so recursion and shared sites are common. Gaps may be zero.
pub fn random_trace<R: Rng>(rng: &mut R, max_events: usize) -> Trace {
    let mut trace = Trace::new();
    let sites: Vec<SiteId> = (0..4)
        .map(|i| trace.intern(CodeSite::function("gen.rs", 10 * (i + 1), format!("f{i}"))))
        .collect();
    let threads = rng.random_range(1..=2u64);
    let mut per_thread: Vec<Vec<ProfileEvent>> = Vec::new();
    for tid in 1..=threads {
        let budget = rng.random_range(0..=max_events / threads as usize) / 2 * 2;
        let mut events = Vec::with_capacity(budget);
        let mut stack: Vec<SiteId> = Vec::new();
        let (mut wall, mut cpu) = (rng.random_range(0..1_000u64), 0u64);
        while events.len() < budget {
            let remaining = budget - events.len();
            let must_close = stack.len() >= remaining;
            let gap = if rng.random_bool(0.2) {
                0
            } else {
                rng.random_range(1..5_000u64)
            };
            wall += gap;
            cpu += rng.random_range(0..=gap);
            if !stack.is_empty() && (must_close || rng.random_bool(0.45)) {
                let s = stack.pop().unwrap();
                events.push(ProfileEvent::exit(tid, s, wall, cpu));
            } else {
                let s = sites[rng.random_range(0..sites.len())];
                stack.push(s);
                events.push(ProfileEvent::enter(tid, s, wall, cpu));
            }
        }
        per_thread.push(events);
    }
    // interleave threads while keeping each thread's order
    let mut cursors = vec![0usize; per_thread.len()];
    loop {
        let open: Vec<usize> = (0..per_thread.len())
            .filter(|&t| cursors[t] < per_thread[t].len())
            .collect();
        if open.is_empty() {
            break;
        }
        let t = open[rng.random_range(0..open.len())];
        trace.push(per_thread[t][cursors[t]].clone());
        cursors[t] += 1;
    }
    trace
}

/// Per-site totals over all threads, computed gap by gap on wall time.
pub fn oracle(trace: &Trace) -> BTreeMap<SiteId, OracleRow> {
    let mut rows: BTreeMap<SiteId, OracleRow> = BTreeMap::new();
    let mut by_thread: BTreeMap<u64, Vec<&ProfileEvent>> = BTreeMap::new();
    for e in trace.events.iter().filter(|e| e.kind != EventKind::Sample) {
        by_thread.entry(e.thread_id).or_default().push(e);
    }
    for events in by_thread.values() {
        let mut stack: Vec<SiteId> = Vec::new();
        for (i, e) in events.iter().enumerate() {
            match e.kind {
                EventKind::Enter => {
                    let row = rows.entry(e.site).or_default();
                    row.ncalls_total += 1;
                    if !stack.contains(&e.site) {
                        row.ncalls_primitive += 1;
                    }
                    stack.push(e.site);
                }
                EventKind::Exit => {
                    assert_eq!(stack.pop(), Some(e.site), "generator emits well-nested streams");
                }
                EventKind::Sample => unreachable!(),
            }
            let Some(next) = events.get(i + 1) else { continue };
            let gap = next.wall_ns - e.wall_ns;
            if let Some(top) = stack.last() {
                rows.entry(*top).or_default().tottime_ns += gap;
            }
            let mut seen: Vec<SiteId> = Vec::new();
            for s in &stack {
                if !seen.contains(s) {
                    seen.push(*s);
                    rows.entry(*s).or_default().cumtime_ns += gap;
                }
            }
        }
    }
    rows
}
