use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Clock, FunctionStats, ProfileError, ThreadStats};
use crate::category::TimeCategory;
use crate::event::{EventKind, NestingViolation, ProfileEvent, Trace, ViolationKind};
use crate::site::SiteId;

/// An open activation during replay.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub site: SiteId,
    pub start: u64,
    /// Inclusive time of already-closed direct children.
    pub child_ns: u64,
    /// No other activation of the same site was open when this one began.
    pub primitive: bool,
}

pub(crate) trait FrameVisitor {
    fn enter(&mut self, _tid: u64, _site: SiteId, _tag: Option<TimeCategory>, _primitive: bool) {}
    /// `below` is the stack under `frame` after it was popped.
    fn close(&mut self, tid: u64, frame: &Frame, elapsed: u64, below: &[Frame]);
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Span {
    pub bracketed_ns: u64,
    pub first_ns: Option<u64>,
    pub last_ns: Option<u64>,
    pub events: u64,
}

#[derive(Default)]
struct ThreadState {
    stack: Vec<Frame>,
    active: BTreeMap<SiteId, u32>,
    last_wall: u64,
    last_cpu: u64,
    span: Span,
}

fn stamp(e: &ProfileEvent, clock: Clock) -> u64 {
    match clock {
        Clock::Wall => e.wall_ns,
        Clock::Cpu => e.cpu_ns,
    }
}

fn close_top<V: FrameVisitor>(tid: u64, st: &mut ThreadState, end: u64, v: &mut V) {
    let Some(frame) = st.stack.pop() else { return };
    let elapsed = end.saturating_sub(frame.start);
    if let Some(n) = st.active.get_mut(&frame.site) {
        *n -= 1;
        if *n == 0 {
            st.active.remove(&frame.site);
        }
    }
    v.close(tid, &frame, elapsed, &st.stack);
    match st.stack.last_mut() {
        Some(parent) => parent.child_ns += elapsed,
        None => st.span.bracketed_ns += elapsed,
    }
}

/// Walks every thread's enter/exit stream, repairing bad nesting.
///
/// An exit whose site is open deeper in the stack closes the frames above it
/// at the exit's timestamp; an exit whose site is not open is dropped.
/// Frames still open at the end of a thread's stream close at its last
/// timestamp. Each repair is reported as a violation. Sample events are
/// ignored. Time going backwards or a dangling site id cannot be repaired.
pub(crate) fn walk<V: FrameVisitor>(
    trace: &Trace,
    clock: Clock,
    v: &mut V,
) -> Result<(BTreeMap<u64, Span>, Vec<NestingViolation>), ProfileError> {
    let mut threads: BTreeMap<u64, ThreadState> = BTreeMap::new();
    let mut violations = Vec::new();
    let nsites = trace.sites.len();

    for e in trace.events.iter().filter(|e| e.kind != EventKind::Sample) {
        let tid = e.thread_id;
        if e.site.index() >= nsites {
            return Err(ProfileError::MalformedStream {
                thread_id: tid,
                reason: format!("site id {} outside table of {}", e.site.0, nsites),
            });
        }
        let st = threads.entry(tid).or_default();
        if st.span.events > 0 && (e.wall_ns < st.last_wall || e.cpu_ns < st.last_cpu) {
            return Err(ProfileError::MalformedStream {
                thread_id: tid,
                reason: format!("clock went backwards at wall {} ns", e.wall_ns),
            });
        }
        st.last_wall = e.wall_ns;
        st.last_cpu = e.cpu_ns;
        st.span.events += 1;
        let t = stamp(e, clock);

        match e.kind {
            EventKind::Enter => {
                let depth = st.active.entry(e.site).or_insert(0);
                let primitive = *depth == 0;
                *depth += 1;
                v.enter(tid, e.site, e.tag, primitive);
                if st.stack.is_empty() && st.span.first_ns.is_none() {
                    st.span.first_ns = Some(t);
                }
                st.stack.push(Frame {
                    site: e.site,
                    start: t,
                    child_ns: 0,
                    primitive,
                });
            }
            EventKind::Exit => {
                let Some(pos) = st.stack.iter().rposition(|f| f.site == e.site) else {
                    violations.push(NestingViolation {
                        thread_id: tid,
                        site: e.site,
                        wall_ns: e.wall_ns,
                        kind: ViolationKind::UnmatchedExit,
                    });
                    continue;
                };
                while st.stack.len() > pos + 1 {
                    let site = st.stack[st.stack.len() - 1].site;
                    violations.push(NestingViolation {
                        thread_id: tid,
                        site,
                        wall_ns: e.wall_ns,
                        kind: ViolationKind::UnclosedEnter,
                    });
                    close_top(tid, st, t, v);
                }
                close_top(tid, st, t, v);
                if st.stack.is_empty() {
                    st.span.last_ns = Some(t);
                }
            }
            EventKind::Sample => unreachable!(),
        }
    }

    let mut spans = BTreeMap::new();
    for (tid, mut st) in threads {
        let end = match clock {
            Clock::Wall => st.last_wall,
            Clock::Cpu => st.last_cpu,
        };
        if !st.stack.is_empty() {
            st.span.last_ns = Some(end);
        }
        while let Some(top) = st.stack.last() {
            violations.push(NestingViolation {
                thread_id: tid,
                site: top.site,
                wall_ns: st.last_wall,
                kind: ViolationKind::UnclosedEnter,
            });
            close_top(tid, &mut st, end, v);
        }
        spans.insert(tid, st.span);
    }
    Ok((spans, violations))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct SiteAcc {
    pub ncalls_total: u64,
    pub ncalls_primitive: u64,
    pub tottime_ns: u64,
    pub cumtime_ns: u64,
    pub tag: Option<TimeCategory>,
}

#[derive(Default)]
struct StatsVisitor {
    per_thread: BTreeMap<u64, BTreeMap<SiteId, SiteAcc>>,
}

impl FrameVisitor for StatsVisitor {
    fn enter(&mut self, tid: u64, site: SiteId, tag: Option<TimeCategory>, primitive: bool) {
        let acc = self.per_thread.entry(tid).or_default().entry(site).or_default();
        acc.ncalls_total += 1;
        if primitive {
            acc.ncalls_primitive += 1;
        }
        if acc.tag.is_none() {
            acc.tag = tag;
        }
    }

    fn close(&mut self, tid: u64, frame: &Frame, elapsed: u64, _below: &[Frame]) {
        let acc = self.per_thread.entry(tid).or_default().entry(frame.site).or_default();
        acc.tottime_ns += elapsed - frame.child_ns;
        if frame.primitive {
            acc.cumtime_ns += elapsed;
        }
    }
}

/// Per-thread replay result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadReplay {
    pub thread_id: u64,
    pub(crate) sites: BTreeMap<SiteId, SiteAcc>,
    /// Summed spans of the thread's root-level activations.
    pub bracketed_ns: u64,
    /// Start of the first root activation.
    pub first_ns: Option<u64>,
    /// End of the last root activation.
    pub last_ns: Option<u64>,
    pub events: u64,
}

impl ThreadReplay {
    pub fn sum_tottime_ns(&self) -> u64 {
        self.sites.values().map(|a| a.tottime_ns).sum()
    }

    /// `(ncalls_total, ncalls_primitive, tottime_ns, cumtime_ns)` of `site`.
    pub fn site_totals(&self, site: SiteId) -> Option<(u64, u64, u64, u64)> {
        self.sites
            .get(&site)
            .map(|a| (a.ncalls_total, a.ncalls_primitive, a.tottime_ns, a.cumtime_ns))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub threads: Vec<ThreadReplay>,
    /// Repairs made while replaying (in addition to any the recorder logged).
    pub violations: Vec<NestingViolation>,
}

impl Replay {
    /// Rows summed over threads, in site-table order.
    pub fn function_stats(&self, trace: &Trace) -> Vec<FunctionStats> {
        let mut merged: BTreeMap<SiteId, SiteAcc> = BTreeMap::new();
        for t in &self.threads {
            for (site, a) in &t.sites {
                let m = merged.entry(*site).or_default();
                m.ncalls_total += a.ncalls_total;
                m.ncalls_primitive += a.ncalls_primitive;
                m.tottime_ns += a.tottime_ns;
                m.cumtime_ns += a.cumtime_ns;
                if m.tag.is_none() {
                    m.tag = a.tag;
                }
            }
        }
        merged
            .into_iter()
            .map(|(site, a)| to_function(trace, site, &a))
            .collect()
    }

    /// `(thread, site)` rows ordered by inclusive time, descending.
    pub fn thread_stats(&self, trace: &Trace, source: &str) -> Vec<ThreadStats> {
        let mut rows: Vec<ThreadStats> = Vec::new();
        for t in &self.threads {
            for (site, a) in &t.sites {
                rows.push(ThreadStats {
                    thread_id: t.thread_id,
                    source: String::from(source),
                    site: trace.sites[site.index()].clone(),
                    ncall: a.ncalls_total,
                    ncall_primitive: a.ncalls_primitive,
                    tsub_ns: a.tottime_ns,
                    ttot_ns: a.cumtime_ns,
                });
            }
        }
        rows.sort_by_key(|r| core::cmp::Reverse(r.ttot_ns));
        rows
    }
}

fn to_function(trace: &Trace, site: SiteId, a: &SiteAcc) -> FunctionStats {
    FunctionStats {
        site: trace.sites[site.index()].clone(),
        ncalls_total: a.ncalls_total,
        ncalls_primitive: a.ncalls_primitive,
        tottime_ns: a.tottime_ns,
        cumtime_ns: a.cumtime_ns,
        tag: a.tag,
    }
}

/// Full replay: per-thread tables, root spans and the repairs made.
pub fn replay(trace: &Trace, clock: Clock) -> Result<Replay, ProfileError> {
    let mut v = StatsVisitor::default();
    let (spans, violations) = walk(trace, clock, &mut v)?;
    let threads = spans
        .into_iter()
        .map(|(tid, span)| ThreadReplay {
            thread_id: tid,
            sites: v.per_thread.remove(&tid).unwrap_or_default(),
            bracketed_ns: span.bracketed_ns,
            first_ns: span.first_ns,
            last_ns: span.last_ns,
            events: span.events,
        })
        .collect();
    Ok(Replay { threads, violations })
}

/// Function table summed over all threads of `trace`.
pub fn aggregate_functions(trace: &Trace, clock: Clock) -> Result<Vec<FunctionStats>, ProfileError> {
    Ok(replay(trace, clock)?.function_stats(trace))
}

/// Per-thread table ordered by inclusive time, descending.
pub fn aggregate_threads(trace: &Trace, clock: Clock) -> Result<Vec<ThreadStats>, ProfileError> {
    Ok(replay(trace, clock)?.thread_stats(trace, ""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::CodeSite;

    const MS: u64 = 1_000_000;

    fn stats<'a>(rows: &'a [FunctionStats], sym: &str) -> &'a FunctionStats {
        rows.iter().find(|r| r.site.symbol == sym).unwrap()
    }

    #[test]
    fn child_time_is_subtracted() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        let g = t.intern(CodeSite::function("a.rs", 9, "g"));
        t.push(ProfileEvent::enter(1, f, 0, 0));
        t.push(ProfileEvent::enter(1, g, 3 * MS, 0));
        t.push(ProfileEvent::exit(1, g, 7 * MS, 0));
        t.push(ProfileEvent::exit(1, f, 10 * MS, 0));
        let rows = aggregate_functions(&t, Clock::Wall).unwrap();
        assert_eq!(stats(&rows, "f").tottime_ns, 6 * MS);
        assert_eq!(stats(&rows, "f").cumtime_ns, 10 * MS);
        assert_eq!(stats(&rows, "g").cumtime_ns, 4 * MS);
        assert_eq!(stats(&rows, "g").tottime_ns, 4 * MS);
    }

    #[test]
    fn single_call_has_equal_times() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        t.push(ProfileEvent::enter(1, f, 5, 0));
        t.push(ProfileEvent::exit(1, f, 17, 0));
        let rows = aggregate_functions(&t, Clock::Wall).unwrap();
        assert_eq!(rows[0].tottime_ns, rows[0].cumtime_ns);
        assert_eq!(rows[0].ncalls_label(), "1");
    }

    #[test]
    fn recursion_counts_primitive_activation_once() {
        // f [0,10] -> f [2,8] -> g [3,5]
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        let g = t.intern(CodeSite::function("a.rs", 9, "g"));
        for e in [
            ProfileEvent::enter(1, f, 0, 0),
            ProfileEvent::enter(1, f, 2, 0),
            ProfileEvent::enter(1, g, 3, 0),
            ProfileEvent::exit(1, g, 5, 0),
            ProfileEvent::exit(1, f, 8, 0),
            ProfileEvent::exit(1, f, 10, 0),
        ] {
            t.push(e);
        }
        let rows = aggregate_functions(&t, Clock::Wall).unwrap();
        let fs = stats(&rows, "f");
        assert_eq!(fs.ncalls_label(), "2/1");
        assert_eq!(fs.cumtime_ns, 10);
        // outer: 10 - 6 = 4, inner: 6 - 2 = 4
        assert_eq!(fs.tottime_ns, 8);
        assert_eq!(stats(&rows, "g").cumtime_ns, 2);
    }

    #[test]
    fn unmatched_exit_is_dropped_and_reported() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        let g = t.intern(CodeSite::function("a.rs", 2, "g"));
        t.push(ProfileEvent::enter(1, f, 0, 0));
        t.push(ProfileEvent::exit(1, g, 1, 0));
        t.push(ProfileEvent::exit(1, f, 4, 0));
        let r = replay(&t, Clock::Wall).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::UnmatchedExit);
        assert_eq!(r.threads[0].bracketed_ns, 4);
    }

    #[test]
    fn outer_exit_closes_inner_frames() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        let g = t.intern(CodeSite::function("a.rs", 2, "g"));
        t.push(ProfileEvent::enter(1, f, 0, 0));
        t.push(ProfileEvent::enter(1, g, 2, 0));
        t.push(ProfileEvent::exit(1, f, 6, 0));
        let r = replay(&t, Clock::Wall).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::UnclosedEnter);
        let rows = r.function_stats(&t);
        assert_eq!(stats(&rows, "g").cumtime_ns, 4);
        assert_eq!(stats(&rows, "f").tottime_ns, 2);
    }

    #[test]
    fn open_frames_close_at_end_of_stream() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        t.push(ProfileEvent::enter(1, f, 3, 0));
        let r = replay(&t, Clock::Wall).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.threads[0].bracketed_ns, 0);
    }

    #[test]
    fn backwards_clock_is_malformed() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        t.push(ProfileEvent::enter(1, f, 10, 0));
        t.push(ProfileEvent::exit(1, f, 4, 0));
        assert!(matches!(
            aggregate_functions(&t, Clock::Wall),
            Err(ProfileError::MalformedStream { thread_id: 1, .. })
        ));
    }

    #[test]
    fn dangling_site_is_malformed() {
        let mut t = Trace::new();
        t.push(ProfileEvent::enter(1, SiteId(3), 10, 0));
        assert!(aggregate_functions(&t, Clock::Wall).is_err());
    }

    #[test]
    fn cpu_clock_uses_cpu_stamps() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        t.push(ProfileEvent::enter(1, f, 0, 100));
        t.push(ProfileEvent::exit(1, f, 1000, 130));
        let rows = aggregate_functions(&t, Clock::Cpu).unwrap();
        assert_eq!(rows[0].cumtime_ns, 30);
    }

    #[test]
    fn threads_are_kept_apart() {
        let mut t = Trace::new();
        let f = t.intern(CodeSite::function("a.rs", 1, "f"));
        // interleaved: thread 2's exit of f must not close thread 1's frame
        t.push(ProfileEvent::enter(1, f, 0, 0));
        t.push(ProfileEvent::enter(2, f, 1, 0));
        t.push(ProfileEvent::exit(2, f, 3, 0));
        t.push(ProfileEvent::exit(1, f, 9, 0));
        let rows = aggregate_threads(&t, Clock::Wall).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].thread_id, 1);
        assert_eq!(rows[0].ttot_ns, 9);
        assert_eq!(rows[1].ttot_ns, 2);
    }

    #[test]
    fn zero_events_give_empty_tables() {
        let t = Trace::new();
        assert!(aggregate_threads(&t, Clock::Wall).unwrap().is_empty());
        assert!(aggregate_functions(&t, Clock::Wall).unwrap().is_empty());
    }
}
