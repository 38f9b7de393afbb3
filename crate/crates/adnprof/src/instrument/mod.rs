//! Event recording.
//!
//! Each recording thread owns an append-only buffer behind a thread-local;
//! nothing on the enter/exit path takes a lock. Sites are interned once per
//! call site through [`site!`](crate::site) and friends. A capture is turned
//! into a [`Trace`] with a dense site table when the thread finishes.
//!
//! Compiled code has no interpreter hook to lean on, so every profiled
//! function carries an explicit guard.

pub mod calibrate;
pub mod clock;
mod levels;
pub mod sampler;

use std::cell::RefCell;
use std::collections::HashMap;
use std::marker::PhantomData;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use adnprof_core::{
    CodeSite, EventKind, NestingViolation, ProfileEvent, SiteId, SiteKind, TimeCategory, Trace, ViolationKind,
};

pub use calibrate::{calibrate, ClockCalibration};
pub use levels::{Level, Levels, UnknownLevel};
pub use sampler::{sample_stacks, SampleStream, SampleTarget, Sampler};

#[derive(Default)]
struct Registry {
    sites: Vec<CodeSite>,
    index: HashMap<(String, u32, String), u32>,
}

fn registry() -> &'static Mutex<Registry> {
    static R: OnceLock<Mutex<Registry>> = OnceLock::new();
    R.get_or_init(Default::default)
}

/// Interns `site`; the same (file, line, symbol) always yields the same id.
pub fn register_site(site: CodeSite) -> SiteId {
    let mut r = registry().lock().unwrap_or_else(|e| e.into_inner());
    let key = (site.file.clone(), site.line, site.symbol.clone());
    if let Some(&id) = r.index.get(&key) {
        return SiteId(id);
    }
    let id = r.sites.len() as u32;
    r.sites.push(site);
    r.index.insert(key, id);
    SiteId(id)
}

pub fn registered_site(id: SiteId) -> Option<CodeSite> {
    let r = registry().lock().unwrap_or_else(|e| e.into_inner());
    r.sites.get(id.index()).cloned()
}

/// Calibration of this process, measured on first use.
pub fn cached_calibration() -> ClockCalibration {
    static C: OnceLock<ClockCalibration> = OnceLock::new();
    *C.get_or_init(calibrate)
}

/// Id of the shared `{sleep}` site.
pub fn sleep_site() -> SiteId {
    static ID: OnceLock<SiteId> = OnceLock::new();
    *ID.get_or_init(|| register_site(CodeSite::builtin("sleep")))
}

/// Id of the shared `{poll}` site.
pub fn poll_site() -> SiteId {
    static ID: OnceLock<SiteId> = OnceLock::new();
    *ID.get_or_init(|| register_site(CodeSite::builtin("poll")))
}

/// Interns a function site for the enclosing source location.
#[macro_export]
macro_rules! site {
    ($symbol:expr) => {{
        static ID: ::std::sync::OnceLock<$crate::core::SiteId> = ::std::sync::OnceLock::new();
        *ID.get_or_init(|| {
            $crate::instrument::register_site($crate::core::CodeSite::function(file!(), line!(), $symbol))
        })
    }};
}

/// Interns a region site for the enclosing source location.
#[macro_export]
macro_rules! region_site {
    ($symbol:expr) => {{
        static ID: ::std::sync::OnceLock<$crate::core::SiteId> = ::std::sync::OnceLock::new();
        *ID.get_or_init(|| $crate::instrument::register_site($crate::core::CodeSite::region(file!(), line!(), $symbol)))
    }};
}

/// Profiles the rest of the enclosing block as function `$symbol`.
#[macro_export]
macro_rules! profile_scope {
    ($symbol:expr) => {
        $crate::instrument::enter_function($crate::site!($symbol))
    };
}

/// Profiles `$body` as region `$symbol` and yields its value.
#[macro_export]
macro_rules! region {
    ($symbol:expr, $body:expr) => {{
        let _region = $crate::instrument::enter_region_guard($crate::region_site!($symbol));
        $body
    }};
}

const MAX_SHADOW_DEPTH: usize = 128;

/// Lock-free copy of a thread's open frames, read by the sampler.
pub(crate) struct ShadowStack {
    pub(crate) tid: u64,
    pub(crate) depth: AtomicUsize,
    pub(crate) frames: [AtomicU32; MAX_SHADOW_DEPTH],
    pub(crate) alive: AtomicBool,
    pub(crate) cpu_clock: Option<libc::clockid_t>,
}

impl ShadowStack {
    fn new(tid: u64) -> Self {
        Self {
            tid,
            depth: AtomicUsize::new(0),
            frames: std::array::from_fn(|_| AtomicU32::new(0)),
            alive: AtomicBool::new(true),
            cpu_clock: clock::current_thread_cpu_clock(),
        }
    }

    fn push(&self, site: u32) {
        let d = self.depth.load(Ordering::Relaxed);
        if d < MAX_SHADOW_DEPTH {
            self.frames[d].store(site, Ordering::Relaxed);
        }
        self.depth.store(d + 1, Ordering::Release);
    }

    fn pop(&self) {
        let d = self.depth.load(Ordering::Relaxed);
        self.depth.store(d.saturating_sub(1), Ordering::Release);
    }
}

#[derive(Debug, Clone, Copy)]
struct RawEvent {
    wall_ns: u64,
    cpu_ns: u64,
    site: u32,
    enter: bool,
    /// 0 for none, else 1 + position in `TimeCategory::ALL`.
    tag: u8,
}

struct Recorder {
    tid: u64,
    name: String,
    levels: Levels,
    events: Vec<RawEvent>,
    stack: Vec<u32>,
    violations: Vec<NestingViolation>,
    shadow: Option<Arc<ShadowStack>>,
}

thread_local! {
    static REC: RefCell<Option<Recorder>> = const { RefCell::new(None) };
}

static NEXT_TID: AtomicU64 = AtomicU64::new(1);

fn tag_code(tag: Option<TimeCategory>) -> u8 {
    tag.and_then(|t| TimeCategory::ALL.iter().position(|c| *c == t))
        .map_or(0, |i| i as u8 + 1)
}

fn tag_from_code(code: u8) -> Option<TimeCategory> {
    (code > 0).then(|| TimeCategory::ALL[code as usize - 1])
}

/// Starts recording on the calling thread; returns its profile thread id.
/// A thread already recording keeps its session.
pub fn start_thread(name: &str, levels: Levels) -> u64 {
    clock::init();
    REC.with(|r| {
        let mut r = r.borrow_mut();
        if let Some(rec) = r.as_ref() {
            return rec.tid;
        }
        let tid = NEXT_TID.fetch_add(1, Ordering::Relaxed);
        let shadow = levels.contains(Level::Sample).then(|| Arc::new(ShadowStack::new(tid)));
        *r = Some(Recorder {
            tid,
            name: name.into(),
            levels,
            events: Vec::with_capacity(4096),
            stack: Vec::new(),
            violations: Vec::new(),
            shadow,
        });
        tid
    })
}

pub fn is_recording() -> bool {
    REC.with(|r| r.borrow().is_some())
}

/// A sampler handle for the calling thread, when it records with the
/// sample level.
pub fn sample_target() -> Option<SampleTarget> {
    REC.with(|r| r.borrow().as_ref().and_then(|rec| rec.shadow.clone()).map(SampleTarget))
}

/// What one thread recorded.
pub struct ThreadCapture {
    pub tid: u64,
    pub name: String,
    events: Vec<RawEvent>,
    pub violations: Vec<NestingViolation>,
}

impl ThreadCapture {
    pub fn event_count(&self) -> usize {
        self.events.len()
    }
}

/// Stops recording on the calling thread. Frames still open are closed at
/// the current time and logged as `UnclosedEnter`.
pub fn finish_thread() -> Option<ThreadCapture> {
    let rec = REC.with(|r| r.borrow_mut().take())?;
    let mut rec = rec;
    if !rec.stack.is_empty() {
        let (wall, cpu) = (clock::wall_ns(), clock::thread_cpu_ns());
        while let Some(site) = rec.stack.pop() {
            rec.violations.push(NestingViolation {
                thread_id: rec.tid,
                site: SiteId(site),
                wall_ns: wall,
                kind: ViolationKind::UnclosedEnter,
            });
            rec.events.push(RawEvent {
                wall_ns: wall,
                cpu_ns: cpu,
                site,
                enter: false,
                tag: 0,
            });
        }
    }
    if let Some(s) = &rec.shadow {
        s.alive.store(false, Ordering::Release);
    }
    Some(ThreadCapture {
        tid: rec.tid,
        name: rec.name,
        events: rec.events,
        violations: rec.violations,
    })
}

#[inline]
fn record_enter(site: SiteId, kind: SiteKind, tag: Option<TimeCategory>) -> bool {
    REC.with(|r| {
        let mut r = r.borrow_mut();
        let Some(rec) = r.as_mut() else { return false };
        if !rec.levels.records(kind) {
            return false;
        }
        let wall_ns = clock::wall_ns();
        let cpu_ns = clock::thread_cpu_ns();
        rec.events.push(RawEvent {
            wall_ns,
            cpu_ns,
            site: site.0,
            enter: true,
            tag: tag_code(tag),
        });
        rec.stack.push(site.0);
        if let Some(s) = &rec.shadow {
            s.push(site.0);
        }
        true
    })
}

#[inline]
fn record_exit(site: SiteId, kind: SiteKind) {
    REC.with(|r| {
        let mut r = r.borrow_mut();
        let Some(rec) = r.as_mut() else { return };
        if !rec.levels.records(kind) {
            return;
        }
        let wall_ns = clock::wall_ns();
        let cpu_ns = clock::thread_cpu_ns();
        let Some(pos) = rec.stack.iter().rposition(|s| *s == site.0) else {
            rec.violations.push(NestingViolation {
                thread_id: rec.tid,
                site,
                wall_ns,
                kind: ViolationKind::UnmatchedExit,
            });
            return;
        };
        // frames opened above `site` and never closed end here too
        while rec.stack.len() > pos {
            let top = rec.stack.pop().unwrap_or(site.0);
            if rec.stack.len() != pos {
                rec.violations.push(NestingViolation {
                    thread_id: rec.tid,
                    site: SiteId(top),
                    wall_ns,
                    kind: ViolationKind::UnclosedEnter,
                });
            }
            rec.events.push(RawEvent {
                wall_ns,
                cpu_ns,
                site: top,
                enter: false,
                tag: 0,
            });
            if let Some(s) = &rec.shadow {
                s.pop();
            }
        }
    })
}

/// Closes its frame on drop.
#[must_use = "the frame closes when the guard drops"]
pub struct Guard {
    site: SiteId,
    kind: SiteKind,
    active: bool,
    _not_send: PhantomData<*const ()>,
}

impl Drop for Guard {
    fn drop(&mut self) {
        if self.active {
            record_exit(self.site, self.kind);
        }
    }
}

fn guard(site: SiteId, kind: SiteKind, tag: Option<TimeCategory>) -> Guard {
    let active = record_enter(site, kind, tag);
    Guard {
        site,
        kind,
        active,
        _not_send: PhantomData,
    }
}

pub fn enter_function(site: SiteId) -> Guard {
    guard(site, SiteKind::Function, None)
}

pub fn enter_region_guard(site: SiteId) -> Guard {
    guard(site, SiteKind::Region, None)
}

/// Opens a region frame; pair with [`exit_region`].
pub fn enter_region(site: SiteId) {
    record_enter(site, SiteKind::Region, None);
}

/// Closes the innermost open frame of `site`. An exit with no open frame is
/// logged as `UnmatchedExit` and otherwise ignored.
pub fn exit_region(site: SiteId) {
    record_exit(site, SiteKind::Region);
}

/// Runs `f` inside a tagged built-in frame.
pub fn builtin<T>(site: SiteId, tag: TimeCategory, f: impl FnOnce() -> T) -> T {
    let _g = guard(site, SiteKind::Builtin, Some(tag));
    f()
}

/// Sleeps for `d` inside the shared `{sleep}` frame, tagged `Sleep`.
pub fn instrument_sleep(d: Duration) {
    builtin(sleep_site(), TimeCategory::Sleep, || std::thread::sleep(d));
}

/// Builds a trace from finished captures and sample streams. Sites are
/// renumbered densely in order of first use.
pub fn build_trace(captures: &[ThreadCapture], samples: &[SampleStream]) -> Trace {
    let sites = registry().lock().unwrap_or_else(|e| e.into_inner()).sites.clone();
    let mut trace = Trace::new();
    let mut remap: HashMap<u32, SiteId> = HashMap::new();
    let mut map = |trace: &mut Trace, id: u32| -> SiteId {
        *remap
            .entry(id)
            .or_insert_with(|| trace.intern(sites.get(id as usize).cloned().unwrap_or_else(|| unknown_site(id))))
    };
    for c in captures {
        for e in &c.events {
            let site = map(&mut trace, e.site);
            let mut ev = if e.enter {
                ProfileEvent::enter(c.tid, site, e.wall_ns, e.cpu_ns)
            } else {
                ProfileEvent::exit(c.tid, site, e.wall_ns, e.cpu_ns)
            };
            ev.tag = tag_from_code(e.tag);
            trace.push(ev);
        }
        for v in &c.violations {
            let site = map(&mut trace, v.site.0);
            trace.violations.push(NestingViolation { site, ..*v });
        }
    }
    for s in samples {
        for e in &s.events {
            let mut ev = e.clone();
            ev.site = map(&mut trace, e.site.0);
            ev.stack = e.stack.iter().map(|id| map(&mut trace, id.0)).collect();
            trace.push(ev);
        }
    }
    // tags travel with the enter event; copy them to exits for readers
    let mut open: HashMap<(u64, SiteId), Vec<Option<TimeCategory>>> = HashMap::new();
    for ev in trace.events.iter_mut() {
        match ev.kind {
            EventKind::Enter => open.entry((ev.thread_id, ev.site)).or_default().push(ev.tag),
            EventKind::Exit => {
                if let Some(t) = open.get_mut(&(ev.thread_id, ev.site)).and_then(|v| v.pop()) {
                    ev.tag = t;
                }
            }
            EventKind::Sample => {}
        }
    }
    trace
}

fn unknown_site(id: u32) -> CodeSite {
    CodeSite::function("?", 0, format!("site#{id}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use adnprof_core::profile::{aggregate_functions, aggregate_regions};
    use adnprof_core::Clock;

    fn spin(d: Duration) {
        let t = std::time::Instant::now();
        while t.elapsed() < d {
            std::hint::spin_loop();
        }
    }

    fn on_fresh_thread<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
        std::thread::spawn(f).join().unwrap()
    }

    #[test]
    fn busy_region_measures_its_span() {
        let (trace, res) = on_fresh_thread(|| {
            start_thread("t", Levels::all());
            let site = crate::region_site!("busy");
            enter_region(site);
            spin(Duration::from_millis(1));
            exit_region(site);
            let c = finish_thread().unwrap();
            (build_trace(&[c], &[]), clock::wall_resolution_ns())
        });
        let rows = aggregate_functions(&trace, Clock::Wall).unwrap();
        let busy = &rows[0];
        assert_eq!(busy.ncalls_total, 1);
        // at least the spin, plus at most one clock read of slack
        assert!(busy.cumtime_ns >= 1_000_000 - res, "{}", busy.cumtime_ns);
        assert!(busy.cumtime_ns < 1_500_000, "{}", busy.cumtime_ns);
    }

    #[test]
    fn mismatched_exit_is_logged_and_stream_stays_valid() {
        let trace = on_fresh_thread(|| {
            start_thread("t", Levels::all());
            let a = crate::region_site!("a");
            let b = crate::region_site!("b");
            exit_region(a);
            enter_region(a);
            enter_region(b);
            exit_region(a);
            enter_region(b);
            build_trace(&[finish_thread().unwrap()], &[])
        });
        let kinds: Vec<ViolationKind> = trace.violations.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            [
                ViolationKind::UnmatchedExit,
                ViolationKind::UnclosedEnter,
                ViolationKind::UnclosedEnter
            ]
        );
        let r = adnprof_core::profile::replay(&trace, Clock::Wall).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(trace.events.len(), 6);
    }

    #[test]
    fn empty_body_and_zero_sleep() {
        let trace = on_fresh_thread(|| {
            start_thread("t", Levels::all());
            {
                let _g = crate::profile_scope!("empty");
            }
            instrument_sleep(Duration::ZERO);
            build_trace(&[finish_thread().unwrap()], &[])
        });
        let rows = aggregate_functions(&trace, Clock::Wall).unwrap();
        assert_eq!(rows.len(), 2);
        let sleep = rows.iter().find(|r| r.site.symbol == "sleep").unwrap();
        assert_eq!(sleep.tag, Some(TimeCategory::Sleep));
        assert!(sleep.cumtime_ns < 5_000_000);
        let empty = rows.iter().find(|r| r.site.symbol == "empty").unwrap();
        assert!(empty.cumtime_ns < 1_000_000);
    }

    #[test]
    fn sleep_inside_function_dominates_line_table() {
        let trace = on_fresh_thread(|| {
            start_thread("t", Levels::all());
            {
                let _g = crate::profile_scope!("starter");
                region!("prepare", spin(Duration::from_millis(1)));
                instrument_sleep(Duration::from_millis(100));
            }
            build_trace(&[finish_thread().unwrap()], &[])
        });
        let report = aggregate_regions(&trace, "starter", Clock::Wall).unwrap();
        let sleep = report.regions.iter().find(|r| r.site.symbol == "sleep").unwrap();
        assert!(sleep.pct_time > 97.0, "{}", sleep.pct_time);
    }

    #[test]
    fn levels_gate_recording() {
        let trace = on_fresh_thread(|| {
            start_thread("t", Levels::parse("function").unwrap());
            {
                let _g = crate::profile_scope!("kept");
                region!("dropped", ());
            }
            build_trace(&[finish_thread().unwrap()], &[])
        });
        assert_eq!(trace.events.len(), 2);
    }

    #[test]
    fn not_recording_is_a_no_op() {
        on_fresh_thread(|| {
            let _g = crate::profile_scope!("nothing");
            assert!(finish_thread().is_none());
        });
    }
}
