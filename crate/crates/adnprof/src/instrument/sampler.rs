use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use adnprof_core::{EventKind, ProfileEvent, SiteId};

use super::{clock, ShadowStack, MAX_SHADOW_DEPTH};

/// A thread whose open frames can be sampled from elsewhere.
#[derive(Clone)]
pub struct SampleTarget(pub(crate) Arc<ShadowStack>);

impl SampleTarget {
    pub fn thread_id(&self) -> u64 {
        self.0.tid
    }
}

/// Samples taken from one thread. Site ids are registry ids until the
/// stream goes through `build_trace`.
#[derive(Debug, Clone, Default)]
pub struct SampleStream {
    pub thread_id: u64,
    pub interval: Duration,
    pub ticks: u64,
    /// Ticks that found no open frame; they produce no event.
    pub idle: u64,
    pub events: Vec<ProfileEvent>,
    /// The target finished before sampling ended.
    pub truncated: bool,
}

fn take(target: &ShadowStack) -> Option<ProfileEvent> {
    let depth = target.depth.load(Ordering::Acquire).min(MAX_SHADOW_DEPTH);
    if depth == 0 {
        return None;
    }
    let stack: Vec<SiteId> = target.frames[..depth]
        .iter()
        .map(|f| SiteId(f.load(Ordering::Relaxed)))
        .collect();
    let cpu_ns = target.cpu_clock.map_or(0, clock::read_cpu_clock);
    Some(ProfileEvent {
        thread_id: target.tid,
        kind: EventKind::Sample,
        site: stack[depth - 1],
        wall_ns: clock::wall_ns(),
        cpu_ns,
        tag: None,
        stack,
    })
}

fn run(target: Arc<ShadowStack>, interval: Duration, deadline: Option<Instant>, stop: &AtomicBool) -> SampleStream {
    let mut out = SampleStream {
        thread_id: target.tid,
        interval,
        ..SampleStream::default()
    };
    let interval = interval.max(Duration::from_micros(100));
    let start = Instant::now();
    // absolute deadlines keep the tick count from drifting
    let mut next = start + interval;
    loop {
        if stop.load(Ordering::Acquire) {
            break;
        }
        if deadline.is_some_and(|d| next > d) {
            break;
        }
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        }
        if !target.alive.load(Ordering::Acquire) {
            out.truncated = true;
            break;
        }
        out.ticks += 1;
        match take(&target) {
            Some(e) => out.events.push(e),
            None => out.idle += 1,
        }
        next += interval;
    }
    out
}

/// Samples `target` every `interval` for `duration`, on the calling thread.
pub fn sample_stacks(target: &SampleTarget, interval: Duration, duration: Duration) -> SampleStream {
    if duration.is_zero() {
        return SampleStream {
            thread_id: target.thread_id(),
            interval,
            ..SampleStream::default()
        };
    }
    let stop = AtomicBool::new(false);
    run(target.0.clone(), interval, Some(Instant::now() + duration), &stop)
}

/// Background sampler running until [`Sampler::stop`].
pub struct Sampler {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<SampleStream>,
}

impl Sampler {
    pub fn start(target: SampleTarget, interval: Duration) -> std::io::Result<Sampler> {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::Builder::new()
            .name("adnprof-sampler".into())
            .spawn(move || run(target.0, interval, None, &flag))?;
        Ok(Sampler { stop, handle })
    }

    pub fn stop(self) -> SampleStream {
        self.stop.store(true, Ordering::Release);
        self.handle.join().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_trace, finish_thread, start_thread, Level, Levels};
    use super::*;
    use adnprof_core::profile::aggregate_samples;

    fn burn(d: Duration) {
        let t = Instant::now();
        while t.elapsed() < d {
            std::hint::spin_loop();
        }
    }

    #[test]
    fn zero_duration_is_empty() {
        std::thread::spawn(|| {
            start_thread("t", Levels::none().with(Level::Sample));
            let t = crate::instrument::sample_target().unwrap();
            let s = sample_stacks(&t, Duration::from_millis(10), Duration::ZERO);
            assert_eq!((s.ticks, s.events.len()), (0, 0));
        })
        .join()
        .unwrap();
    }

    #[test]
    fn finished_target_truncates() {
        let (tx, rx) = std::sync::mpsc::channel();
        let h = std::thread::spawn(move || {
            start_thread("t", Levels::none().with(Level::Function).with(Level::Sample));
            tx.send(crate::instrument::sample_target().unwrap()).unwrap();
            {
                let _g = crate::profile_scope!("short");
                burn(Duration::from_millis(50));
            }
            finish_thread().unwrap()
        });
        let target = rx.recv().unwrap();
        let s = sample_stacks(&target, Duration::from_millis(5), Duration::from_secs(5));
        let cap = h.join().unwrap();
        assert!(s.truncated);
        assert!(s.ticks < 100);
        let trace = build_trace(&[cap], &[s]);
        assert!(aggregate_samples(&trace).samples > 0);
    }
}
