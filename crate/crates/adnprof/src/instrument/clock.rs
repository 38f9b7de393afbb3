use std::sync::OnceLock;

static EPOCH_NS: OnceLock<u64> = OnceLock::new();

/// Pins the process wall-clock epoch; later calls are no-ops.
pub fn init() {
    EPOCH_NS.get_or_init(monotonic_ns);
}

#[inline]
fn monotonic_ns() -> u64 {
    read(libc::CLOCK_MONOTONIC)
}

/// Monotonic nanoseconds since the process epoch.
#[inline]
pub fn wall_ns() -> u64 {
    let epoch = *EPOCH_NS.get_or_init(monotonic_ns);
    monotonic_ns().saturating_sub(epoch)
}

#[inline]
fn read(clock: libc::clockid_t) -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid out-pointer; an invalid clock id only yields an error code.
    let rc = unsafe { libc::clock_gettime(clock, &mut ts) };
    if rc != 0 {
        return 0;
    }
    ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64
}

/// CPU time consumed by the calling thread.
#[inline]
pub fn thread_cpu_ns() -> u64 {
    read(libc::CLOCK_THREAD_CPUTIME_ID)
}

/// CPU clock of the calling thread, readable from other threads.
pub fn current_thread_cpu_clock() -> Option<libc::clockid_t> {
    let mut id: libc::clockid_t = 0;
    // SAFETY: pthread_self is always valid for the calling thread.
    let rc = unsafe { libc::pthread_getcpuclockid(libc::pthread_self(), &mut id) };
    (rc == 0).then_some(id)
}

/// Reads a clock obtained from [`current_thread_cpu_clock`]; 0 if it is gone.
pub fn read_cpu_clock(id: libc::clockid_t) -> u64 {
    read(id)
}

fn resolution(clock: libc::clockid_t) -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: as in `read`.
    let rc = unsafe { libc::clock_getres(clock, &mut ts) };
    if rc != 0 {
        return 1;
    }
    (ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64).max(1)
}

pub fn wall_resolution_ns() -> u64 {
    resolution(libc::CLOCK_MONOTONIC)
}

pub fn cpu_resolution_ns() -> u64 {
    resolution(libc::CLOCK_THREAD_CPUTIME_ID)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clocks_advance() {
        let (w0, c0) = (wall_ns(), thread_cpu_ns());
        let mut x = 0u64;
        for i in 0..200_000u64 {
            x = x.wrapping_mul(31).wrapping_add(i);
        }
        std::hint::black_box(x);
        assert!(wall_ns() > w0);
        assert!(thread_cpu_ns() > c0);
        assert!(wall_resolution_ns() >= 1);
    }
}
