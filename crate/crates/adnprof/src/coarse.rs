//! Process-level elapsed/user/system accounting, as `time(1)` reports it.

use std::fs;

use adnprof_core::CoarseBreakdown;

#[derive(Debug, thiserror::Error)]
pub enum CoarseError {
    #[error("process {0} not found")]
    ProcessNotFound(u32),
    #[error("unreadable accounting for process {pid}: {reason}")]
    Unreadable { pid: u32, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessRef {
    /// The calling process.
    Current,
    Pid(u32),
}

struct StatTimes {
    utime_ticks: u64,
    stime_ticks: u64,
    start_ticks: u64,
}

fn ticks_per_sec() -> f64 {
    // SAFETY: sysconf has no preconditions.
    let t = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if t > 0 {
        t as f64
    } else {
        100.0
    }
}

fn read_stat(pid: u32) -> Result<StatTimes, CoarseError> {
    let text = fs::read_to_string(format!("/proc/{pid}/stat")).map_err(|_| CoarseError::ProcessNotFound(pid))?;
    // the command name may hold spaces and parentheses; fields resume after the last ')'
    let rest = text
        .rsplit_once(')')
        .map(|(_, r)| r)
        .ok_or_else(|| CoarseError::Unreadable {
            pid,
            reason: "no command field".into(),
        })?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    // `rest` starts at field 3 (state)
    let field = |n: usize| -> Result<u64, CoarseError> {
        fields
            .get(n - 3)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| CoarseError::Unreadable {
                pid,
                reason: format!("field {n}"),
            })
    };
    Ok(StatTimes {
        utime_ticks: field(14)?,
        stime_ticks: field(15)?,
        start_ticks: field(22)?,
    })
}

fn uptime_s() -> Result<f64, CoarseError> {
    let text = fs::read_to_string("/proc/uptime").map_err(|e| CoarseError::Unreadable {
        pid: 0,
        reason: e.to_string(),
    })?;
    text.split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CoarseError::Unreadable {
            pid: 0,
            reason: "malformed /proc/uptime".into(),
        })
}

fn self_rusage() -> (f64, f64) {
    // SAFETY: zeroed rusage is a valid out-parameter.
    let mut ru: libc::rusage = unsafe { std::mem::zeroed() };
    // SAFETY: RUSAGE_SELF with a valid pointer.
    unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut ru) };
    let tv = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 / 1e6;
    (tv(ru.ru_utime), tv(ru.ru_stime))
}

/// Elapsed time since the process started, with user and system CPU time.
/// The calling process reads microsecond rusage; others read clock ticks.
pub fn read_process_times(p: ProcessRef) -> Result<CoarseBreakdown, CoarseError> {
    let pid = match p {
        ProcessRef::Current => std::process::id(),
        ProcessRef::Pid(pid) => pid,
    };
    let stat = read_stat(pid)?;
    let hz = ticks_per_sec();
    let elapsed = (uptime_s()? - stat.start_ticks as f64 / hz).max(0.0);
    let (user, system) = match p {
        ProcessRef::Current => self_rusage(),
        ProcessRef::Pid(_) => (stat.utime_ticks as f64 / hz, stat.stime_ticks as f64 / hz),
    };
    Ok(CoarseBreakdown::new(elapsed, user, system))
}
