use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{clock, finish_thread, record_enter, record_exit, register_site, Levels};
use adnprof_core::{CodeSite, SiteKind};

/// Measured recording cost and clock granularity of this host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockCalibration {
    pub wall_resolution_ns: u64,
    pub cpu_resolution_ns: u64,
    /// Mean cost of recording one event.
    pub event_cost_ns: f64,
    /// Mean cost of an enter/exit pair with an empty body.
    pub pair_cost_ns: f64,
    pub iterations: u64,
}

impl Default for ClockCalibration {
    fn default() -> Self {
        Self {
            wall_resolution_ns: 1,
            cpu_resolution_ns: 1,
            event_cost_ns: 0.0,
            pair_cost_ns: 0.0,
            iterations: 0,
        }
    }
}

const ITERATIONS: u64 = 20_000;

/// Times empty enter/exit pairs on a scratch thread; the best of three
/// batches is kept.
pub fn calibrate() -> ClockCalibration {
    let site = register_site(CodeSite::function(file!(), line!(), "calibration"));
    let best = std::thread::spawn(move || {
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            super::start_thread("calibration", Levels::default());
            let t = Instant::now();
            for _ in 0..ITERATIONS {
                record_enter(site, SiteKind::Function, None);
                record_exit(site, SiteKind::Function);
            }
            let per_pair = t.elapsed().as_nanos() as f64 / ITERATIONS as f64;
            finish_thread();
            best = best.min(per_pair);
        }
        best
    })
    .join()
    .unwrap_or(0.0);
    ClockCalibration {
        wall_resolution_ns: clock::wall_resolution_ns(),
        cpu_resolution_ns: clock::cpu_resolution_ns(),
        event_cost_ns: best / 2.0,
        pair_cost_ns: best,
        iterations: ITERATIONS,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn costs_are_positive_and_bounded() {
        let c = calibrate();
        assert!(c.pair_cost_ns > 0.0);
        // a pair is two clock pairs and two pushes; far below 100 µs anywhere
        assert!(c.pair_cost_ns < 100_000.0, "{c:?}");
        assert_eq!(c.event_cost_ns * 2.0, c.pair_cost_ns);
    }
}
