use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::coarse::CoarseBreakdown;
use crate::util::round_half_up;

/// Shares of elapsed time, unrounded. `other_pct` is I/O wait plus anything
/// the OS did not account to the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarsePercentages {
    pub user_pct: f64,
    pub sys_pct: f64,
    pub other_pct: f64,
}

impl CoarsePercentages {
    /// Presentation values: half-up at two decimals.
    pub fn rounded(&self) -> CoarsePercentages {
        CoarsePercentages {
            user_pct: round_half_up(self.user_pct, 2),
            sys_pct: round_half_up(self.sys_pct, 2),
            other_pct: round_half_up(self.other_pct, 2),
        }
    }
}

pub fn coarse_percentages(b: &CoarseBreakdown) -> Result<CoarsePercentages, AnalysisError> {
    if !(b.elapsed_s > 0.0) {
        return Err(AnalysisError::ZeroElapsed);
    }
    Ok(CoarsePercentages {
        user_pct: 100.0 * b.user_s / b.elapsed_s,
        sys_pct: 100.0 * b.system_s / b.elapsed_s,
        other_pct: 100.0 * b.other_s / b.elapsed_s,
    })
}

/// A component's share of run time across several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeShare {
    pub per_run_pct: Vec<f64>,
    /// `100 * sum(component) / sum(run)`.
    pub pooled_pct: f64,
    /// Arithmetic mean of `per_run_pct`; differs from `pooled_pct` whenever
    /// run times differ.
    pub mean_pct: f64,
}

pub fn share_of_runtime(component: &[f64], run: &[f64]) -> Result<RuntimeShare, AnalysisError> {
    if component.len() != run.len() {
        return Err(AnalysisError::LengthMismatch {
            components: component.len(),
            runs: run.len(),
        });
    }
    if let Some(index) = run.iter().position(|r| !(*r > 0.0)) {
        return Err(AnalysisError::ZeroRuntime { index });
    }
    if run.is_empty() {
        return Ok(RuntimeShare {
            per_run_pct: Vec::new(),
            pooled_pct: 0.0,
            mean_pct: 0.0,
        });
    }
    let per_run_pct: Vec<f64> = component.iter().zip(run).map(|(c, r)| 100.0 * c / r).collect();
    let pooled_pct = 100.0 * component.iter().sum::<f64>() / run.iter().sum::<f64>();
    let mean_pct = per_run_pct.iter().sum::<f64>() / per_run_pct.len() as f64;
    Ok(RuntimeShare {
        per_run_pct,
        pooled_pct,
        mean_pct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 0.01
    }

    #[test]
    fn zero_user_and_system() {
        let p = coarse_percentages(&CoarseBreakdown::new(10.0, 0.0, 0.0)).unwrap();
        assert_eq!((p.user_pct, p.sys_pct, p.other_pct), (0.0, 0.0, 100.0));
    }

    #[test]
    fn zero_elapsed_is_an_error() {
        assert_eq!(
            coarse_percentages(&CoarseBreakdown::zero()),
            Err(AnalysisError::ZeroElapsed)
        );
    }

    #[test]
    fn table_two_rows() {
        // (user, system, run, printed user %)
        let rows = [
            (14.161, 5.072, 229.438, 6.17),
            (83.637, 15.797, 200.835, 41.64),
            (18.549, 7.16, 175.57, 10.57),
            (19.95, 8.86, 156.99, 12.71),
            (0.428, 0.036, 18.855, 2.27),
            (136.725, 36.925, 781.688, 17.49),
        ];
        for (u, s, r, want) in rows {
            let p = coarse_percentages(&CoarseBreakdown::new(r, u, s)).unwrap().rounded();
            assert!(close(p.user_pct, want), "{u}/{r} -> {}", p.user_pct);
        }
    }

    #[test]
    fn vm_create_and_start_shares() {
        let run = [100.969, 77.621, 105.849];
        let vm = [15.441 + 2.162, 15.255 + 2.155, 15.482 + 2.22];
        let s = share_of_runtime(&vm, &run).unwrap();
        for (got, want) in s.per_run_pct.iter().zip([17.43, 22.43, 16.72]) {
            assert!(close(round_half_up(*got, 2), want));
        }
        // both readings of "about 18.5%" are reported
        assert!(close(round_half_up(s.pooled_pct, 2), 18.53));
        assert!(close(round_half_up(s.mean_pct, 2), 18.86));
    }

    #[test]
    fn component_equal_to_run_is_100() {
        let s = share_of_runtime(&[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!(s.per_run_pct, [100.0, 100.0]);
        assert_eq!(s.pooled_pct, 100.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            share_of_runtime(&[1.0], &[1.0, 2.0]),
            Err(AnalysisError::LengthMismatch { components: 1, runs: 2 })
        );
        assert_eq!(
            share_of_runtime(&[1.0, 1.0], &[1.0, 0.0]),
            Err(AnalysisError::ZeroRuntime { index: 1 })
        );
    }
}
