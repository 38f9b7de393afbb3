use serde::{Deserialize, Serialize};

/// Process-level split of elapsed time into user, system and everything else.
///
/// `other_s` is what the process spent neither on-CPU in user space nor in
/// the kernel: blocked on I/O, sleeping, or waiting to be scheduled. When
/// several threads burn CPU at once `user + system` can exceed `elapsed`;
/// `other_s` then clamps to zero and `oversubscribed` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseBreakdown {
    pub elapsed_s: f64,
    pub user_s: f64,
    pub system_s: f64,
    pub other_s: f64,
    pub oversubscribed: bool,
}

impl CoarseBreakdown {
    /// Negative inputs are clamped to zero.
    pub fn new(elapsed_s: f64, user_s: f64, system_s: f64) -> Self {
        let elapsed_s = elapsed_s.max(0.0);
        let user_s = user_s.max(0.0);
        let system_s = system_s.max(0.0);
        let busy = user_s + system_s;
        Self {
            elapsed_s,
            user_s,
            system_s,
            other_s: (elapsed_s - busy).max(0.0),
            oversubscribed: busy > elapsed_s,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Field-wise sum, with `other_s` recomputed from the summed parts.
    pub fn combine(&self, other: &CoarseBreakdown) -> CoarseBreakdown {
        CoarseBreakdown::new(
            self.elapsed_s + other.elapsed_s,
            self.user_s + other.user_s,
            self.system_s + other.system_s,
        )
    }
}
