use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Where a nanosecond of profiled time went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeCategory {
    UserCompute,
    Kernel,
    IoWaitPoll,
    Sleep,
    Heartbeat,
    VmLifecycle,
    Other,
}

impl TimeCategory {
    pub const ALL: [TimeCategory; 7] = [
        TimeCategory::UserCompute,
        TimeCategory::Kernel,
        TimeCategory::IoWaitPoll,
        TimeCategory::Sleep,
        TimeCategory::Heartbeat,
        TimeCategory::VmLifecycle,
        TimeCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TimeCategory::UserCompute => "UserCompute",
            TimeCategory::Kernel => "Kernel",
            TimeCategory::IoWaitPoll => "IoWaitPoll",
            TimeCategory::Sleep => "Sleep",
            TimeCategory::Heartbeat => "Heartbeat",
            TimeCategory::VmLifecycle => "VmLifecycle",
            TimeCategory::Other => "Other",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TimeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown time category `{0}`")]
pub struct UnknownCategory(pub alloc::string::String);

impl FromStr for TimeCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        TimeCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownCategory(t.into()))
    }
}
