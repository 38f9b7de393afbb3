use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

/// What kind of code a site names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    Function,
    Region,
    /// Runtime primitives (sleep, poll, write). Shown as `{symbol}` the way
    /// interpreter profilers show built-in methods.
    Builtin,
}

/// A profiled location: `(file, line, symbol)` is unique within a run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CodeSite {
    pub file: String,
    pub line: u32,
    pub symbol: String,
    pub kind: SiteKind,
}

impl CodeSite {
    pub fn new(file: impl Into<String>, line: u32, symbol: impl Into<String>, kind: SiteKind) -> Self {
        Self {
            file: file.into(),
            line,
            symbol: symbol.into(),
            kind,
        }
    }

    pub fn function(file: impl Into<String>, line: u32, symbol: impl Into<String>) -> Self {
        Self::new(file, line, symbol, SiteKind::Function)
    }

    pub fn region(file: impl Into<String>, line: u32, symbol: impl Into<String>) -> Self {
        Self::new(file, line, symbol, SiteKind::Region)
    }

    /// Built-ins are keyed by symbol alone, so every caller shares one row.
    pub fn builtin(symbol: impl Into<String>) -> Self {
        Self::new("~", 0, symbol, SiteKind::Builtin)
    }

    /// Identity used when merging profiles from different processes.
    pub fn key(&self) -> (&str, u32, &str) {
        (&self.file, self.line, &self.symbol)
    }
}

impl fmt::Display for CodeSite {
    /// `file:line(symbol)`, or `{symbol}` for built-ins.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SiteKind::Builtin => write!(f, "{{{}}}", self.symbol),
            _ => write!(f, "{}:{}({})", self.file, self.line, self.symbol),
        }
    }
}

/// Index into a [`Trace`](crate::Trace)'s site table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl SiteId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn display_matches_profiler_convention() {
        let f = CodeSite::function("driver.rs", 134, "start_global_controller");
        assert_eq!(f.to_string(), "driver.rs:134(start_global_controller)");
        assert_eq!(CodeSite::builtin("sleep").to_string(), "{sleep}");
    }
}
