use std::fmt;
use std::str::FromStr;

use adnprof_core::SiteKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Coarse,
    Function,
    Line,
    Thread,
    Sample,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::Coarse,
        Level::Function,
        Level::Line,
        Level::Thread,
        Level::Sample,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Coarse => "coarse",
            Level::Function => "function",
            Level::Line => "line",
            Level::Thread => "thread",
            Level::Sample => "sample",
        }
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown profiling level `{0}` (expected coarse, function, line, thread or sample)")]
pub struct UnknownLevel(pub String);

/// Set of profiling levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Levels(u8);

impl Default for Levels {
    /// Everything but sampling.
    fn default() -> Self {
        Levels::none()
            .with(Level::Coarse)
            .with(Level::Function)
            .with(Level::Line)
            .with(Level::Thread)
    }
}

impl Levels {
    pub fn none() -> Self {
        Levels(0)
    }

    pub fn all() -> Self {
        Level::ALL.into_iter().fold(Levels::none(), Levels::with)
    }

    pub fn with(self, l: Level) -> Self {
        Levels(self.0 | l.bit())
    }

    pub fn contains(self, l: Level) -> bool {
        self.0 & l.bit() != 0
    }

    /// Comma-separated level names; `all` selects every level.
    pub fn parse(s: &str) -> Result<Self, UnknownLevel> {
        let mut out = Levels::none();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                return Ok(Levels::all());
            }
            let l = Level::ALL
                .into_iter()
                .find(|l| l.as_str().eq_ignore_ascii_case(part))
                .ok_or_else(|| UnknownLevel(part.into()))?;
            out = out.with(l);
        }
        Ok(out)
    }

    /// Function tables, thread tables and line tables all replay function
    /// brackets; only line tables need region brackets.
    pub(crate) fn records(self, kind: SiteKind) -> bool {
        let brackets = self.contains(Level::Function) || self.contains(Level::Line) || self.contains(Level::Thread);
        match kind {
            SiteKind::Function | SiteKind::Builtin => brackets,
            SiteKind::Region => self.contains(Level::Line),
        }
    }

    pub fn names(self) -> Vec<&'static str> {
        Level::ALL
            .into_iter()
            .filter(|l| self.contains(*l))
            .map(Level::as_str)
            .collect()
    }
}

impl fmt::Display for Levels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(","))
    }
}

impl FromStr for Levels {
    type Err = UnknownLevel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Levels::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let l = Levels::parse("function, line").unwrap();
        assert_eq!(l.to_string(), "function,line");
        assert!(l.records(SiteKind::Region));
        assert_eq!(Levels::parse("all").unwrap(), Levels::all());
        assert_eq!(Levels::parse("flame"), Err(UnknownLevel("flame".into())));
        assert!(!Levels::parse("coarse").unwrap().records(SiteKind::Function));
    }
}
