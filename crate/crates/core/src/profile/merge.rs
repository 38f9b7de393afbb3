use alloc::vec::Vec;

use super::{FunctionStats, Profile, ProfileError};

/// Sums per-site function rows across profiles of one run.
///
/// Thread rows and source summaries are concatenated, never combined: thread
/// ids and clocks are only meaningful inside their own process.
pub fn merge_profiles(parts: &[Profile]) -> Result<Profile, ProfileError> {
    let Some(first) = parts.first() else {
        return Err(ProfileError::EmptyMerge);
    };
    let mut out = Profile::empty(first.meta.clone());
    for p in parts {
        if p.meta.run_id != out.meta.run_id {
            return Err(ProfileError::RunIdMismatch {
                expected: out.meta.run_id.clone(),
                found: p.meta.run_id.clone(),
            });
        }
        out.sources.extend(p.sources.iter().cloned());
        out.threads.extend(p.threads.iter().cloned());
        for f in &p.functions {
            match out.functions.iter_mut().find(|m| m.site.key() == f.site.key()) {
                Some(m) => m.absorb(f),
                None => out.functions.push(f.clone()),
            }
        }
    }
    Ok(out)
}

impl Profile {
    /// Rows sharing a site key with `other`, paired; useful for diffs.
    pub fn pair_with<'a>(&'a self, other: &'a Profile) -> Vec<(Option<&'a FunctionStats>, Option<&'a FunctionStats>)> {
        let mut out: Vec<(Option<&FunctionStats>, Option<&FunctionStats>)> = Vec::new();
        for f in &self.functions {
            let o = other.functions.iter().find(|g| g.site.key() == f.site.key());
            out.push((Some(f), o));
        }
        for g in &other.functions {
            if !self.functions.iter().any(|f| f.site.key() == g.site.key()) {
                out.push((None, Some(g)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileMeta;
    use crate::site::CodeSite;
    use alloc::string::String;
    use alloc::vec;

    fn row(sym: &str, n: u64, tot: u64, cum: u64) -> FunctionStats {
        FunctionStats {
            ncalls_total: n,
            ncalls_primitive: n,
            tottime_ns: tot,
            cumtime_ns: cum,
            ..FunctionStats::new(CodeSite::function("a.rs", 1, sym))
        }
    }

    fn profile(run: &str, rows: Vec<FunctionStats>) -> Profile {
        Profile {
            functions: rows,
            ..Profile::empty(ProfileMeta {
                run_id: String::from(run),
                ..ProfileMeta::default()
            })
        }
    }

    #[test]
    fn merge_is_fieldwise_sum() {
        let a = profile("r", vec![row("f", 2, 10, 20), row("g", 1, 5, 5)]);
        let b = profile("r", vec![row("f", 3, 1, 2), row("h", 1, 7, 7)]);
        let m = merge_profiles(&[a, b]).unwrap();
        let f = m.function("f").unwrap();
        assert_eq!((f.ncalls_total, f.tottime_ns, f.cumtime_ns), (5, 11, 22));
        assert_eq!(m.functions.len(), 3);
    }

    #[test]
    fn merge_of_one_is_identity() {
        let a = profile("r", vec![row("f", 2, 10, 20)]);
        assert_eq!(merge_profiles(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn run_id_must_match() {
        let a = profile("r1", vec![]);
        let b = profile("r2", vec![]);
        assert!(matches!(
            merge_profiles(&[a, b]),
            Err(ProfileError::RunIdMismatch { .. })
        ));
        assert_eq!(merge_profiles(&[]), Err(ProfileError::EmptyMerge));
    }
}
