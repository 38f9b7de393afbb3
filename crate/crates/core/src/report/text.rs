use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{order_functions, order_regions, order_threads, SortKey};
use crate::analysis::{coarse_percentages, DeltaReport, HotspotFinding};
use crate::coarse::CoarseBreakdown;
use crate::profile::{Clock, Profile, RegionReport, ThreadStats};
use crate::site::{CodeSite, SiteKind};
use crate::util::round_half_up;

pub const FUNCTION_HEADER: &str = "   ncalls  tottime  percall  cumtime  percall filename:lineno(function)";
pub const LINE_HEADER: &str = "Line #      Hits         Time  Per Hit   % Time  Line Contents";
pub const THREAD_HEADER: &str = "name                                  ncall  tsub      ttot      tavg";

const THREAD_NAME_WIDTH: usize = 36;

/// Formats like C's `%g` with six significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = libm::floor(libm::log10(x.abs())) as i32;
    let mut s = String::new();
    if !(-4..6).contains(&exp) {
        let _ = write!(s, "{:.5e}", x);
        // mantissa trimming, then C-style two-digit exponent
        let (m, e) = s
            .split_once('e')
            .map(|(m, e)| (String::from(m), String::from(e)))
            .unwrap_or_default();
        let m = trim_zeros(&m);
        let (sign, digits) = match e.strip_prefix('-') {
            Some(d) => ('-', d),
            None => ('+', e.as_str()),
        };
        let mut out = String::new();
        let _ = write!(out, "{}e{}{:0>2}", m, sign, digits);
        out
    } else {
        let decimals = (5 - exp).max(0) as usize;
        let _ = write!(s, "{:.*}", decimals, x);
        trim_zeros(&s)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        String::from(s.trim_end_matches('0').trim_end_matches('.'))
    } else {
        String::from(s)
    }
}

fn pct2(x: f64) -> f64 {
    round_half_up(x, 2)
}

/// pstats-shaped function table.
pub fn render_function_table(profile: &Profile, key: SortKey, top_n: Option<usize>) -> String {
    let mut out = String::new();
    let names: Vec<&str> = profile.sources.iter().map(|s| s.source.as_str()).collect();
    let _ = writeln!(out, "{} {}", profile.meta.run_id, names.join(", "));
    out.push('\n');
    let total = profile.total_calls();
    let prim = profile.primitive_calls();
    let secs = crate::ns_to_secs(profile.total_ns());
    if total == prim {
        let _ = writeln!(out, "         {} function calls in {:.3} seconds", total, secs);
    } else {
        let _ = writeln!(
            out,
            "         {} function calls ({} primitive calls) in {:.3} seconds",
            total, prim, secs
        );
    }
    out.push('\n');
    let _ = writeln!(out, "   Ordered by: {}", key.description());
    let rows = order_functions(&profile.functions, key, top_n);
    if rows.len() < profile.functions.len() {
        let _ = writeln!(
            out,
            "   List reduced from {} to {} due to restriction <{}>",
            profile.functions.len(),
            rows.len(),
            rows.len()
        );
    }
    out.push('\n');
    out.push_str(FUNCTION_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:>9} {:8.3} {:8.3} {:8.3} {:8.3} {}",
            r.ncalls_label(),
            r.tottime_s(),
            r.percall_tot_s(),
            r.cumtime_s(),
            r.percall_cum_s(),
            r.site
        );
    }
    out
}

fn line_contents(site: &CodeSite) -> String {
    match site.kind {
        SiteKind::Builtin => site.to_string(),
        _ => site.symbol.clone(),
    }
}

/// line_profiler-shaped statement table; times in microseconds.
pub fn render_line_table(report: &RegionReport, key: SortKey, top_n: Option<usize>) -> String {
    let mut out = String::new();
    out.push_str("Timer unit: 1e-06 s\n\n");
    let _ = writeln!(out, "Total time: {} s", fmt_g(report.total_s()));
    let _ = writeln!(out, "File: {}", report.function.file);
    let _ = writeln!(
        out,
        "Function: {} at line {}",
        report.function.symbol, report.function.line
    );
    out.push('\n');
    out.push_str(LINE_HEADER);
    out.push('\n');
    for _ in 0..LINE_HEADER.len() {
        out.push('=');
    }
    out.push('\n');
    for r in order_regions(&report.regions, key, top_n) {
        let micros = r.time_ns as f64 / 1_000.0;
        let per_hit = r.per_hit_s().map(|s| s * 1e6).unwrap_or(0.0);
        let _ = writeln!(
            out,
            "{:>6} {:>9} {:>12.0} {:>8.1} {:>8.1}  {}",
            r.site.line,
            r.hits,
            micros,
            per_hit,
            r.pct_time,
            line_contents(&r.site)
        );
    }
    out
}

fn thread_name(site: &CodeSite) -> String {
    let full = match site.kind {
        SiteKind::Builtin => site.to_string(),
        _ => {
            let mut s = String::new();
            let _ = write!(s, "{}:{} {}", site.file, site.line, site.symbol);
            s
        }
    };
    let n = full.chars().count();
    if n <= THREAD_NAME_WIDTH {
        full
    } else {
        let tail: String = full.chars().skip(n - (THREAD_NAME_WIDTH - 2)).collect();
        let mut s = String::from("..");
        s.push_str(&tail);
        s
    }
}

fn ncall_label(r: &ThreadStats) -> String {
    let mut s = String::new();
    if r.ncall == r.ncall_primitive {
        let _ = write!(s, "{}", r.ncall);
    } else {
        let _ = write!(s, "{}/{}", r.ncall, r.ncall_primitive);
    }
    s
}

/// yappi-shaped concurrency table; rows grouped by thread, threads ordered
/// by their first row under `key`.
pub fn render_thread_table(rows: &[ThreadStats], clock: Clock, key: SortKey, top_n: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Clock type: {}", clock.label());
    let _ = writeln!(out, "Ordered by: {}", key.description());
    out.push('\n');
    out.push_str(THREAD_HEADER);
    out.push('\n');
    let ordered = order_threads(rows, key, top_n);
    let mut groups: Vec<(&str, u64)> = Vec::new();
    for r in &ordered {
        if !groups.contains(&(r.source.as_str(), r.thread_id)) {
            groups.push((r.source.as_str(), r.thread_id));
        }
    }
    for (source, tid) in groups {
        if source.is_empty() {
            let _ = writeln!(out, "[thread {}]", tid);
        } else {
            let _ = writeln!(out, "[thread {} {}]", tid, source);
        }
        for r in ordered.iter().filter(|r| r.source == source && r.thread_id == tid) {
            let line = alloc::format!(
                "{:<36}  {:<5}  {:<8.6}  {:<8.6}  {:<8.6}",
                thread_name(&r.site),
                ncall_label(r),
                r.tsub_s(),
                r.ttot_s(),
                r.tavg_s()
            );
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
    out
}

/// A named process-level breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseRow {
    pub name: String,
    pub breakdown: CoarseBreakdown,
}

/// Per-process user/system/other split with a total row.
pub fn render_coarse_table(rows: &[CoarseRow], key: SortKey, top_n: Option<usize>) -> String {
    let mut v: Vec<&CoarseRow> = rows.iter().collect();
    match key {
        SortKey::Name => v.sort_by(|a, b| a.name.cmp(&b.name)),
        SortKey::Elapsed => v.sort_by(|a, b| b.breakdown.elapsed_s.total_cmp(&a.breakdown.elapsed_s)),
        _ => {}
    }
    if let Some(n) = top_n {
        v.truncate(n);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>12} {:>12} {:>12} {:>9} {:>9} {:>9}",
        "Process", "User Space", "System Calls", "Run Time", "User (%)", "Sys (%)", "Other (%)"
    );
    let mut total = CoarseBreakdown::zero();
    let write_row = |out: &mut String, name: &str, b: &CoarseBreakdown| {
        let (u, s, o) = match coarse_percentages(b) {
            Ok(p) => (pct2(p.user_pct), pct2(p.sys_pct), pct2(p.other_pct)),
            Err(_) => (0.0, 0.0, 0.0),
        };
        let _ = writeln!(
            out,
            "{:<20} {:>12.3} {:>12.3} {:>12.3} {:>9.2} {:>9.2} {:>9.2}{}",
            name,
            b.user_s,
            b.system_s,
            b.elapsed_s,
            u,
            s,
            o,
            if b.oversubscribed { " *" } else { "" }
        );
    };
    for r in &v {
        write_row(&mut out, &r.name, &r.breakdown);
        total = total.combine(&r.breakdown);
    }
    if !v.is_empty() {
        write_row(&mut out, "Total", &total);
    }
    out
}

pub fn render_hotspots(findings: &[HotspotFinding], top_n: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<4} {:<12} {:>9}  site", "rank", "category", "share(%)");
    for (i, f) in findings.iter().take(top_n.unwrap_or(usize::MAX)).enumerate() {
        let _ = writeln!(
            out,
            "{:<4} {:<12} {:>9.2}  {}",
            i + 1,
            f.category.as_str(),
            pct2(f.share_pct),
            f.site
        );
        let _ = writeln!(out, "     {}", f.recommendation);
        for e in &f.evidence {
            let _ = writeln!(
                out,
                "     {:>9} {:10.3} {:10.3}  {}",
                e.ncalls_label(),
                e.tottime_s(),
                e.cumtime_s(),
                e.site
            );
        }
    }
    out
}

pub fn render_compare(report: &DeltaReport, key: SortKey, top_n: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {} (scale {}): {:.3} s -> {:.3} s",
        report.scenario_id, report.scale_factor, report.before_total_s, report.after_total_s
    );
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<12} {:>10} {:>10} {:>10} {:>9} {:>9} {:>9}",
        "category", "before(s)", "after(s)", "delta(s)", "before%", "after%", "delta%"
    );
    for c in &report.categories {
        let _ = writeln!(
            out,
            "{:<12} {:>10.3} {:>10.3} {:>+10.3} {:>9.2} {:>9.2} {:>+9.2}{}",
            c.category.as_str(),
            c.before_s,
            c.after_s,
            c.delta_s,
            pct2(c.before_pct),
            pct2(c.after_pct),
            pct2(c.delta_pct),
            if c.regression { "  REGRESSION" } else { "" }
        );
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:>10} {:>10} {:>10} {:>10} {:>10}  site",
        "calls0", "calls1", "cum0(s)", "cum1(s)", "delta(s)"
    );
    let mut sites: Vec<_> = report.sites.iter().collect();
    if key == SortKey::Name {
        sites.sort_by_cached_key(|s| s.site.to_string());
    }
    for s in sites.into_iter().take(top_n.unwrap_or(usize::MAX)) {
        let _ = writeln!(
            out,
            "{:>10} {:>10} {:>10.3} {:>10.3} {:>+10.3}  {}",
            s.before_calls, s.after_calls, s.before_cum_s, s.after_cum_s, s.delta_cum_s, s.site
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format() {
        assert_eq!(fmt_g(0.62231), "0.62231");
        assert_eq!(fmt_g(5.08587), "5.08587");
        assert_eq!(fmt_g(5.085871234), "5.08587");
        assert_eq!(fmt_g(123456.7), "123457");
        assert_eq!(fmt_g(1234567.0), "1.23457e+06");
        assert_eq!(fmt_g(0.00001234), "1.234e-05");
        assert_eq!(fmt_g(2.0), "2");
        assert_eq!(fmt_g(0.0), "0");
    }

    #[test]
    fn long_thread_names_truncate_from_the_left() {
        let s = CodeSite::function("/usr/lib/python2.7/site-packages/mininet/util.py", 25, "quietRun");
        let n = thread_name(&s);
        assert_eq!(n.chars().count(), THREAD_NAME_WIDTH);
        assert!(n.starts_with(".."));
        assert!(n.ends_with("util.py:25 quietRun"));
    }
}
