/// Rounds half away from zero at `decimals` places.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = libm::pow(10.0, decimals as f64);
    let y = libm::floor(x.abs() * scale + 0.5) / scale;
    if x < 0.0 {
        -y
    } else {
        y
    }
}

/// Shell-style wildcard match: `*` any run, `?` any single char.
/// ASCII case-insensitive.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p = pattern.as_bytes();
    let t = text.as_bytes();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == b'?' || p[pi].eq_ignore_ascii_case(&t[ti])) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == b'*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == b'*' {
        pi += 1;
    }
    pi == p.len()
}
