//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// A root located inside a sign-change bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketedRoot {
    pub root: f64,
    /// Final bracket, `lo < hi`, with `f(lo)` and `f(hi)` of opposite sign.
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]` until the bracket is narrower than `xtol`.
///
/// `f(lo)` and `f(hi)` must have opposite signs (a zero endpoint is returned
/// immediately). The returned root is the endpoint with smaller `|f|`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<BracketedRoot> {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(BracketedRoot { root: lo, lo, hi: lo, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(BracketedRoot { root: hi, lo: hi, hi, iterations: 0 });
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Solver(format!(
            "no sign change on [{lo}, {hi}] (f = {flo:e}, {fhi:e})"
        )));
    }
    let mut fhi = fhi;
    let mut iterations = 0;
    while hi - lo > xtol && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        iterations += 1;
        if fm == 0.0 {
            return Ok(BracketedRoot { root: mid, lo: mid, hi: mid, iterations });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    let root = if flo.abs() <= fhi.abs() { lo } else { hi };
    Ok(BracketedRoot { root, lo, hi, iterations })
}

/// Scan `f` on the ordered probe points and return the first sign-change bracket.
pub fn first_sign_change<F, I>(mut f: F, probes: I) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
    I: IntoIterator<Item = f64>,
{
    let mut prev: Option<(f64, f64)> = None;
    for x in probes {
        let fx = f(x);
        if let Some((px, pf)) = prev {
            if pf != 0.0 && (fx == 0.0 || fx.signum() != pf.signum()) {
                return Some((px, x));
            }
        }
        prev = Some((x, fx));
    }
    None
}
