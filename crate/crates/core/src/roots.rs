//! Bracketed scalar root finding shared by the threshold computations.

/// Points in the logarithmic sign-change scan that precedes bisection.
pub(crate) const SCAN_POINTS: usize = 1 << 10;

/// Bisection on `[lo, hi]`, assuming `f(lo)` and `f(hi)` have opposite
/// signs. Stops once the bracket is narrower than `rel_tol * hi`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let lo_positive = f(lo) > 0.0;
    for _ in 0..400 {
        if hi - lo <= rel_tol * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest root of `f` in `(lo, hi)`, where `lo > 0`, `f(lo) > 0` and
/// `f(hi) < 0`. The interval is scanned on a log-spaced grid for the last
/// sign change, which is then refined by bisection.
pub(crate) fn largest_root_log_scan<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    debug_assert!(lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln() / (SCAN_POINTS - 1) as f64;
    let grid = |i: usize| {
        if i == SCAN_POINTS - 1 {
            hi
        } else {
            lo * (ratio * i as f64).exp()
        }
    };
    let mut right = hi;
    let mut left = lo;
    for i in (0..SCAN_POINTS - 1).rev() {
        let x = grid(i);
        if f(x) > 0.0 {
            left = x;
            right = grid(i + 1);
            break;
        }
    }
    bisect(f, left, right, rel_tol)
}

/// Doubles `start` until `f` turns negative. `None` if it never does.
pub(crate) fn expand_until_negative<F: Fn(f64) -> f64>(f: F, start: f64) -> Option<f64> {
    let mut x = start;
    for _ in 0..2100 {
        if f(x) < 0.0 {
            return Some(x);
        }
        x *= 2.0;
        if !x.is_finite() {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| 2.0 - x * x, 1.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn scan_picks_largest_root() {
        // Roots at 1, 10 and 100; positive just above 0.5 and negative past 100.
        let f = |x: f64| -(x - 1.0) * (x - 10.0) * (x - 100.0);
        let r = largest_root_log_scan(f, 0.5, 1000.0, 1e-12);
        assert!((r - 100.0).abs() < 1e-8, "{r}");
    }

    #[test]
    fn expansion() {
        assert_eq!(expand_until_negative(|x| 5.0 - x, 1.0), Some(8.0));
        assert_eq!(expand_until_negative(|_| 1.0, 1.0), None);
    }
}
