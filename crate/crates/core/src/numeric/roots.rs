//! Scalar root finding on a bracket.

/// Safeguarded Newton iteration for a function that changes sign on
/// `[lo, hi]`. Falls back to bisection whenever the Newton step leaves the
/// current bracket or fails to shrink it fast enough.
///
/// Returns `None` when `f(lo)` and `f(hi)` have the same strict sign.
pub fn newton_bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Option<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    // orient so that f(a) < 0 < f(b)
    let flip = fa > 0.0;
    let mut x = 0.5 * (a + b);
    let mut last_width = (b - a).abs();
    for _ in 0..max_iter {
        let (mut fx, dfx) = f(x);
        if flip {
            fx = -fx;
        }
        if fx == 0.0 {
            return Some(x);
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let width = (b - a).abs();
        if width <= tol * (1.0 + x.abs()) {
            return Some(0.5 * (a + b));
        }
        let dfx = if flip { -dfx } else { dfx };
        let newton = if dfx != 0.0 && dfx.is_finite() {
            x - fx / dfx
        } else {
            f64::NAN
        };
        let (lo_b, hi_b) = if a < b { (a, b) } else { (b, a) };
        x = if newton.is_finite() && newton > lo_b && newton < hi_b && width < 0.75 * last_width {
            newton
        } else {
            0.5 * (a + b)
        };
        last_width = width;
    }
    Some(x)
}

/// Plain bisection, for functions without a usable derivative.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let sa = fa.signum();
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol {
            return Some(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_sqrt_two() {
        let r = newton_bisect(|x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn no_sign_change_is_none() {
        assert!(newton_bisect(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12, 50).is_none());
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 50).is_none());
    }

    #[test]
    fn bisect_handles_kinks() {
        let r = bisect(|x: f64| (x - 0.3).max(0.0) - 0.1, 0.0, 1.0, 1e-14, 200).unwrap();
        assert!((r - 0.4).abs() < 1e-13);
    }
}
